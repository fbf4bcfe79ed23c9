// cmsd: generate data, train, evaluate and sweep both tasks.
//
// Every run lives in $CMSD_OUT/<task>-<config hash>/ (CMSD_OUT defaults to
// ./cmsd-out). Exit codes: 0 ok, 1 unexpected, 2 configuration, 3 I/O,
// 4 training divergence.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cmsd/errors.hpp"
#include "cmsd/relcap.hpp"
#include "cmsd/serialize.hpp"
#include "cmsd/synth.hpp"

namespace {

using namespace cmsd;
using io::json;
namespace fs = std::filesystem;

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDiverged = 4;

struct Options {
  std::string task = "synth";
  std::string preset = "desk";
  std::string config_file;
  std::optional<std::string> mode, fusion, label_set, fuse_source;
  std::optional<std::size_t> K, epochs;
  std::optional<std::uint64_t> seed;
  std::size_t runs = 5;
  bool fresh = false;
  bool quiet = false;
};

fs::path out_root() {
  const char* env = std::getenv("CMSD_OUT");
  return env && *env ? fs::path(env) : fs::path("cmsd-out");
}

void apply_common(const Options& o, DecodeMode& mode, FusionConfig& fusion, std::size_t& epochs, std::uint64_t& seed) {
  if (o.mode) mode = parse_decode_mode(*o.mode);
  if (o.fusion) fusion.mode = parse_fusion_mode(*o.fusion);
  if (o.K) fusion.iterations = *o.K;
  if (o.epochs) epochs = *o.epochs;
  if (o.seed) seed = *o.seed;
}

json resolve(const Options& o) {
  std::optional<json> base;
  if (!o.config_file.empty()) base = json::parse(io::read_text(o.config_file), nullptr, false);
  if (base && base->is_discarded()) throw IoError(o.config_file + ": not valid JSON");
  const std::string task = base ? base->value("task", "") : o.task;
  if (task == "synth") {
    if (o.label_set || o.fuse_source) throw ConfigError("--label-set and --fuse-source apply to relcap only");
    auto c = base ? io::synth_config_from_json(*base) : synth::synth_preset(o.preset);
    apply_common(o, c.mode, c.fusion, c.epochs, c.seed);
    return io::to_json(c);
  }
  if (task == "relcap") {
    auto c = base ? io::relcap_config_from_json(*base) : relcap::relcap_preset(o.preset);
    apply_common(o, c.mode, c.fusion, c.epochs, c.seed);
    if (o.label_set) c.labels = relcap::parse_label_variant(*o.label_set);
    if (o.fuse_source) c.fuse_source = relcap::parse_fuse_source(*o.fuse_source);
    return io::to_json(c);
  }
  throw ConfigError("unknown task '" + task + "' (synth or relcap)");
}

struct Run {
  json config;
  std::string hash;
  fs::path dir;
};

Run open_run(const json& config) {
  Run r{config, io::config_hash(config), {}};
  r.dir = out_root() / (config.at("task").get<std::string>() + "-" + r.hash);
  json stamped = {{"config", config}, {"config_hash", r.hash}};
  io::write_text(r.dir / "config.json", stamped.dump(2) + "\n");
  return r;
}

// Data files depend on the whole config so each run directory is self-contained.
synth::Splits synth_data(const Run& run, const synth::SynthConfig& c, bool write) {
  const auto dir = run.dir / "data";
  if (!write && fs::exists(dir / "train.txt")) {
    return {io::parse_synth(io::read_text(dir / "train.txt")), io::parse_synth(io::read_text(dir / "val.txt")),
            io::parse_synth(io::read_text(dir / "test.txt"))};
  }
  auto s = synth::build_dataset(c);
  io::write_text(dir / "train.txt", io::format_synth(s.train));
  io::write_text(dir / "val.txt", io::format_synth(s.val));
  io::write_text(dir / "test.txt", io::format_synth(s.test));
  return s;
}

std::vector<relcap::Scene> load_split(const fs::path& dir, const std::string& split) {
  auto scenes = io::parse_scenes(io::read_text(dir / ("scenes-" + split + ".jsonl")));
  io::attach_labels(scenes, io::parse_labels(io::read_text(dir / ("labels-original-" + split + ".jsonl"))));
  return scenes;
}

void write_split(const fs::path& dir, const std::string& split, const std::vector<relcap::Scene>& scenes) {
  io::write_text(dir / ("scenes-" + split + ".jsonl"), io::format_scenes(scenes));
  for (auto v : {relcap::LabelVariant::original, relcap::LabelVariant::consistent}) {
    std::vector<std::vector<relcap::Caption>> caps;
    for (const auto& s : scenes) caps.push_back(relcap::labels(s, v));
    io::write_text(dir / ("labels-" + std::string(relcap::to_string(v)) + "-" + split + ".jsonl"), io::format_labels(caps));
  }
}

relcap::Corpus relcap_data(const Run& run, const relcap::RelcapConfig& c, bool write) {
  const auto dir = run.dir / "data";
  if (!write && fs::exists(dir / "scenes-train.jsonl")) {
    return {load_split(dir, "train"), load_split(dir, "val"), load_split(dir, "test")};
  }
  auto corpus = relcap::build_corpus(c);
  write_split(dir, "train", corpus.train);
  write_split(dir, "val", corpus.val);
  write_split(dir, "test", corpus.test);
  return corpus;
}

json checkpoint(const Run& run, const ParameterSet& params, const TrainProgress& p, const json& extra) {
  json j = {{"format", "cmsd-checkpoint"},
            {"version", 1},
            {"task", run.config.at("task")},
            {"config", run.config},
            {"config_hash", run.hash},
            {"progress", io::to_json(p)},
            {"params", io::to_json(params)}};
  j.update(extra);
  return j;
}

std::optional<json> read_checkpoint(const Run& run) {
  const auto path = run.dir / "checkpoint.json";
  if (!fs::exists(path)) return std::nullopt;
  auto j = json::parse(io::read_text(path), nullptr, false);
  if (j.is_discarded() || j.value("format", "") != "cmsd-checkpoint" || j.value("version", 0) != 1) {
    throw IoError(path.string() + ": not a cmsd checkpoint");
  }
  if (j.at("config_hash") != run.hash) throw IoError(path.string() + ": checkpoint belongs to another config");
  return j;
}

void log_epoch(const Options& o, const TrainProgress& p) {
  if (o.quiet) return;
  const auto& r = p.trace.back();
  std::printf("epoch %zu  loss %.6g  val %.6g  lr %g\n", r.epoch, r.train_loss, r.val_metric, r.lr);
  std::fflush(stdout);
}

std::vector<io::ReportRow> write_report(const Run& run, std::vector<io::ReportRow> rows) {
  io::write_text(run.dir / "report.csv", io::format_report(rows, run.hash));
  return rows;
}

// Each task exposes the same three steps to the commands below.
struct SynthTask {
  const Options& opts;
  Run run;
  synth::SynthConfig config;

  void gen() { synth_data(run, config, true); }

  synth::SynthModel train_model(const synth::Splits& data, bool resume) {
    synth::SynthModel model(config, synth::fit_normalizer(data.train));
    std::optional<TrainProgress> progress;
    if (auto ck = resume ? read_checkpoint(run) : std::nullopt) {
      io::load(model.params(), ck->at("params"));
      progress = io::progress_from_json(ck->at("progress"));
    }
    const json norm = {{"normalizer", io::to_json(model.normalizer())}};
    synth::train_synth(model, data, progress, [&](const synth::SynthModel& m, const TrainProgress& p) {
      log_epoch(opts, p);
      io::write_text(run.dir / "checkpoint.json", checkpoint(run, m.params(), p, norm).dump() + "\n");
    });
    return model;
  }

  void train() { train_model(synth_data(run, config, false), !opts.fresh); }

  std::vector<io::ReportRow> eval() {
    const auto data = synth_data(run, config, false);
    auto ck = read_checkpoint(run);
    if (!ck) throw IoError("no checkpoint in " + run.dir.string() + "; run train first");
    synth::SynthModel model(config, io::normalizer_from_json(ck->at("normalizer")));
    io::load(model.params(), ck->at("params"));
    const auto mse = synth::eval_mse(model, data.test);
    return write_report(run, {{"mse_y1", mse.y1, data.test.size()}, {"mse_y2", mse.y2, data.test.size()}});
  }
};

struct RelcapTask {
  const Options& opts;
  Run run;
  relcap::RelcapConfig config;

  void gen() { relcap_data(run, config, true); }

  void train() {
    const auto corpus = relcap_data(run, config, false);
    relcap::RelcapModel model(config);
    std::optional<TrainProgress> progress;
    if (auto ck = opts.fresh ? std::nullopt : read_checkpoint(run)) {
      io::load(model.params(), ck->at("params"));
      progress = io::progress_from_json(ck->at("progress"));
    }
    relcap::train_relcap(model, corpus, progress, [&](const relcap::RelcapModel& m, const TrainProgress& p) {
      log_epoch(opts, p);
      io::write_text(run.dir / "checkpoint.json", checkpoint(run, m.params(), p, json::object()).dump() + "\n");
    });
  }

  std::vector<io::ReportRow> eval() {
    const auto corpus = relcap_data(run, config, false);
    auto ck = read_checkpoint(run);
    if (!ck) throw IoError("no checkpoint in " + run.dir.string() + "; run train first");
    relcap::RelcapModel model(config);
    io::load(model.params(), ck->at("params"));
    const auto s = relcap::evaluate(model, corpus.test, opts.runs, config.seed);
    return write_report(run, {{"consistency", s.consistency, s.consistency_boxes},
                              {"bbox_diversity", s.bbox_diversity, s.diversity_mentions},
                              {"image_recall", s.image_recall, corpus.test.size()},
                              {"dropped_descriptions", static_cast<double>(s.dropped_descriptions), corpus.test.size()}});
  }
};

template <typename F>
void with_task(const Options& o, const json& config, F&& f) {
  Run run = open_run(config);
  if (!o.quiet) std::printf("run %s\n", run.dir.string().c_str());
  if (config.at("task") == "synth") {
    SynthTask t{o, run, io::synth_config_from_json(config)};
    f(t);
  } else {
    RelcapTask t{o, run, io::relcap_config_from_json(config)};
    f(t);
  }
}

void print_rows(const std::vector<io::ReportRow>& rows) {
  for (const auto& r : rows) std::printf("%-22s %12.6g  (n=%zu)\n", r.metric.c_str(), r.value, r.n_items);
}

// Variants compared by a sweep, as config overrides on top of the resolved config.
std::vector<std::pair<std::string, json>> sweep_variants(const json& base) {
  std::vector<std::pair<std::string, json>> out;
  auto variant = [&](std::string name, std::string mode, std::string fusion, std::size_t k) {
    json c = base;
    c["mode"] = mode;
    c["fusion"] = {{"mode", fusion}, {"K", k}};
    out.emplace_back(std::move(name), std::move(c));
  };
  const auto k = base.at("fusion").at("K").get<std::size_t>();
  if (base.at("task") == "synth") {
    variant("independent", "independent", "full", k);
    variant("baseline2x", "baseline2x", "full", k);
    variant("consistent", "consistent", "full", k);
  } else {
    variant("independent", "independent", "full", k);
    variant("no_gnn", "consistent", "no_gnn", 1);
    variant("equal_attention", "consistent", "equal_attention", 1);
    variant("K1", "consistent", "full", 1);
    variant("K2", "consistent", "full", 2);
  }
  return out;
}

int run_command(const std::string& command, const Options& o) {
  const json config = resolve(o);
  if (command == "sweep") {
    std::vector<io::ReportRow> rows;
    for (auto& [name, variant] : sweep_variants(config)) {
      if (!o.quiet) std::printf("== %s\n", name.c_str());
      with_task(o, variant, [&](auto& t) {
        t.gen();
        t.train();
        for (auto r : t.eval()) rows.push_back({name + "/" + r.metric, r.value, r.n_items});
      });
    }
    const auto path = out_root() / ("sweep-" + config.at("task").get<std::string>() + "-" + io::config_hash(config) + ".csv");
    io::write_text(path, io::format_report(rows, io::config_hash(config)));
    print_rows(rows);
    std::printf("wrote %s\n", path.string().c_str());
    return 0;
  }
  with_task(o, config, [&](auto& t) {
    if (command == "gen") t.gen();
    if (command == "train") t.train();
    if (command == "eval") print_rows(t.eval());
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consistent multiple sequence decoding: synthetic and relational captioning experiments"};
  app.require_subcommand(1, 1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--task", o.task, "synth or relcap (taken from --config when given)");
    sub->add_option("--preset", o.preset, "desk or paper");
    sub->add_option("--config", o.config_file, "JSON config to start from instead of a preset");
    sub->add_option("--mode", o.mode, "independent, baseline2x or consistent");
    sub->add_option("--fusion", o.fusion, "full, equal_attention or no_gnn");
    sub->add_option("--K", o.K, "fusion iterations per step");
    sub->add_option("--epochs", o.epochs, "training epochs");
    sub->add_option("--seed", o.seed, "run seed");
    sub->add_option("--label-set", o.label_set, "relcap training labels: original or consistent");
    sub->add_option("--fuse-source", o.fuse_source, "relcap fusion input while training: prediction or ground_truth");
    sub->add_flag("--quiet", o.quiet, "no per-epoch log");
  };
  auto* gen = app.add_subcommand("gen", "write the dataset for a config");
  auto* train = app.add_subcommand("train", "train, resuming from the run's checkpoint when present");
  auto* eval = app.add_subcommand("eval", "score the trained checkpoint on the test split");
  auto* sweep = app.add_subcommand("sweep", "train and evaluate the comparison variants of a config");
  for (auto* sub : {gen, train, eval, sweep}) add_common(sub);
  train->add_flag("--fresh", o.fresh, "ignore an existing checkpoint");
  sweep->add_flag("--fresh", o.fresh, "ignore existing checkpoints");
  for (auto* sub : {eval, sweep}) sub->add_option("--runs", o.runs, "sampled captionings per scene for diversity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  try {
    return run_command(app.get_subcommands().front()->get_name(), o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
