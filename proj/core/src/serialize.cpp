#include "cmsd/serialize.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "cmsd/errors.hpp"

namespace cmsd::io {

namespace {

json to_json(const LrSchedule& s) {
  return {{"initial", s.initial}, {"min_lr", s.min_lr}, {"patience", s.patience}, {"period", s.period}};
}

LrSchedule schedule_from_json(const json& j) {
  return {j.at("initial").get<double>(), j.at("min_lr").get<double>(), j.at("patience").get<std::size_t>(),
          j.at("period").get<std::size_t>()};
}

json to_json(const FusionConfig& f) { return {{"mode", to_string(f.mode)}, {"K", f.iterations}}; }

FusionConfig fusion_from_json(const json& j) {
  return {parse_fusion_mode(j.at("mode").get<std::string>()), j.at("K").get<std::size_t>()};
}

// JSON has no infinities; they travel as null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

template <typename F>
auto parse_or_throw(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw IoError(std::string(what) + ": " + e.what());
  }
}

std::string header_line(const std::string& format, std::size_t count) {
  return json{{"format", format}, {"version", 1}, {"count", count}}.dump() + "\n";
}

std::vector<json> read_lines(const std::string& text, const std::string& format) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError(format + ": empty file");
  const auto header = parse_or_throw(format.c_str(), [&] { return json::parse(line); });
  if (header.value("format", "") != format || header.value("version", 0) != 1) {
    throw IoError("expected a " + format + " v1 file");
  }
  std::vector<json> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(parse_or_throw(format.c_str(), [&] { return json::parse(line); }));
  }
  if (rows.size() != header.at("count").get<std::size_t>()) {
    throw IoError(format + ": header announces " + header.at("count").dump() + " records, found " +
                  std::to_string(rows.size()));
  }
  return rows;
}

}  // namespace

json to_json(const synth::SynthConfig& c) {
  return {{"task", "synth"},
          {"n_train", c.n_train},
          {"n_val", c.n_val},
          {"n_test", c.n_test},
          {"hidden", c.hidden},
          {"embed", c.embed},
          {"batch", c.batch},
          {"epochs", c.epochs},
          {"momentum", c.momentum},
          {"schedule", to_json(c.schedule)},
          {"clip_norm", c.clip_norm},
          {"mode", to_string(c.mode)},
          {"fusion", to_json(c.fusion)},
          {"seed", c.seed}};
}

synth::SynthConfig synth_config_from_json(const json& j) {
  return parse_or_throw("synth config", [&] {
    if (j.value("task", "") != "synth") throw ConfigError("config is not a synth config");
    synth::SynthConfig c;
    c.n_train = j.at("n_train");
    c.n_val = j.at("n_val");
    c.n_test = j.at("n_test");
    c.hidden = j.at("hidden");
    c.embed = j.at("embed");
    c.batch = j.at("batch");
    c.epochs = j.at("epochs");
    c.momentum = j.at("momentum");
    c.schedule = schedule_from_json(j.at("schedule"));
    c.clip_norm = j.at("clip_norm");
    c.mode = parse_decode_mode(j.at("mode").get<std::string>());
    c.fusion = fusion_from_json(j.at("fusion"));
    c.seed = j.at("seed");
    return c;
  });
}

json to_json(const relcap::RelcapConfig& c) {
  return {{"task", "relcap"},
          {"train_scenes", c.train_scenes},
          {"val_scenes", c.val_scenes},
          {"test_scenes", c.test_scenes},
          {"scene",
           {{"regions", c.scene.regions},
            {"pairs", c.scene.pairs},
            {"synonym_rate", c.scene.synonym_rate},
            {"feature_dim", c.scene.feature_dim},
            {"hint", c.scene.hint},
            {"noise", c.scene.noise}}},
          {"labels", to_string(c.labels)},
          {"embed", c.embed},
          {"hidden", c.hidden},
          {"pos_weight", c.pos_weight},
          {"epochs", c.epochs},
          {"momentum", c.momentum},
          {"schedule", to_json(c.schedule)},
          {"clip_norm", c.clip_norm},
          {"mode", to_string(c.mode)},
          {"fusion", to_json(c.fusion)},
          {"fuse_source", to_string(c.fuse_source)},
          {"seed", c.seed}};
}

relcap::RelcapConfig relcap_config_from_json(const json& j) {
  return parse_or_throw("relcap config", [&] {
    if (j.value("task", "") != "relcap") throw ConfigError("config is not a relcap config");
    relcap::RelcapConfig c;
    c.train_scenes = j.at("train_scenes");
    c.val_scenes = j.at("val_scenes");
    c.test_scenes = j.at("test_scenes");
    const auto& s = j.at("scene");
    c.scene.regions = s.at("regions");
    c.scene.pairs = s.at("pairs");
    c.scene.synonym_rate = s.at("synonym_rate");
    c.scene.feature_dim = s.at("feature_dim");
    c.scene.hint = s.at("hint");
    c.scene.noise = s.at("noise");
    c.labels = relcap::parse_label_variant(j.at("labels").get<std::string>());
    c.embed = j.at("embed");
    c.hidden = j.at("hidden");
    c.pos_weight = j.at("pos_weight");
    c.epochs = j.at("epochs");
    c.momentum = j.at("momentum");
    c.schedule = schedule_from_json(j.at("schedule"));
    c.clip_norm = j.at("clip_norm");
    c.mode = parse_decode_mode(j.at("mode").get<std::string>());
    c.fusion = fusion_from_json(j.at("fusion"));
    c.fuse_source = relcap::parse_fuse_source(j.at("fuse_source").get<std::string>());
    c.seed = j.at("seed");
    return c;
  });
}

std::string config_hash(const json& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : config.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out.flush()) throw IoError("failed writing " + path.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string format_synth(std::span<const synth::PairedSequences> pairs) {
  std::string out = "cmsd-synth v1 " + std::to_string(pairs.size()) + "\n";
  char buf[32];
  for (const auto& p : pairs) {
    std::string line;
    auto put = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      if (!line.empty()) line += ' ';
      line += buf;
    };
    for (double v : {p.a, p.b, p.c, p.d}) put(v);
    for (double v : p.y1) put(v);
    for (double v : p.y2) put(v);
    out += line + "\n";
  }
  return out;
}

std::vector<synth::PairedSequences> parse_synth(const std::string& text) {
  std::istringstream in(text);
  std::string magic, version;
  std::size_t count = 0;
  if (!(in >> magic >> version >> count) || magic != "cmsd-synth" || version != "v1") {
    throw IoError("expected a cmsd-synth v1 file");
  }
  std::vector<synth::PairedSequences> out(count);
  for (auto& p : out) {
    if (!(in >> p.a >> p.b >> p.c >> p.d)) throw IoError("cmsd-synth: truncated record");
    for (auto& v : p.y1)
      if (!(in >> v)) throw IoError("cmsd-synth: truncated record");
    for (auto& v : p.y2)
      if (!(in >> v)) throw IoError("cmsd-synth: truncated record");
  }
  std::string extra;
  if (in >> extra) throw IoError("cmsd-synth: more records than announced");
  return out;
}

std::string format_scenes(std::span<const relcap::Scene> scenes) {
  std::string out = header_line("cmsd-relcap-scenes", scenes.size());
  const auto& vocab = relcap::Vocabulary::toy();
  for (const auto& s : scenes) {
    json regions = json::array(), relations = json::array();
    for (const auto& r : s.regions) {
      regions.push_back({{"category", r.category},
                         {"attribute", r.attribute},
                         {"variant", r.variant},
                         {"feature", r.feature}});
    }
    for (const auto& r : s.relations) {
      relations.push_back({{"subject", r.subject},
                           {"object", r.object},
                           {"predicate", vocab.word(r.predicate)},
                           {"feature", r.feature}});
    }
    out += json{{"id", s.id}, {"regions", regions}, {"relations", relations}}.dump() + "\n";
  }
  return out;
}

std::vector<relcap::Scene> parse_scenes(const std::string& text) {
  const auto& vocab = relcap::Vocabulary::toy();
  std::vector<relcap::Scene> out;
  for (const auto& j : read_lines(text, "cmsd-relcap-scenes")) {
    out.push_back(parse_or_throw("cmsd-relcap-scenes", [&] {
      relcap::Scene s;
      s.id = j.at("id");
      for (const auto& r : j.at("regions")) {
        relcap::Region reg;
        reg.category = r.at("category");
        reg.attribute = r.at("attribute");
        reg.variant = r.at("variant");
        if (reg.category >= vocab.noun_groups().size() || reg.attribute >= vocab.adjective_groups().size() ||
            reg.variant >= relcap::kVariants) {
          throw IoError("cmsd-relcap-scenes: region refers to an unknown word group");
        }
        reg.noun = vocab.noun_groups()[reg.category][reg.variant];
        reg.adjective = vocab.adjective_groups()[reg.attribute][reg.variant];
        reg.feature = r.at("feature").get<std::vector<double>>();
        s.regions.push_back(std::move(reg));
      }
      for (const auto& r : j.at("relations")) {
        relcap::Relation rel;
        rel.subject = r.at("subject");
        rel.object = r.at("object");
        if (rel.subject >= s.regions.size() || rel.object >= s.regions.size()) {
          throw IoError("cmsd-relcap-scenes: relation refers to a missing region");
        }
        rel.predicate = vocab.id(r.at("predicate").get<std::string>());
        rel.feature = r.at("feature").get<std::vector<double>>();
        s.relations.push_back(std::move(rel));
      }
      return s;
    }));
  }
  return out;
}

std::string format_labels(std::span<const std::vector<relcap::Caption>> captions) {
  std::string out = header_line("cmsd-relcap-labels", captions.size());
  const auto& vocab = relcap::Vocabulary::toy();
  for (std::size_t i = 0; i < captions.size(); ++i) {
    json caps = json::array();
    for (const auto& c : captions[i]) {
      std::vector<std::string> pos;
      for (auto p : c.pos) pos.emplace_back(relcap::to_string(p));
      caps.push_back({{"text", vocab.join(c.tokens)}, {"pos", pos}});
    }
    out += json{{"scene", i}, {"captions", caps}}.dump() + "\n";
  }
  return out;
}

std::vector<std::vector<relcap::Caption>> parse_labels(const std::string& text) {
  const auto& vocab = relcap::Vocabulary::toy();
  std::vector<std::vector<relcap::Caption>> out;
  for (const auto& j : read_lines(text, "cmsd-relcap-labels")) {
    out.push_back(parse_or_throw("cmsd-relcap-labels", [&] {
      std::vector<relcap::Caption> caps;
      for (const auto& c : j.at("captions")) {
        relcap::Caption cap;
        for (const auto& w : metrics::tokenize(c.at("text").get<std::string>())) cap.tokens.push_back(vocab.id(w));
        for (const auto& p : c.at("pos")) {
          const auto tag = p.get<std::string>();
          if (tag == "SUBJ") cap.pos.push_back(relcap::Pos::subj);
          else if (tag == "PRED") cap.pos.push_back(relcap::Pos::pred);
          else if (tag == "OBJ") cap.pos.push_back(relcap::Pos::obj);
          else throw IoError("cmsd-relcap-labels: unknown POS tag " + tag);
        }
        if (cap.pos.size() != cap.tokens.size()) throw IoError("cmsd-relcap-labels: POS count differs from words");
        caps.push_back(std::move(cap));
      }
      return caps;
    }));
  }
  return out;
}

void attach_labels(std::vector<relcap::Scene>& scenes, std::vector<std::vector<relcap::Caption>> captions) {
  if (captions.size() != scenes.size()) throw IoError("label file does not match scene file");
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (captions[i].size() != scenes[i].relations.size()) {
      throw IoError("labels for scene " + std::to_string(i) + " do not match its relations");
    }
    scenes[i].captions = std::move(captions[i]);
  }
}

json to_json(const ParameterSet& params) {
  json out = json::array();
  for (const auto& p : params.params()) {
    auto values = p.tensor.values();
    out.push_back({{"name", p.name},
                   {"shape", p.tensor.shape()},
                   {"values", std::vector<double>(values.begin(), values.end())},
                   {"momentum", p.momentum}});
  }
  return out;
}

void load(ParameterSet& params, const json& j) {
  if (!j.is_array() || j.size() != params.size()) {
    throw ContractError("checkpoint holds " + std::to_string(j.size()) + " parameters, model has " +
                        std::to_string(params.size()));
  }
  parse_or_throw("checkpoint parameters", [&] {
    for (std::size_t i = 0; i < j.size(); ++i) {
      auto& p = params.params()[i];
      const auto& e = j[i];
      if (e.at("name").get<std::string>() != p.name || e.at("shape").get<Shape>() != p.tensor.shape()) {
        throw ContractError("checkpoint parameter " + e.at("name").get<std::string>() + " does not match model " +
                            p.name + " " + to_string(p.tensor.shape()));
      }
      const auto values = e.at("values").get<std::vector<double>>();
      auto dst = p.tensor.mutable_values();
      if (values.size() != dst.size()) throw ContractError("checkpoint parameter " + p.name + " has wrong size");
      std::copy(values.begin(), values.end(), dst.begin());
      p.momentum = e.at("momentum").get<std::vector<double>>();
      if (!p.momentum.empty() && p.momentum.size() != dst.size()) {
        throw ContractError("checkpoint momentum for " + p.name + " has wrong size");
      }
    }
    return 0;
  });
}

json to_json(const TrainProgress& p) {
  json trace = json::array();
  for (const auto& r : p.trace) {
    trace.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val", number(r.val_metric)}, {"lr", r.lr}});
  }
  return {{"epoch", p.epoch},
          {"lr", p.lr},
          {"best_val", number(p.best_val)},
          {"stale_epochs", p.stale_epochs},
          {"trace", trace}};
}

TrainProgress progress_from_json(const json& j) {
  return parse_or_throw("training progress", [&] {
    TrainProgress p;
    p.epoch = j.at("epoch");
    p.lr = j.at("lr");
    p.best_val = number_from(j.at("best_val"));
    p.stale_epochs = j.at("stale_epochs");
    for (const auto& r : j.at("trace")) {
      p.trace.push_back({r.at("epoch").get<std::size_t>(), r.at("train_loss").get<double>(), number_from(r.at("val")),
                         r.at("lr").get<double>()});
    }
    return p;
  });
}

json to_json(const synth::Normalizer& n) {
  return {{"coef_mean", n.coef_mean}, {"coef_std", n.coef_std}, {"y1_mean", n.y1_mean},
          {"y1_std", n.y1_std},       {"y2_mean", n.y2_mean},   {"y2_std", n.y2_std}};
}

synth::Normalizer normalizer_from_json(const json& j) {
  return parse_or_throw("normalizer", [&] {
    return synth::Normalizer{j.at("coef_mean"), j.at("coef_std"), j.at("y1_mean"),
                             j.at("y1_std"),    j.at("y2_mean"),  j.at("y2_std")};
  });
}

std::string format_report(std::span<const ReportRow> rows, const std::string& hash) {
  std::string out = "metric,value,n_items,config_hash\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.10g", r.value);
    out += r.metric + "," + buf + "," + std::to_string(r.n_items) + "," + hash + "\n";
  }
  return out;
}

std::vector<ReportRow> parse_report(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "metric,value,n_items,config_hash") throw IoError("not a metric report");
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    ReportRow r;
    std::string value, items;
    if (!std::getline(fields, r.metric, ',') || !std::getline(fields, value, ',') || !std::getline(fields, items, ',')) {
      throw IoError("malformed report row: " + line);
    }
    try {
      r.value = std::stod(value);
      r.n_items = std::stoul(items);
    } catch (const std::exception&) {
      throw IoError("malformed report row: " + line);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace cmsd::io
