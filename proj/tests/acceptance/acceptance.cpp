// Acceptance suite: one PASS/FAIL line per criterion.
//
//   cmsd_acceptance [--only 3,4,5] [--relcap-seeds 3] [--runs 5]
//
// Criteria 1-2 train the three synthetic decoders at desk scale; 6-7 train
// the relational captioners for every seed. The exit code is non-zero when
// any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cmsd/cells.hpp"
#include "cmsd/errors.hpp"
#include "cmsd/fusion.hpp"
#include "cmsd/metrics.hpp"
#include "cmsd/ops.hpp"
#include "cmsd/relcap.hpp"
#include "cmsd/synth.hpp"
#include "gradcheck.hpp"
#include "metrics_oracle.hpp"
#include "oracle_bridge.hpp"

namespace {

using namespace cmsd;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void note(const std::string& s) {
  std::fprintf(stderr, "  %s\n", s.c_str());
  std::fflush(stderr);
}

// ---------------------------------------------------------------- synthetic

struct SynthRun {
  synth::MseResult mse;
  double seconds = 0;
  synth::SynthModel::Forecast table2;
};

const synth::PairedSequences& table2_pair() {
  static const auto p = synth::make_pair(14.56, 5.18, 10.93, 14.66);
  return p;
}

SynthRun train_synth_mode(DecodeMode mode, const synth::Splits& data) {
  auto cfg = synth::synth_preset("desk");
  cfg.mode = mode;
  synth::SynthModel model(cfg, synth::fit_normalizer(data.train));
  const auto t0 = Clock::now();
  synth::train_synth(model, data, {}, [&](const synth::SynthModel&, const TrainProgress& p) {
    const auto& r = p.trace.back();
    if (r.epoch % 5 == 0 || r.epoch == cfg.epochs) {
      note(fmt("synth %s epoch %zu val %.4g lr %g (%.0fs)", std::string(to_string(mode)).c_str(), r.epoch,
               r.val_metric, r.lr, seconds_since(t0)));
    }
  });
  SynthRun run;
  run.seconds = seconds_since(t0);
  run.mse = synth::eval_mse(model, data.test);
  const synth::PairedSequences one[] = {table2_pair()};
  run.table2 = model.predict(one);
  return run;
}

struct SynthResults {
  std::map<DecodeMode, SynthRun> runs;
};

SynthResults run_synth() {
  const auto data = synth::build_dataset(synth::synth_preset("desk"));
  SynthResults r;
  for (auto mode : {DecodeMode::independent, DecodeMode::baseline2x, DecodeMode::consistent}) {
    r.runs[mode] = train_synth_mode(mode, data);
    const auto& run = r.runs[mode];
    note(fmt("synth %s: mse y1 %.4f y2 %.4f in %.0fs", std::string(to_string(mode)).c_str(), run.mse.y1,
             run.mse.y2, run.seconds));
  }
  return r;
}

Verdict criterion1(const SynthResults& r) {
  const auto& ind = r.runs.at(DecodeMode::independent);
  const auto& twice = r.runs.at(DecodeMode::baseline2x);
  const auto& con = r.runs.at(DecodeMode::consistent);
  Verdict v;
  const double gap = std::min(ind.mse.y2, twice.mse.y2) / con.mse.y2;
  double lo = con.mse.y1, hi = con.mse.y1;
  for (const auto* run : {&ind, &twice}) {
    lo = std::min(lo, run->mse.y1);
    hi = std::max(hi, run->mse.y1);
  }
  double slowest = 0;
  for (const auto& [mode, run] : r.runs) slowest = std::max(slowest, run.seconds);
  v.detail = fmt("y2 independent %.2f baseline2x %.2f consistent %.3f (gap %.1fx); y1 spread %.2fx; slowest %.0fs",
                 ind.mse.y2, twice.mse.y2, con.mse.y2, gap, hi / lo, slowest);
  v.require(gap >= 20.0, "gap below 20x");
  v.require(hi / lo <= 5.0, "y1 MSEs differ by more than 5x");
  v.require(slowest <= 1800.0, "a model took longer than 30 min");
  return v;
}

Verdict criterion2(const SynthResults& r) {
  const auto& truth = table2_pair().y2;
  const auto& con = r.runs.at(DecodeMode::consistent).table2.y2[0];
  const auto& ind = r.runs.at(DecodeMode::independent).table2.y2[0];
  Verdict v;
  double worst = 0;
  // Forecast index t predicts y(t + 2); x = 4 is index 2.
  for (std::size_t t = 2; t < synth::kForecast; ++t) worst = std::max(worst, std::abs(con[t] - truth[t + 1]) / truth[t + 1]);
  const double base4 = std::abs(ind[2] - truth[3]);
  const double base16 = std::abs(ind[14] - truth[15]);
  v.detail = fmt("consistent worst relative error x>=4 %.2f%%, y2(16) %.2f vs %.2f; baseline |err| x=4 %.2f, x=16 %.2f",
                 100 * worst, con[14], truth[15], base4, base16);
  v.require(worst < 0.05, "consistent error reaches 5%");
  v.require(base16 > base4, "baseline error does not grow with x");
  return v;
}

// ---------------------------------------------------------------- gradients

using testing::check_gradients;
using testing::probe;
using testing::random_tensor;

FusionParams random_fusion(ParameterSet& set, std::size_t dim, std::mt19937_64& rng) {
  auto p = make_fusion(set, "fusion", dim, rng);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (auto& param : set.params())
    for (auto& x : param.tensor.mutable_values()) x = u(rng);
  return p;
}

std::vector<Tensor> leaves_of(ParameterSet& set) {
  std::vector<Tensor> out;
  for (auto& p : set.params()) out.push_back(p.tensor);
  return out;
}

Verdict criterion3() {
  using Fn = std::function<Tensor(const std::vector<Tensor>&)>;
  struct Case {
    std::string name;
    std::function<std::pair<std::vector<Tensor>, Fn>(std::mt19937_64&)> make;
  };
  auto unary = [](std::string name, std::function<Tensor(const Tensor&)> f) {
    return Case{name, [f](std::mt19937_64& rng) {
                  auto x = random_tensor({3, 4}, rng);
                  return std::pair{std::vector{x}, Fn([f](const auto& l) { return probe(f(l[0])); })};
                }};
  };
  auto binary = [](std::string name, std::function<Tensor(const Tensor&, const Tensor&)> f, Shape a, Shape b) {
    return Case{name, [=](std::mt19937_64& rng) {
                  auto x = random_tensor(a, rng), y = random_tensor(b, rng);
                  return std::pair{std::vector{x, y}, Fn([f](const auto& l) { return probe(f(l[0], l[1])); })};
                }};
  };
  std::vector<Case> cases = {
      binary("matmul", [](auto& a, auto& b) { return matmul(a, b); }, {3, 4}, {4, 2}),
      binary("matmul_nt", [](auto& a, auto& b) { return matmul_nt(a, b); }, {3, 4}, {2, 4}),
      binary("add", [](auto& a, auto& b) { return add(a, b); }, {3, 4}, {3, 4}),
      binary("sub", [](auto& a, auto& b) { return sub(a, b); }, {3, 4}, {3, 4}),
      binary("mul", [](auto& a, auto& b) { return mul(a, b); }, {3, 4}, {3, 4}),
      binary("concat", [](auto& a, auto& b) { return concat(a, b); }, {3, 2}, {3, 3}),
      binary("mse_loss", [](auto& a, auto& b) { return mse_loss(a, b); }, {3, 4}, {3, 4}),
      unary("scale", [](auto& x) { return scale(x, -1.7); }),
      unary("add_scalar", [](auto& x) { return add_scalar(x, 0.3); }),
      unary("tanh", [](auto& x) { return tanh(x); }),
      unary("sigmoid", [](auto& x) { return sigmoid(x); }),
      unary("exp", [](auto& x) { return exp(x); }),
      unary("leaky_relu", [](auto& x) { return leaky_relu(x, 0.01); }),
      unary("softmax", [](auto& x) { return softmax(x); }),
      unary("log_softmax", [](auto& x) { return log_softmax(x); }),
      unary("slice_cols", [](auto& x) { return slice_cols(x, 1, 2); }),
      unary("slice_rows", [](auto& x) { return slice_rows(x, 1, 2); }),
      unary("sum", [](auto& x) { return sum(x); }),
      unary("mean", [](auto& x) { return mean(x); }),
      unary("concat_rows", [](auto& x) {
        const Tensor parts[] = {x, tanh(x)};
        return concat_rows(parts);
      }),
      unary("gather_rows", [](auto& x) {
        const std::size_t ids[] = {2, 0, 2};
        return gather_rows(x, ids);
      }),
      unary("cross_entropy", [](auto& x) {
        const int targets[] = {1, kIgnoreIndex, 3};
        return cross_entropy(x, targets);
      }),
      {"affine", [](std::mt19937_64& rng) {
         auto x = random_tensor({3, 4}, rng), w = random_tensor({2, 4}, rng), b = random_tensor({2}, rng);
         return std::pair{std::vector{x, w, b}, Fn([](const auto& l) { return probe(affine(l[0], l[1], l[2])); })};
       }},
      {"linear", [](std::mt19937_64& rng) {
         auto x = random_tensor({3, 4}, rng), w = random_tensor({5, 4}, rng), b = random_tensor({5}, rng);
         return std::pair{std::vector{x, w, b}, Fn([](const auto& l) { return probe(linear(l[0], l[1], l[2])); })};
       }},
      {"embed", [](std::mt19937_64& rng) {
         auto table = random_tensor({6, 3}, rng);
         return std::pair{std::vector{table}, Fn([](const auto& l) {
                            const std::size_t ids[] = {4, 1, 4};
                            return probe(embed(ids, EmbeddingTable{l[0]}));
                          })};
       }},
      {"lstm_step", [](std::mt19937_64& rng) {
         auto x = random_tensor({2, 3}, rng), h = random_tensor({2, 4}, rng), c = random_tensor({2, 4}, rng);
         auto wi = random_tensor({16, 3}, rng), wh = random_tensor({16, 4}, rng), b = random_tensor({16}, rng);
         return std::pair{std::vector{x, h, c, wi, wh, b}, Fn([](const auto& l) {
                            auto s = lstm_step(l[0], {l[1], l[2]}, {l[3], l[4], l[5]});
                            return add(probe(s.h, 1), probe(s.c, 2));
                          })};
       }},
      {"gru_combine", [](std::mt19937_64& rng) {
         auto set = std::make_shared<ParameterSet>();
         auto g = std::make_shared<GruParams>(make_gru(*set, "gru", 3, rng));
         for (auto& p : set->params())
           for (auto& x : p.tensor.mutable_values()) x = std::uniform_real_distribution<double>(-1, 1)(rng);
         auto leaves = leaves_of(*set);
         leaves.push_back(random_tensor({4, 3}, rng));
         leaves.push_back(random_tensor({4, 3}, rng));
         return std::pair{leaves, Fn([set, g](const auto& l) {
                            return probe(gru_combine(l[l.size() - 2], l[l.size() - 1], *g));
                          })};
       }},
      {"attention_scores", [](std::mt19937_64& rng) {
         auto set = std::make_shared<ParameterSet>();
         auto p = std::make_shared<FusionParams>(random_fusion(*set, 4, rng));
         auto leaves = leaves_of(*set);
         leaves.push_back(random_tensor({5, 4}, rng));
         return std::pair{leaves, Fn([set, p](const auto& l) { return probe(attention_scores(l.back(), *p)); })};
       }},
      {"normalize_attention", [](std::mt19937_64& rng) {
         auto scores = random_tensor({4}, rng, 2.0);
         return std::pair{std::vector{scores}, Fn([](const auto& l) {
                            DecoderGraph g(4);
                            for (std::size_t i = 0; i < 4; ++i)
                              for (std::size_t j = 0; j < 4; ++j)
                                if (i != j && !(i == 0 && j == 3)) g.connect(i, j);
                            return probe(normalize_attention(l[0], g));
                          })};
       }},
      {"aggregate", [](std::mt19937_64& rng) {
         const auto g = DecoderGraph::complete(3);
         auto m = random_tensor({3, 2}, rng), w = random_tensor({g.edge_count()}, rng);
         return std::pair{std::vector{m, w},
                          Fn([g](const auto& l) { return probe(aggregate(l[0], l[1], g)); })};
       }},
  };
  for (auto mode : {FusionMode::full, FusionMode::equal_attention}) {
    for (std::size_t k : {1u, 2u}) {
      cases.push_back({fmt("fuse_%s_K%zu", std::string(to_string(mode)).c_str(), k), [mode, k](std::mt19937_64& rng) {
                         auto set = std::make_shared<ParameterSet>();
                         auto p = std::make_shared<FusionParams>(random_fusion(*set, 3, rng));
                         auto leaves = leaves_of(*set);
                         leaves.push_back(random_tensor({3, 3}, rng));
                         const Correlation links[] = {{0, 1}, {1, 2}, {2, 0, true}};
                         const auto g = build_adjacency(links, 3);
                         return std::pair{leaves, Fn([set, p, g, mode, k](const auto& l) {
                                            return probe(fuse(l.back(), g, *p, {mode, k}));
                                          })};
                       }});
    }
  }

  Verdict v;
  const auto t0 = Clock::now();
  double worst = 0;
  std::string worst_case;
  std::mt19937_64 rng(2024);
  for (const auto& c : cases) {
    for (int instance = 0; instance < 20; ++instance) {
      auto [leaves, fn] = c.make(rng);
      const auto r = check_gradients(leaves, fn);
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        worst_case = c.name + " " + r.worst;
      }
      v.require(r.max_rel_error < 1e-4, fmt("%s instance %d rel error %.2e at %s", c.name.c_str(), instance,
                                            r.max_rel_error, r.worst.c_str()));
    }
  }
  const double secs = seconds_since(t0);
  const std::string summary =
      fmt("%zu operations x 20 instances, worst rel error %.2e (%s), %.1fs", cases.size(), worst, worst_case.c_str(), secs);
  v.detail = v.detail.empty() ? summary : summary + "; " + v.detail;
  v.require(secs < 120.0, "slower than 2 min");
  return v;
}

// ---------------------------------------------------------------- fusion

// Deterministic hand pattern: parameter k takes 0.1 * ((7k mod 11) - 5).
FusionParams hand_set_fusion(ParameterSet& set, std::size_t dim) {
  std::mt19937_64 unused(0);
  auto p = make_fusion(set, "fusion", dim, unused);
  std::size_t k = 0;
  for (auto& param : set.params())
    for (auto& x : param.tensor.mutable_values()) x = 0.1 * (static_cast<double>((7 * k++) % 11) - 5.0);
  return p;
}

Verdict criterion4() {
  ParameterSet set;
  auto p = hand_set_fusion(set, 2);
  const auto h = Tensor::matrix(2, 2, {0.7, -0.4, -1.1, 0.25});
  const auto out = fuse(h, DecoderGraph::complete(2), p, {FusionMode::full, 1});
  const auto ref = testing::to_oracle(p).round({{0.7, -0.4}, {-1.1, 0.25}}, {{0, 1}, {1, 0}});
  double worst = 0;
  for (std::size_t v = 0; v < 2; ++v)
    for (std::size_t i = 0; i < 2; ++i) worst = std::max(worst, std::abs(out.at(v, i) - ref[v][i]));
  Verdict v;
  v.detail = fmt("max |difference| %.3e (fused h = [%.6f %.6f; %.6f %.6f])", worst, out.at(0, 0), out.at(0, 1),
                 out.at(1, 0), out.at(1, 1));
  v.require(worst <= 1e-12, "exceeds 1e-12");
  return v;
}

DecoderGraph random_graph(std::size_t n, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(density);
  DecoderGraph g(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && coin(rng)) g.connect(i, j);
  return g;
}

Verdict criterion5() {
  Verdict v;
  std::mt19937_64 rng(55);
  ParameterSet set;
  auto p = random_fusion(set, 5, rng);

  double worst_sum = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = random_graph(8, 0.4, rng);
    const auto w = normalize_attention(attention_scores(random_tensor({8, 5}, rng, 1.0, false), p), g);
    for (std::size_t r = 0; r < g.size(); ++r) {
      if (g.in_neighbors(r).empty()) continue;
      double s = 0;
      for (std::size_t e = g.edge_offset(r); e < g.edge_offset(r + 1); ++e) s += w[e];
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    }
  }
  v.require(worst_sum <= 1e-12, fmt("attention sum off by %.2e", worst_sum));

  std::size_t mismatches = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 7;
    const auto g = random_graph(n, 0.5, rng);
    const auto h = random_tensor({n, 5}, rng, 1.0, false);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> moved(n * 5);
    for (std::size_t i = 0; i < n; ++i) std::copy_n(h.values().begin() + i * 5, 5, moved.begin() + perm[i] * 5);
    for (auto mode : {FusionMode::full, FusionMode::equal_attention, FusionMode::no_gnn}) {
      const auto a = fuse(h, g, p, {mode, 2});
      const auto b = fuse(Tensor(Shape{n, 5}, moved), g.permuted(perm), p, {mode, 2});
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 5; ++c) mismatches += a.at(i, c) != b.at(perm[i], c);
    }
  }
  v.require(mismatches == 0, fmt("%zu values changed under permutation", mismatches));

  // Node 2 has no in-neighbours; the empty graph has none at all.
  DecoderGraph g(3);
  g.connect(0, 1);
  g.connect(1, 0);
  g.connect(0, 2);
  const auto h = random_tensor({3, 5}, rng, 1.0, false);
  const Tensor zero_row(Shape{1, 5});
  const auto full = fuse(h, g, p, {FusionMode::full, 1});
  const auto isolated = gru_combine(slice_rows(h, 2, 1), zero_row, p.combine);
  bool iso_ok = true;
  for (std::size_t c = 0; c < 5; ++c) iso_ok &= full.at(2, c) == isolated.at(0, c);
  v.require(iso_ok, "isolated node is not GRU(h, 0)");
  const auto mean_only = fuse(h, g, p, {FusionMode::no_gnn, 1});
  bool no_gnn_ok = true;
  for (std::size_t c = 0; c < 5; ++c) no_gnn_ok &= mean_only.at(2, c) == 0.0 && mean_only.at(1, c) == h.at(0, c);
  v.require(no_gnn_ok, "no_gnn isolated node is not zero");
  const Tensor zero(Shape{3, 5});
  const auto empty = fuse(h, DecoderGraph(3), p, {FusionMode::full, 3});
  auto expect = h;
  for (int k = 0; k < 3; ++k) expect = gru_combine(expect, zero, p.combine);
  bool empty_ok = true;
  for (std::size_t i = 0; i < empty.numel(); ++i) empty_ok &= empty[i] == expect[i];
  v.require(empty_ok, "empty graph is not K GRU steps with zero input");
  v.detail = fmt("attention sums within %.1e over 50 graphs; %zu permutation mismatches over 90 fusions; "
                 "isolated-node and empty-graph cases %s",
                 worst_sum, mismatches, iso_ok && no_gnn_ok && empty_ok ? "exact" : "wrong") +
             (v.pass ? "" : "; " + v.detail);
  return v;
}

// ---------------------------------------------------------------- relcap

struct RelcapRun {
  relcap::RelcapScores scores;
  double seconds = 0;
};

RelcapRun train_relcap_variant(const relcap::RelcapConfig& cfg, const relcap::Corpus& corpus, std::size_t runs) {
  relcap::RelcapModel model(cfg);
  const auto t0 = Clock::now();
  relcap::train_relcap(model, corpus);
  RelcapRun r;
  r.scores = relcap::evaluate(model, corpus.test, runs, cfg.seed);
  r.seconds = seconds_since(t0);
  return r;
}

struct Variant {
  std::string name;
  DecodeMode mode;
  FusionConfig fusion;
};

const std::vector<Variant>& relcap_variants() {
  static const std::vector<Variant> v = {
      {"independent", DecodeMode::independent, {FusionMode::full, 2}},
      {"no_gnn", DecodeMode::consistent, {FusionMode::no_gnn, 1}},
      {"equal_attention", DecodeMode::consistent, {FusionMode::equal_attention, 1}},
      {"K1", DecodeMode::consistent, {FusionMode::full, 1}},
      {"K2", DecodeMode::consistent, {FusionMode::full, 2}},
  };
  return v;
}

// results[variant][seed index]
using RelcapResults = std::map<std::string, std::vector<RelcapRun>>;

RelcapResults run_relcap(std::size_t seeds, std::size_t runs, bool ablation) {
  RelcapResults out;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    auto base = relcap::relcap_preset("desk");
    base.seed = seed;
    const auto corpus = relcap::build_corpus(base);
    for (const auto& v : relcap_variants()) {
      if (!ablation && v.name != "independent" && v.name != "K2") continue;
      auto cfg = base;
      cfg.mode = v.mode;
      cfg.fusion = v.fusion;
      auto r = train_relcap_variant(cfg, corpus, runs);
      note(fmt("relcap seed %llu %s: consistency %.2f diversity %.2f recall %.2f (%.0fs)",
               static_cast<unsigned long long>(seed), v.name.c_str(), r.scores.consistency, r.scores.bbox_diversity,
               r.scores.image_recall, r.seconds));
      out[v.name].push_back(r);
    }
  }
  return out;
}

double mean_of(const std::vector<RelcapRun>& runs, double relcap::RelcapScores::*field) {
  double s = 0;
  for (const auto& r : runs) s += r.scores.*field;
  return s / static_cast<double>(runs.size());
}

Verdict criterion6(const RelcapResults& r) {
  const auto& ind = r.at("independent");
  const auto& con = r.at("K2");
  Verdict v;
  std::string per_seed;
  double seconds = 0;
  for (std::size_t s = 0; s < ind.size(); ++s) {
    const double gain = con[s].scores.consistency - ind[s].scores.consistency;
    const double div = con[s].scores.bbox_diversity - ind[s].scores.bbox_diversity;
    per_seed += fmt("%sseed %zu: %+.2f consistency (%.2f vs %.2f), %+.2f diversity", s ? "; " : "", s + 1, gain,
                    con[s].scores.consistency, ind[s].scores.consistency, div);
    v.require(gain >= 3.0, fmt("seed %zu gain %.2f below 3", s + 1, gain));
    v.require(std::abs(div) <= 3.0, fmt("seed %zu diversity moved %.2f", s + 1, div));
  }
  for (const auto& [name, runs] : r)
    for (const auto& run : runs) seconds += run.seconds;
  v.require(seconds <= 3600.0, "relcap runs took longer than 1 hour");
  v.detail = per_seed + fmt("; relcap training total %.0fs", seconds) + (v.pass ? "" : "; " + v.detail);
  return v;
}

Verdict criterion7(const RelcapResults& r) {
  Verdict v;
  const char* order[] = {"no_gnn", "equal_attention", "K1", "K2"};
  std::string line;
  double prev = -1;
  for (const char* name : order) {
    const double m = mean_of(r.at(name), &relcap::RelcapScores::consistency);
    line += fmt("%s%s %.2f", prev < 0 ? "" : " <= ", name, m);
    if (prev >= 0) v.require(m >= prev, fmt("%s below the previous configuration", name));
    prev = m;
  }
  v.detail = "mean consistency over seeds: " + line + (v.pass ? "" : "; " + v.detail);
  return v;
}

// ---------------------------------------------------------------- metrics

Verdict criterion8() {
  using metrics::Tokens;
  Verdict v;
  const double example = metrics::bleu1(metrics::tokenize("the table"), metrics::tokenize("the big table"));
  v.require(std::abs(example - 0.6065306597126334) < 1e-15 && std::abs(example - 0.6065) < 5e-5,
            fmt("example scored %.10f", example));

  std::mt19937_64 rng(8);
  static const char* words[] = {"a", "red", "car", "the", "dog", "sits", "on", "table", "big"};
  auto caption = [&] {
    std::uniform_int_distribution<int> len(1, 7), w(0, 8);
    Tokens t;
    for (int i = len(rng); i > 0; --i) t.push_back(words[w(rng)]);
    return t;
  };
  std::size_t corpora = 0, mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<metrics::BoxDescriptions> boxes;
    std::size_t total = 0;
    const std::size_t limit = 2 + trial % 19;  // 2..20 captions
    while (total < limit) {
      metrics::BoxDescriptions box;
      for (int k = 1 + static_cast<int>(rng() % 4); k > 0 && total < limit; --k, ++total) box.descriptions.push_back(caption());
      boxes.push_back(std::move(box));
    }
    ++corpora;
    for (const auto& box : boxes)
      for (const auto& a : box.descriptions)
        for (const auto& b : box.descriptions) mismatches += metrics::bleu1(a, b) != oracle::bleu1(a, b);
    const auto expected = oracle::consistency(boxes);
    try {
      const double got = metrics::consistency_score(boxes).value;
      mismatches += !expected || got != *expected;
    } catch (const UndefinedScoreError&) {
      mismatches += expected.has_value();
    }
    std::vector<std::vector<Tokens>> runs;
    for (const auto& box : boxes)
      if (box.descriptions.size() >= 2) runs.push_back(box.descriptions);
    if (!runs.empty()) mismatches += metrics::bbox_diversity(runs).value != oracle::diversity(runs);
  }
  v.require(mismatches == 0, fmt("%zu mismatches", mismatches));
  v.detail = fmt("example %.4f; %zu corpora of 2-20 captions, %zu mismatches against brute force", example, corpora,
                 mismatches) +
             (v.pass ? "" : "; " + v.detail);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  std::size_t seeds = 3, runs = 5;
  app.add_option("--only", only, "criteria to run (default all)")->delimiter(',');
  app.add_option("--relcap-seeds", seeds, "seeds for criteria 6 and 7");
  app.add_option("--runs", runs, "sampled captionings per scene for diversity");
  CLI11_PARSE(app, argc, argv);
  const auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

  bool all_pass = true;
  auto print = [&](int id, const char* title, const Verdict& v) {
    std::printf("criterion %d %-28s %s  %s\n", id, title, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
    all_pass &= v.pass;
  };

  if (wanted(8)) print(8, "metric oracles", criterion8());
  if (wanted(4)) print(4, "fusion loop oracle", criterion4());
  if (wanted(5)) print(5, "fusion invariants", criterion5());
  if (wanted(3)) print(3, "gradient oracle", criterion3());
  if (wanted(6) || wanted(7)) {
    const auto r = run_relcap(seeds, runs, wanted(7));
    if (wanted(6)) print(6, "relcap consistency gain", criterion6(r));
    if (wanted(7)) print(7, "fusion ablation order", criterion7(r));
  }
  if (wanted(1) || wanted(2)) {
    const auto r = run_synth();
    if (wanted(1)) print(1, "synthetic coupling gap", criterion1(r));
    if (wanted(2)) print(2, "trajectory check", criterion2(r));
  }
  if (wanted(9)) {
    std::printf("criterion 9 %-28s OUT-OF-SCOPE  mAP and METEOR need a real detection backbone and dataset\n",
                "detection metrics");
  }
  return all_pass ? 0 : 1;
}
