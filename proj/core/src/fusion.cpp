#include "cmsd/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cmsd/errors.hpp"
#include "cmsd/ops.hpp"

namespace cmsd {

std::string_view to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::full: return "full";
    case FusionMode::no_gnn: return "no_gnn";
    case FusionMode::equal_attention: return "equal_attention";
  }
  return "?";
}

FusionMode parse_fusion_mode(std::string_view text) {
  if (text == "full") return FusionMode::full;
  if (text == "no_gnn") return FusionMode::no_gnn;
  if (text == "equal_attention") return FusionMode::equal_attention;
  throw ConfigError("unknown fusion mode '" + std::string(text) + "'");
}

Tensor AttentionNet::operator()(const Tensor& x) const {
  return output(leaky_relu(second(leaky_relu(first(x), slope)), slope));
}

FusionParams make_fusion(ParameterSet& params, const std::string& name, std::size_t dim, Rng& rng) {
  FusionParams p;
  p.kernel = params.add_weight(name + ".kernel", dim, dim, rng);
  const std::size_t half = std::max<std::size_t>(1, dim / 2);
  const std::size_t quarter = std::max<std::size_t>(1, dim / 4);
  p.attention.first = make_linear(params, name + ".att1", dim, half, rng);
  p.attention.second = make_linear(params, name + ".att2", half, quarter, rng);
  p.attention.output = make_linear(params, name + ".att3", quarter, 1, rng);
  p.combine = make_gru(params, name + ".combine", dim, rng);
  return p;
}

namespace {

std::vector<std::size_t> edge_offsets(const DecoderGraph& graph) {
  std::vector<std::size_t> offsets(graph.size() + 1, 0);
  for (std::size_t v = 0; v < graph.size(); ++v) offsets[v + 1] = offsets[v] + graph.in_neighbors(v).size();
  return offsets;
}

// Sum in ascending value order; the result only depends on the multiset.
double sorted_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double total = 0.0;
  for (double t : terms) total += t;
  return total;
}

Tensor messages_of(const Tensor& h, const FusionParams& p) { return matmul_nt(h, p.kernel); }

}  // namespace

Tensor attention_scores(const Tensor& h, const FusionParams& p) {
  if (h.rank() != 2 || h.cols() != p.dim()) {
    throw DimensionError("attention_scores: features " + to_string(h.shape()) + " for dim " +
                         std::to_string(p.dim()));
  }
  return p.attention(messages_of(h, p)).reshape(Shape{h.rows()});
}

Tensor normalize_attention(const Tensor& scores, const DecoderGraph& graph) {
  if (scores.numel() != graph.size()) {
    throw DimensionError("normalize_attention: " + std::to_string(scores.numel()) + " scores for " +
                         std::to_string(graph.size()) + " nodes");
  }
  auto offsets = edge_offsets(graph);
  auto s = scores.values();
  std::vector<double> weights(graph.edge_count());
  std::vector<double> terms;
  for (std::size_t v = 0; v < graph.size(); ++v) {
    auto senders = graph.in_neighbors(v);
    if (senders.empty()) continue;
    double peak = s[senders[0]];
    for (auto u : senders) peak = std::max(peak, s[u]);
    terms.clear();
    for (std::size_t k = 0; k < senders.size(); ++k) {
      weights[offsets[v] + k] = std::exp(s[senders[k]] - peak);
      terms.push_back(weights[offsets[v] + k]);
    }
    const double total = sorted_sum(terms);
    for (std::size_t k = 0; k < senders.size(); ++k) weights[offsets[v] + k] /= total;
  }
  std::vector<std::vector<std::size_t>> senders(graph.size());
  for (std::size_t v = 0; v < graph.size(); ++v) {
    auto n = graph.in_neighbors(v);
    senders[v].assign(n.begin(), n.end());
  }
  return detail::record(
      Shape{graph.edge_count()}, std::move(weights), {scores}, "normalize_attention",
      [offsets, senders = std::move(senders)](const detail::Node& node, std::span<const double> g,
                                              std::span<const std::span<double>> gin) {
        const auto& w = node.value;
        for (std::size_t v = 0; v < senders.size(); ++v) {
          double dot = 0.0;
          for (std::size_t k = 0; k < senders[v].size(); ++k) dot += w[offsets[v] + k] * g[offsets[v] + k];
          for (std::size_t k = 0; k < senders[v].size(); ++k) {
            const auto e = offsets[v] + k;
            gin[0][senders[v][k]] += w[e] * (g[e] - dot);
          }
        }
      });
}

Tensor uniform_attention(const DecoderGraph& graph) {
  std::vector<double> weights;
  weights.reserve(graph.edge_count());
  for (std::size_t v = 0; v < graph.size(); ++v) {
    const auto degree = graph.in_neighbors(v).size();
    weights.insert(weights.end(), degree, 1.0 / static_cast<double>(degree));
  }
  return Tensor(Shape{graph.edge_count()}, std::move(weights));
}

Tensor aggregate(const Tensor& messages, const Tensor& edge_weights, const DecoderGraph& graph) {
  if (messages.rank() != 2 || messages.rows() != graph.size()) {
    throw DimensionError("aggregate: messages " + to_string(messages.shape()) + " for " +
                         std::to_string(graph.size()) + " nodes");
  }
  if (edge_weights.numel() != graph.edge_count()) {
    throw DimensionError("aggregate: " + std::to_string(edge_weights.numel()) + " weights for " +
                         std::to_string(graph.edge_count()) + " edges");
  }
  const std::size_t n = graph.size(), d = messages.cols();
  auto offsets = edge_offsets(graph);
  auto m = messages.values();
  auto w = edge_weights.values();
  std::vector<double> out(n * d, 0.0);
  std::vector<double> terms;
  for (std::size_t v = 0; v < n; ++v) {
    auto senders = graph.in_neighbors(v);
    if (senders.empty()) continue;
    for (std::size_t c = 0; c < d; ++c) {
      terms.clear();
      for (std::size_t k = 0; k < senders.size(); ++k) terms.push_back(w[offsets[v] + k] * m[senders[k] * d + c]);
      out[v * d + c] = sorted_sum(terms);
    }
  }
  std::vector<std::vector<std::size_t>> senders(n);
  for (std::size_t v = 0; v < n; ++v) {
    auto s = graph.in_neighbors(v);
    senders[v].assign(s.begin(), s.end());
  }
  return detail::record(
      Shape{n, d}, std::move(out), {messages, edge_weights}, "aggregate",
      [offsets, senders = std::move(senders), d](const detail::Node& node, std::span<const double> g,
                                                 std::span<const std::span<double>> gin) {
        const auto& mv = node.inputs[0]->value;
        const auto& wv = node.inputs[1]->value;
        for (std::size_t v = 0; v < senders.size(); ++v) {
          for (std::size_t k = 0; k < senders[v].size(); ++k) {
            const auto e = offsets[v] + k;
            const auto u = senders[v][k];
            if (!gin[0].empty())
              for (std::size_t c = 0; c < d; ++c) gin[0][u * d + c] += wv[e] * g[v * d + c];
            if (!gin[1].empty()) {
              double dot = 0.0;
              for (std::size_t c = 0; c < d; ++c) dot += g[v * d + c] * mv[u * d + c];
              gin[1][e] += dot;
            }
          }
        }
      });
}

GraphState fuse_traced(const Tensor& h0, const DecoderGraph& graph, const FusionParams& p,
                       const FusionConfig& config) {
  const bool needs_params = config.mode != FusionMode::no_gnn;
  if (h0.rank() != 2 || h0.rows() != graph.size() || (needs_params && h0.cols() != p.dim())) {
    throw DimensionError("fuse: features " + to_string(h0.shape()) + " for " + std::to_string(graph.size()) +
                         " nodes" + (needs_params ? " of dim " + std::to_string(p.dim()) : std::string()));
  }
  GraphState state;
  state.features.push_back(h0);
  if (config.mode == FusionMode::no_gnn) {
    Tensor weights = uniform_attention(graph);
    Tensor mean = aggregate(h0, weights, graph);
    state.weights.push_back(weights);
    state.messages.push_back(mean);
    state.features.push_back(mean);
    return state;
  }
  if (config.iterations < 1) throw ConfigError("fuse: K must be at least 1");

  Tensor h = h0;
  for (std::size_t k = 0; k < config.iterations; ++k) {
    const Tensor transformed = messages_of(h, p);
    Tensor weights;
    if (config.mode == FusionMode::full) {
      Tensor scores = p.attention(transformed).reshape(Shape{graph.size()});
      weights = normalize_attention(scores, graph);
      state.raw_scores.push_back(scores);
    } else {
      weights = uniform_attention(graph);
    }
    Tensor a = aggregate(transformed, weights, graph);
    h = gru_combine(h, a, p.combine);
    state.weights.push_back(weights);
    state.messages.push_back(a);
    state.features.push_back(h);
  }
  return state;
}

Tensor fuse(const Tensor& h0, const DecoderGraph& graph, const FusionParams& p, const FusionConfig& config) {
  return fuse_traced(h0, graph, p, config).features.back();
}

}  // namespace cmsd
