#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "cmsd/cells.hpp"
#include "cmsd/graph.hpp"
#include "cmsd/tensor.hpp"

namespace cmsd {

enum class FusionMode {
  full,             // K rounds of attention-weighted AGGREGATE + GRU COMBINE
  no_gnn,           // unweighted mean of directly connected neighbours' inputs
  equal_attention,  // gated rounds with uniform neighbour weights
};

std::string_view to_string(FusionMode mode);
FusionMode parse_fusion_mode(std::string_view text);

struct FusionConfig {
  FusionMode mode = FusionMode::full;
  std::size_t iterations = 1;  // K
};

/// Scores one source node from its transformed features: d -> d/2 -> d/4 -> 1
/// with leaky ReLU between layers.
struct AttentionNet {
  Linear first;
  Linear second;
  Linear output;
  double slope = 0.01;

  Tensor operator()(const Tensor& x) const;
};

struct FusionParams {
  Tensor kernel;  // W, [d x d], shared across iterations
  AttentionNet attention;
  GruParams combine;

  std::size_t dim() const { return kernel.cols(); }
};

FusionParams make_fusion(ParameterSet& params, const std::string& name, std::size_t dim, Rng& rng);

/// Raw per-source scores fc_att(W h_u), shape [n].
Tensor attention_scores(const Tensor& h, const FusionParams& p);

/// Softmax of `scores` over each receiver's in-neighbours. Result has one
/// entry per edge in canonical order (see DecoderGraph::edge_offset).
Tensor normalize_attention(const Tensor& scores, const DecoderGraph& graph);

/// Equal weight 1/|N(v)| on every edge into v.
Tensor uniform_attention(const DecoderGraph& graph);

/// a_v = sum over u in N(v) of weight(v,u) * messages_u; zero for isolated v.
/// Neighbour terms are added in ascending value order so the result does not
/// depend on how nodes are numbered.
Tensor aggregate(const Tensor& messages, const Tensor& edge_weights, const DecoderGraph& graph);

/// Intermediate values of one fusion run.
struct GraphState {
  std::vector<Tensor> features;    // h^(0) .. h^(K), each [n x d]
  std::vector<Tensor> messages;    // a^(1) .. a^(K)
  std::vector<Tensor> raw_scores;  // alpha before normalisation, per iteration (full mode)
  std::vector<Tensor> weights;     // normalised per-edge weights, per iteration
};

/// Fused node features h^(K) for initial features h0 [n x d]. `p` is not
/// read in no_gnn mode and may be default constructed there.
Tensor fuse(const Tensor& h0, const DecoderGraph& graph, const FusionParams& p, const FusionConfig& config);
GraphState fuse_traced(const Tensor& h0, const DecoderGraph& graph, const FusionParams& p,
                       const FusionConfig& config);

}  // namespace cmsd
