#include "cmsd/cells.hpp"

#include <string>

#include "cmsd/errors.hpp"
#include "cmsd/ops.hpp"

namespace cmsd {

Tensor Linear::operator()(const Tensor& x) const { return affine(x, weight, bias); }

Linear make_linear(ParameterSet& params, const std::string& name, std::size_t in_dim,
                   std::size_t out_dim, Rng& rng) {
  Linear layer;
  layer.weight = params.add_weight(name + ".weight", out_dim, in_dim, rng);
  layer.bias = params.add_zeros(name + ".bias", Shape{out_dim});
  return layer;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return affine(x, weight, bias);
}

LstmParams make_lstm(ParameterSet& params, const std::string& name, std::size_t input_dim,
                     std::size_t hidden_dim, Rng& rng) {
  LstmParams p;
  p.input_to_gates = params.add_weight(name + ".input_to_gates", 4 * hidden_dim, input_dim, rng);
  p.hidden_to_gates = params.add_weight(name + ".hidden_to_gates", 4 * hidden_dim, hidden_dim, rng);
  p.bias = params.add_zeros(name + ".bias", Shape{4 * hidden_dim});
  return p;
}

LstmState lstm_zero_state(std::size_t rows, std::size_t hidden_dim) {
  return {Tensor(Shape{rows, hidden_dim}), Tensor(Shape{rows, hidden_dim})};
}

LstmState lstm_step(const Tensor& x, const LstmState& state, const LstmParams& p) {
  const std::size_t h = p.hidden_dim();
  if (x.cols() != p.input_dim() || state.h.cols() != h || state.c.cols() != h ||
      state.h.rows() != x.rows() || state.c.shape() != state.h.shape()) {
    throw DimensionError("lstm_step: input " + to_string(x.shape()) + ", state " +
                         to_string(state.h.shape()) + "/" + to_string(state.c.shape()) +
                         " for cell " + std::to_string(p.input_dim()) + "->" + std::to_string(h));
  }
  const Tensor gates = add(affine(x, p.input_to_gates, p.bias), matmul_nt(state.h, p.hidden_to_gates));
  const Tensor in_gate = sigmoid(slice_cols(gates, 0, h));
  const Tensor forget_gate = sigmoid(slice_cols(gates, h, h));
  const Tensor candidate = tanh(slice_cols(gates, 2 * h, h));
  const Tensor out_gate = sigmoid(slice_cols(gates, 3 * h, h));
  Tensor c = add(mul(forget_gate, state.c), mul(in_gate, candidate));
  Tensor hidden = mul(out_gate, tanh(c));
  return {std::move(hidden), std::move(c)};
}

GruParams make_gru(ParameterSet& params, const std::string& name, std::size_t dim, Rng& rng) {
  GruParams p;
  p.w_update = params.add_weight(name + ".w_update", dim, dim, rng);
  p.u_update = params.add_weight(name + ".u_update", dim, dim, rng);
  p.b_update = params.add_zeros(name + ".b_update", Shape{dim});
  p.w_reset = params.add_weight(name + ".w_reset", dim, dim, rng);
  p.u_reset = params.add_weight(name + ".u_reset", dim, dim, rng);
  p.b_reset = params.add_zeros(name + ".b_reset", Shape{dim});
  p.w_candidate = params.add_weight(name + ".w_candidate", dim, dim, rng);
  p.u_candidate = params.add_weight(name + ".u_candidate", dim, dim, rng);
  p.b_candidate = params.add_zeros(name + ".b_candidate", Shape{dim});
  return p;
}

Tensor gru_combine(const Tensor& h_prev, const Tensor& a, const GruParams& p) {
  if (h_prev.shape() != a.shape() || a.cols() != p.dim()) {
    throw DimensionError("gru_combine: state " + to_string(h_prev.shape()) + ", input " +
                         to_string(a.shape()) + " for dim " + std::to_string(p.dim()));
  }
  const Tensor z = sigmoid(add(affine(a, p.w_update, p.b_update), matmul_nt(h_prev, p.u_update)));
  const Tensor r = sigmoid(add(affine(a, p.w_reset, p.b_reset), matmul_nt(h_prev, p.u_reset)));
  const Tensor candidate =
      tanh(add(affine(a, p.w_candidate, p.b_candidate), matmul_nt(mul(r, h_prev), p.u_candidate)));
  const Tensor keep = add_scalar(scale(z, -1.0), 1.0);
  return add(mul(keep, h_prev), mul(z, candidate));
}

EmbeddingTable make_embedding(ParameterSet& params, const std::string& name, std::size_t vocab_size,
                              std::size_t dim, Rng& rng) {
  return {params.add_weight(name, vocab_size, dim, rng)};
}

Tensor embed(std::size_t id, const EmbeddingTable& table) {
  const std::size_t ids[] = {id};
  return embed(std::span<const std::size_t>(ids), table).reshape(Shape{table.dim()});
}

Tensor embed(std::span<const std::size_t> ids, const EmbeddingTable& table) {
  return gather_rows(table.matrix, ids);
}

}  // namespace cmsd
