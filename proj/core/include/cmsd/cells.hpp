#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "cmsd/optim.hpp"
#include "cmsd/tensor.hpp"

namespace cmsd {

/// Affine layer y = x W^T + b, W [out x in].
struct Linear {
  Tensor weight;
  Tensor bias;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
  Tensor operator()(const Tensor& x) const;
};

Linear make_linear(ParameterSet& params, const std::string& name, std::size_t in_dim,
                   std::size_t out_dim, Rng& rng);
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Single-layer LSTM without peepholes. Gate blocks are stacked in the order
/// input, forget, cell candidate, output along the 4h axis.
struct LstmParams {
  Tensor input_to_gates;   // [4h x d_in]
  Tensor hidden_to_gates;  // [4h x h]
  Tensor bias;             // [4h]

  std::size_t input_dim() const { return input_to_gates.cols(); }
  std::size_t hidden_dim() const { return hidden_to_gates.cols(); }
};

LstmParams make_lstm(ParameterSet& params, const std::string& name, std::size_t input_dim,
                     std::size_t hidden_dim, Rng& rng);

struct LstmState {
  Tensor h;
  Tensor c;
};

/// Zero state with `rows` independent rows.
LstmState lstm_zero_state(std::size_t rows, std::size_t hidden_dim);

/// One LSTM update for every row of x [rows x d_in].
LstmState lstm_step(const Tensor& x, const LstmState& state, const LstmParams& p);

/// GRU gating used by COMBINE: `a` is the GRU input, `h_prev` the state.
///   z  = sigmoid(a Wz^T + h Uz^T + bz)
///   r  = sigmoid(a Wr^T + h Ur^T + br)
///   h~ = tanh(a Wh^T + (r * h) Uh^T + bh)
///   h' = (1 - z) * h + z * h~
struct GruParams {
  Tensor w_update, u_update, b_update;
  Tensor w_reset, u_reset, b_reset;
  Tensor w_candidate, u_candidate, b_candidate;

  std::size_t dim() const { return w_update.cols(); }
};

GruParams make_gru(ParameterSet& params, const std::string& name, std::size_t dim, Rng& rng);

Tensor gru_combine(const Tensor& h_prev, const Tensor& a, const GruParams& p);

/// Token embedding table [vocab x dim].
struct EmbeddingTable {
  Tensor matrix;

  std::size_t vocab_size() const { return matrix.rows(); }
  std::size_t dim() const { return matrix.cols(); }
};

EmbeddingTable make_embedding(ParameterSet& params, const std::string& name, std::size_t vocab_size,
                              std::size_t dim, Rng& rng);

/// Row vector [dim] for a single id.
Tensor embed(std::size_t id, const EmbeddingTable& table);
/// [ids x dim]
Tensor embed(std::span<const std::size_t> ids, const EmbeddingTable& table);

}  // namespace cmsd
