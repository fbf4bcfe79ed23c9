#include "cmsd/decoder.hpp"

#include <string>

#include "cmsd/errors.hpp"
#include "cmsd/ops.hpp"

namespace cmsd {

std::string_view to_string(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::independent: return "independent";
    case DecodeMode::baseline2x: return "baseline2x";
    case DecodeMode::consistent: return "consistent";
  }
  return "?";
}

DecodeMode parse_decode_mode(std::string_view text) {
  if (text == "independent") return DecodeMode::independent;
  if (text == "baseline2x") return DecodeMode::baseline2x;
  if (text == "consistent") return DecodeMode::consistent;
  throw ConfigError("unknown decode mode '" + std::string(text) + "'");
}

Tensor input_combine(const Tensor& r_own, const Tensor& r_fuse, DecodeMode mode) {
  switch (mode) {
    case DecodeMode::independent: return r_own;
    case DecodeMode::baseline2x: return concat(r_own, r_own);
    case DecodeMode::consistent:
      if (r_fuse.shape() != r_own.shape()) {
        throw DimensionError("input_combine: r_fuse " + to_string(r_fuse.shape()) + " vs r_own " +
                             to_string(r_own.shape()));
      }
      return concat(r_fuse, r_own);
  }
  throw ConfigError("input_combine: bad mode");
}

std::size_t recurrent_input_dim(DecodeMode mode, std::size_t dim) {
  return mode == DecodeMode::independent ? dim : 2 * dim;
}

MultiDecoder::MultiDecoder(std::vector<LstmParams> cells, std::optional<FusionParams> fusion,
                           DecoderGraph graph, DecodeConfig config)
    : cells_(std::move(cells)), fusion_(std::move(fusion)), graph_(std::move(graph)), config_(config) {
  if (cells_.empty()) throw ConfigError("decoder needs at least one block");
  if (config_.mode == DecodeMode::consistent) {
    if (config_.fusion.mode != FusionMode::no_gnn && !fusion_) {
      throw ConfigError("consistent mode needs fusion parameters");
    }
    if (config_.fusion.mode != FusionMode::no_gnn && config_.fusion.iterations < 1) {
      throw ConfigError("consistent mode needs K >= 1");
    }
  }
  if (config_.context_start < 1) throw ConfigError("context_start is 1-based");
}

std::vector<DecoderState> MultiDecoder::initial_states(std::span<const std::size_t> block_rows,
                                                       std::size_t dim) const {
  if (block_rows.size() != cells_.size()) {
    throw DimensionError("initial_states: " + std::to_string(block_rows.size()) + " row counts for " +
                         std::to_string(cells_.size()) + " blocks");
  }
  std::size_t total = 0;
  std::vector<DecoderState> states;
  for (std::size_t b = 0; b < cells_.size(); ++b) {
    DecoderState s;
    s.lstm = lstm_zero_state(block_rows[b], cells_[b].hidden_dim());
    s.r_own = Tensor(Shape{block_rows[b], dim});
    s.r_fuse = Tensor(Shape{block_rows[b], dim});
    states.push_back(std::move(s));
    total += block_rows[b];
  }
  if (config_.mode == DecodeMode::consistent && total != graph_.size()) {
    throw DimensionError("decoder graph has " + std::to_string(graph_.size()) + " nodes for " +
                         std::to_string(total) + " decoder rows");
  }
  return states;
}

std::vector<Tensor> MultiDecoder::fused_context(std::span<const Tensor> fusion_features) const {
  if (fusion_features.size() != cells_.size()) {
    throw DimensionError("fused_context: features for " + std::to_string(fusion_features.size()) +
                         " blocks, expected " + std::to_string(cells_.size()));
  }
  const Tensor nodes = fusion_features.size() == 1 ? fusion_features[0] : concat_rows(fusion_features);
  static const FusionParams unused{};
  const Tensor fused = fuse(nodes, graph_, fusion_ ? *fusion_ : unused, config_.fusion);
  std::vector<Tensor> out;
  std::size_t row = 0;
  for (const auto& f : fusion_features) {
    out.push_back(fusion_features.size() == 1 ? fused : slice_rows(fused, row, f.rows()));
    row += f.rows();
  }
  return out;
}

void MultiDecoder::step_all(std::span<DecoderState> states, std::span<const Tensor> r_own,
                            std::span<const Tensor> fusion_features) const {
  if (states.size() != cells_.size() || r_own.size() != cells_.size()) {
    throw DimensionError("step_all: expected " + std::to_string(cells_.size()) + " blocks");
  }
  const std::size_t step = states[0].steps + 1;
  for (const auto& s : states) {
    if (s.steps + 1 != step) {
      throw ContractError("step_all: decoders out of sync (" + std::to_string(s.steps) + " vs " +
                          std::to_string(step - 1) + " steps consumed)");
    }
  }
  const bool context = step >= config_.context_start;

  std::vector<Tensor> fused;
  if (config_.mode == DecodeMode::consistent && context) fused = fused_context(fusion_features);

  for (std::size_t b = 0; b < states.size(); ++b) {
    auto& s = states[b];
    s.r_own = r_own[b];
    Tensor x;
    if (config_.mode == DecodeMode::independent) {
      x = r_own[b];
    } else if (!context) {
      s.r_fuse = Tensor(r_own[b].shape());
      x = concat(s.r_fuse, r_own[b]);
    } else if (config_.mode == DecodeMode::consistent) {
      s.r_fuse = fused[b];
      x = input_combine(r_own[b], s.r_fuse, config_.mode);
    } else {
      s.r_fuse = r_own[b];
      x = input_combine(r_own[b], s.r_fuse, config_.mode);
    }
    s.lstm = lstm_step(x, s.lstm, cells_[b]);
    s.steps = step;
  }
}

std::vector<DecoderState> decode(const MultiDecoder& decoder, Readout& readout,
                                 std::span<const std::size_t> block_rows, std::size_t dim, std::size_t steps) {
  auto states = decoder.initial_states(block_rows, dim);
  const std::size_t blocks = decoder.block_count();
  std::vector<Tensor> fusion_features(blocks), inputs(blocks);
  for (std::size_t t = 1; t <= steps; ++t) {
    for (std::size_t b = 0; b < blocks; ++b) inputs[b] = readout.input(b, t);
    decoder.step_all(states, inputs, fusion_features);
    for (std::size_t b = 0; b < blocks; ++b) fusion_features[b] = readout.emit(b, t, states[b].lstm.h);
  }
  return states;
}

}  // namespace cmsd
