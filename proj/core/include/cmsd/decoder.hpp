#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cmsd/cells.hpp"
#include "cmsd/fusion.hpp"
#include "cmsd/graph.hpp"
#include "cmsd/tensor.hpp"

namespace cmsd {

enum class DecodeMode {
  independent,  // input = r_own
  baseline2x,   // input = [r_own, r_own]
  consistent,   // input = [r_fuse, r_own]
};

std::string_view to_string(DecodeMode mode);
DecodeMode parse_decode_mode(std::string_view text);

/// Recurrent input for one step.
///   independent -> r_own
///   baseline2x  -> [r_own, r_own]
///   consistent  -> [r_fuse, r_own]
Tensor input_combine(const Tensor& r_own, const Tensor& r_fuse, DecodeMode mode);

/// LSTM input width for representation width `dim` under `mode`.
std::size_t recurrent_input_dim(DecodeMode mode, std::size_t dim);

/// State of one block of decoder rows that share recurrent parameters.
/// Each row is one decoder (or one sample of a decoder in a batch).
struct DecoderState {
  LstmState lstm;
  Tensor r_own;   // [rows x d] own previous output representation
  Tensor r_fuse;  // [rows x d] fused context, zero before context exists
  std::size_t steps = 0;
};

struct DecodeConfig {
  DecodeMode mode = DecodeMode::independent;
  FusionConfig fusion;
  /// First 1-based step whose second input carries context. Earlier steps see
  /// a zero vector there (the conditioning and start steps).
  std::size_t context_start = 3;
};

/// N decoders advanced in lock step. Decoders are grouped into blocks; every
/// row of block b uses cells[b]. In consistent mode the graph spans all rows of
/// all blocks, numbered block by block.
class MultiDecoder {
 public:
  MultiDecoder(std::vector<LstmParams> cells, std::optional<FusionParams> fusion, DecoderGraph graph,
               DecodeConfig config);

  std::size_t block_count() const { return cells_.size(); }
  const DecodeConfig& config() const { return config_; }
  const DecoderGraph& graph() const { return graph_; }
  const LstmParams& cell(std::size_t block) const { return cells_.at(block); }

  std::vector<DecoderState> initial_states(std::span<const std::size_t> block_rows, std::size_t dim) const;

  /// Advances every block by one step. `r_own[b]` is block b's own previous
  /// output representation; `fusion_features[b]` holds the representations
  /// emitted at the previous step and is only read once context is available
  /// in consistent mode. Throws ContractError if blocks are out of sync.
  void step_all(std::span<DecoderState> states, std::span<const Tensor> r_own,
                std::span<const Tensor> fusion_features) const;

  /// Fused context for each block from the previous step's representations.
  std::vector<Tensor> fused_context(std::span<const Tensor> fusion_features) const;

 private:
  std::vector<LstmParams> cells_;
  std::optional<FusionParams> fusion_;
  DecoderGraph graph_;
  DecodeConfig config_;
};

/// Task-specific input and output layers around a MultiDecoder.
class Readout {
 public:
  virtual ~Readout() = default;
  /// Representation fed as r_own at 1-based step t.
  virtual Tensor input(std::size_t block, std::size_t step) = 0;
  /// Consumes the hidden state after step t and returns the representation
  /// that feeds fusion at step t + 1.
  virtual Tensor emit(std::size_t block, std::size_t step, const Tensor& hidden) = 0;
};

/// Runs `steps` synchronized steps from fresh states.
std::vector<DecoderState> decode(const MultiDecoder& decoder, Readout& readout,
                                 std::span<const std::size_t> block_rows, std::size_t dim, std::size_t steps);

}  // namespace cmsd
