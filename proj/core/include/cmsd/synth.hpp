#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cmsd/decoder.hpp"
#include "cmsd/training.hpp"

namespace cmsd::synth {

inline constexpr std::size_t kLength = 16;     // x = 1..16
inline constexpr std::size_t kForecast = 15;   // y(2)..y(16)
inline constexpr std::size_t kSteps = 16;      // coefficients, y(1), then 14 fed-back outputs

/// y1(x) = a x + b and y2(x) = c x + d + y1(x) on x = 1..16.
struct PairedSequences {
  double a = 0, b = 0, c = 0, d = 0;
  std::array<double, kLength> y1{};
  std::array<double, kLength> y2{};
};

PairedSequences make_pair(double a, double b, double c, double d);
/// Coefficients drawn from U(5, 15).
PairedSequences sample_pair(Rng& rng);

struct Splits {
  std::vector<PairedSequences> train, val, test;
};

struct SynthConfig {
  std::size_t n_train = 8000, n_val = 1000, n_test = 1000;
  std::size_t hidden = 256;
  std::size_t embed = 32;
  std::size_t batch = 40;
  std::size_t epochs = 30;
  double momentum = 0.98;
  LrSchedule schedule{3e-3, 1e-6, 2, 0};
  double clip_norm = 5.0;  // 0 disables
  DecodeMode mode = DecodeMode::consistent;
  FusionConfig fusion{FusionMode::full, 1};
  std::uint64_t seed = 1;
};

/// "desk" (8K/1K/1K, hidden 256) or "paper" (70K/5K/5K, hidden 2048,
/// constant lr 1e-6).
SynthConfig synth_preset(std::string_view name);

/// Seeded, disjoint train/val/test draws.
Splits build_dataset(const SynthConfig& config);

/// Standardisation constants estimated on the training split.
struct Normalizer {
  double coef_mean = 0, coef_std = 1;
  double y1_mean = 0, y1_std = 1;
  double y2_mean = 0, y2_std = 1;
};

Normalizer fit_normalizer(std::span<const PairedSequences> train);

/// Two decoders (one per sequence), each: coefficient embedding, value
/// embedding, LSTM, output representation and scalar head. The output
/// representation feeds fusion in consistent mode.
class SynthModel {
 public:
  SynthModel(const SynthConfig& config, const Normalizer& norm);

  struct Forward {
    Tensor loss;                     // standardized MSE over both sequences
    std::vector<Tensor> y1, y2;      // standardized predictions per step, [B x 1]
  };
  Forward forward(std::span<const PairedSequences> batch) const;

  /// Forecasts y(2)..y(16) in original units, [sample][step].
  struct Forecast {
    std::vector<std::array<double, kForecast>> y1, y2;
  };
  Forecast predict(std::span<const PairedSequences> batch) const;

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const SynthConfig& config() const { return config_; }
  const Normalizer& normalizer() const { return norm_; }

 private:
  struct Head {
    Linear coef, value, repr, out;
  };

  SynthConfig config_;
  Normalizer norm_;
  ParameterSet params_;
  std::array<Head, 2> heads_;
  std::vector<LstmParams> cells_;
  std::optional<FusionParams> fusion_;
};

struct MseResult {
  double y1 = 0.0;
  double y2 = 0.0;
};

/// Mean squared error over every forecast value of every sample.
MseResult eval_mse(const SynthModel& model, std::span<const PairedSequences> data, std::size_t batch = 200);
/// Same, for forecasts from any source.
MseResult forecast_mse(const SynthModel::Forecast& forecast, std::span<const PairedSequences> data);

using EpochCallback = std::function<void(const SynthModel&, const TrainProgress&)>;

/// Runs epochs until config.epochs are complete, starting from `progress`
/// (fresh when omitted). The callback fires after every epoch.
TrainProgress train_synth(SynthModel& model, const Splits& data, std::optional<TrainProgress> progress = {},
                          const EpochCallback& on_epoch = {});

}  // namespace cmsd::synth
