#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "cmsd/optim.hpp"

namespace cmsd {

/// Learning-rate schedule shared by both tasks: the rate is halved after
/// `patience` epochs without validation improvement, never below `min_lr`.
/// A fixed period > 0 instead halves every `period` epochs.
struct LrSchedule {
  double initial = 1e-3;
  double min_lr = 1e-6;
  std::size_t patience = 2;
  std::size_t period = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_metric = 0.0;
  double lr = 0.0;
};

/// Everything besides parameters and momentum needed to resume training.
struct TrainProgress {
  std::size_t epoch = 0;  // epochs completed
  double lr = 0.0;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t stale_epochs = 0;
  std::vector<EpochRecord> trace;
};

TrainProgress start_progress(const LrSchedule& schedule);

/// Records an epoch and updates the rate. Lower validation values are better.
void finish_epoch(TrainProgress& progress, const LrSchedule& schedule, double train_loss, double val_metric);

/// Throws TrainingError naming the epoch when `loss` is not finite.
void require_finite(double loss, std::size_t epoch);

/// Deterministic per-stream generator derived from a run seed.
Rng stream_rng(std::uint64_t seed, std::uint64_t stream);

/// Indices 0..n-1 shuffled by a generator derived from (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

}  // namespace cmsd
