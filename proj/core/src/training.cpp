#include "cmsd/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "cmsd/errors.hpp"

namespace cmsd {

TrainProgress start_progress(const LrSchedule& schedule) {
  if (!(schedule.initial > 0.0) || schedule.min_lr < 0.0) throw ConfigError("learning rate must be positive");
  TrainProgress p;
  p.lr = schedule.initial;
  return p;
}

void finish_epoch(TrainProgress& progress, const LrSchedule& schedule, double train_loss, double val_metric) {
  ++progress.epoch;
  progress.trace.push_back({progress.epoch, train_loss, val_metric, progress.lr});
  bool halve = false;
  if (schedule.period > 0) {
    halve = progress.epoch % schedule.period == 0;
  } else if (val_metric < progress.best_val) {
    progress.stale_epochs = 0;
  } else if (++progress.stale_epochs >= schedule.patience) {
    progress.stale_epochs = 0;
    halve = true;
  }
  progress.best_val = std::min(progress.best_val, val_metric);
  if (halve) progress.lr = std::max(schedule.min_lr, progress.lr / 2.0);
}

void require_finite(double loss, std::size_t epoch) {
  if (!std::isfinite(loss)) {
    throw TrainingError("training diverged in epoch " + std::to_string(epoch) + " (loss " + std::to_string(loss) + ")");
  }
}

Rng stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = stream_rng(seed, 1000 + epoch);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace cmsd
