#include "cmsd/synth.hpp"

#include <cmath>
#include <random>
#include <string>

#include "cmsd/errors.hpp"
#include "cmsd/ops.hpp"

namespace cmsd::synth {

PairedSequences make_pair(double a, double b, double c, double d) {
  PairedSequences s{a, b, c, d, {}, {}};
  for (std::size_t i = 0; i < kLength; ++i) {
    const double x = static_cast<double>(i + 1);
    s.y1[i] = a * x + b;
    s.y2[i] = c * x + d + s.y1[i];
  }
  return s;
}

PairedSequences sample_pair(Rng& rng) {
  std::uniform_real_distribution<double> u(5.0, 15.0);
  const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
  return make_pair(a, b, c, d);
}

SynthConfig synth_preset(std::string_view name) {
  SynthConfig c;
  if (name == "desk") return c;
  if (name == "paper") {
    c.n_train = 70000;
    c.n_val = 5000;
    c.n_test = 5000;
    c.hidden = 2048;
    c.schedule = {1e-6, 1e-6, 0, 0};
    c.clip_norm = 0.0;
    return c;
  }
  throw ConfigError("unknown synth preset '" + std::string(name) + "'");
}

Splits build_dataset(const SynthConfig& config) {
  auto rng = stream_rng(config.seed, 0);
  Splits s;
  auto fill = [&rng](std::vector<PairedSequences>& out, std::size_t n) {
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample_pair(rng));
  };
  fill(s.train, config.n_train);
  fill(s.val, config.n_val);
  fill(s.test, config.n_test);
  return s;
}

namespace {

struct Moments {
  double sum = 0, sq = 0;
  std::size_t n = 0;
  void add(double x) {
    sum += x;
    sq += x * x;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double stddev() const {
    if (n < 2) return 1.0;
    const double m = mean();
    const double var = sq / static_cast<double>(n) - m * m;
    return var > 1e-12 ? std::sqrt(var) : 1.0;
  }
};

}  // namespace

Normalizer fit_normalizer(std::span<const PairedSequences> train) {
  Moments coef, y1, y2;
  for (const auto& s : train) {
    for (double v : {s.a, s.b, s.c, s.d}) coef.add(v);
    for (double v : s.y1) y1.add(v);
    for (double v : s.y2) y2.add(v);
  }
  return {coef.mean(), coef.stddev(), y1.mean(), y1.stddev(), y2.mean(), y2.stddev()};
}

SynthModel::SynthModel(const SynthConfig& config, const Normalizer& norm) : config_(config), norm_(norm) {
  if (config.embed == 0 || config.hidden == 0) throw ConfigError("synth: embed and hidden sizes must be positive");
  auto rng = stream_rng(config.seed, 1);
  const std::size_t e = config.embed;
  const std::size_t in = recurrent_input_dim(config.mode, e);
  for (std::size_t k = 0; k < 2; ++k) {
    const std::string name = "dec" + std::to_string(k + 1);
    auto& h = heads_[k];
    h.coef = make_linear(params_, name + ".coef_embed", 2, e, rng);
    h.value = make_linear(params_, name + ".value_embed", 1, e, rng);
    cells_.push_back(make_lstm(params_, name + ".lstm", in, config.hidden, rng));
    h.repr = make_linear(params_, name + ".repr", config.hidden, e, rng);
    h.out = make_linear(params_, name + ".out", e, 1, rng);
  }
  if (config.mode == DecodeMode::consistent && config.fusion.mode != FusionMode::no_gnn) {
    fusion_ = make_fusion(params_, "fusion", e, rng);
  }
}

namespace {

class SynthReadout : public Readout {
 public:
  SynthReadout(std::span<const PairedSequences> batch, const Normalizer& norm, std::span<const Linear> coef, std::span<const Linear> value, std::span<const Linear> repr,
               std::span<const Linear> out)
      : coef_(coef), value_(value), repr_(repr), out_(out) {
    const std::size_t n = batch.size();
    for (std::size_t k = 0; k < 2; ++k) {
      std::vector<double> c(2 * n), first(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& s = batch[i];
        c[2 * i] = ((k ? s.c : s.a) - norm.coef_mean) / norm.coef_std;
        c[2 * i + 1] = ((k ? s.d : s.b) - norm.coef_mean) / norm.coef_std;
        first[i] = k ? (s.y2[0] - norm.y2_mean) / norm.y2_std : (s.y1[0] - norm.y1_mean) / norm.y1_std;
      }
      coefficients_[k] = Tensor(Shape{n, 2}, std::move(c));
      first_[k] = Tensor(Shape{n, 1}, std::move(first));
    }
  }

  Tensor input(std::size_t block, std::size_t step) override {
    if (step == 1) return coef_[block](coefficients_[block]);
    if (step == 2) return value_[block](first_[block]);
    return value_[block](predictions[block].back());
  }

  Tensor emit(std::size_t block, std::size_t step, const Tensor& hidden) override {
    Tensor r = tanh(repr_[block](hidden));
    if (step >= 2) predictions[block].push_back(out_[block](r));
    return r;
  }

  std::array<std::vector<Tensor>, 2> predictions;

 private:
  std::span<const Linear> coef_, value_, repr_, out_;
  std::array<Tensor, 2> coefficients_, first_;
};

}  // namespace

SynthModel::Forward SynthModel::forward(std::span<const PairedSequences> batch) const {
  if (batch.empty()) throw ConfigError("synth: empty batch");
  const std::size_t n = batch.size();
  std::array<Linear, 2> coef{heads_[0].coef, heads_[1].coef}, value{heads_[0].value, heads_[1].value},
      repr{heads_[0].repr, heads_[1].repr}, out{heads_[0].out, heads_[1].out};
  SynthReadout readout(batch, norm_, coef, value, repr, out);

  DecodeConfig dc{config_.mode, config_.fusion, 3};
  const auto graph = config_.mode == DecodeMode::consistent ? DecoderGraph::complete(2).replicate(n)
                                                             : DecoderGraph(2 * n);
  MultiDecoder decoder(cells_, fusion_, graph, dc);
  const std::size_t rows[] = {n, n};
  decode(decoder, readout, rows, config_.embed, kSteps);

  Forward f;
  f.y1 = std::move(readout.predictions[0]);
  f.y2 = std::move(readout.predictions[1]);
  Tensor total;
  for (std::size_t t = 0; t < kForecast; ++t) {
    std::vector<double> t1(n), t2(n);
    for (std::size_t i = 0; i < n; ++i) {
      t1[i] = (batch[i].y1[t + 1] - norm_.y1_mean) / norm_.y1_std;
      t2[i] = (batch[i].y2[t + 1] - norm_.y2_mean) / norm_.y2_std;
    }
    Tensor term = add(mse_loss(f.y1[t], Tensor(Shape{n, 1}, std::move(t1))),
                      mse_loss(f.y2[t], Tensor(Shape{n, 1}, std::move(t2))));
    total = total.defined() ? add(total, term) : term;
  }
  f.loss = scale(total, 1.0 / (2.0 * kForecast));
  return f;
}

SynthModel::Forecast SynthModel::predict(std::span<const PairedSequences> batch) const {
  auto f = forward(batch);
  Forecast out;
  out.y1.resize(batch.size());
  out.y2.resize(batch.size());
  for (std::size_t t = 0; t < kForecast; ++t) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      out.y1[i][t] = f.y1[t][i] * norm_.y1_std + norm_.y1_mean;
      out.y2[i][t] = f.y2[t][i] * norm_.y2_std + norm_.y2_mean;
    }
  }
  return out;
}

MseResult forecast_mse(const SynthModel::Forecast& forecast, std::span<const PairedSequences> data) {
  if (forecast.y1.size() != data.size() || forecast.y2.size() != data.size()) {
    throw DimensionError("forecast_mse: forecast count does not match data");
  }
  MseResult r;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t t = 0; t < kForecast; ++t) {
      const double e1 = forecast.y1[i][t] - data[i].y1[t + 1];
      const double e2 = forecast.y2[i][t] - data[i].y2[t + 1];
      r.y1 += e1 * e1;
      r.y2 += e2 * e2;
    }
  }
  const double count = static_cast<double>(data.size() * kForecast);
  if (count > 0) {
    r.y1 /= count;
    r.y2 /= count;
  }
  return r;
}

MseResult eval_mse(const SynthModel& model, std::span<const PairedSequences> data, std::size_t batch) {
  if (batch == 0) throw ConfigError("eval_mse: batch must be positive");
  SynthModel::Forecast all;
  for (std::size_t begin = 0; begin < data.size(); begin += batch) {
    auto part = model.predict(data.subspan(begin, std::min(batch, data.size() - begin)));
    all.y1.insert(all.y1.end(), part.y1.begin(), part.y1.end());
    all.y2.insert(all.y2.end(), part.y2.begin(), part.y2.end());
  }
  return forecast_mse(all, data);
}

TrainProgress train_synth(SynthModel& model, const Splits& data, std::optional<TrainProgress> progress,
                          const EpochCallback& on_epoch) {
  const auto& cfg = model.config();
  if (cfg.batch == 0) throw ConfigError("synth: batch size must be positive");
  if (data.train.empty()) throw ConfigError("synth: empty training split");
  TrainProgress p = progress ? std::move(*progress) : start_progress(cfg.schedule);
  std::vector<PairedSequences> batch;
  while (p.epoch < cfg.epochs) {
    const std::size_t epoch = p.epoch + 1;
    const auto order = epoch_order(data.train.size(), cfg.seed, epoch);
    const SgdMomentum sgd(p.lr, cfg.momentum);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch) {
      batch.clear();
      for (std::size_t i = begin; i < std::min(order.size(), begin + cfg.batch); ++i)
        batch.push_back(data.train[order[i]]);
      model.params().zero_grads();
      auto f = model.forward(batch);
      const double loss = f.loss.item();
      require_finite(loss, epoch);
      backward(f.loss);
      if (cfg.clip_norm > 0) clip_gradients(model.params(), cfg.clip_norm);
      sgd.step(model.params());
      loss_sum += loss;
      ++batches;
    }
    const auto& val_set = data.val.empty() ? data.train : data.val;
    const auto val = eval_mse(model, val_set);
    require_finite(val.y1 + val.y2, epoch);
    finish_epoch(p, cfg.schedule, loss_sum / static_cast<double>(batches), val.y1 + val.y2);
    if (on_epoch) on_epoch(model, p);
  }
  return p;
}

}  // namespace cmsd::synth
