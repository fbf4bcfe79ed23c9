#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <tuple>

#include "cmsd/errors.hpp"
#include "cmsd/synth.hpp"

namespace cmsd::synth {
namespace {

SynthConfig tiny(DecodeMode mode) {
  SynthConfig c;
  c.n_train = 80;
  c.n_val = 20;
  c.n_test = 20;
  c.hidden = 12;
  c.embed = 6;
  c.batch = 20;
  c.epochs = 2;
  c.mode = mode;
  c.schedule.initial = 1e-2;
  return c;
}

TEST(MakePair, ForcedCoefficients) {
  auto p = make_pair(2, 1, 0, 0);
  EXPECT_DOUBLE_EQ(p.y1[2], 7.0);
}

TEST(MakePair, TrajectoryExample) {
  auto p = make_pair(14.56, 5.18, 10.93, 14.66);
  EXPECT_NEAR(p.y2[0], 45.33, 1e-9);
  EXPECT_NEAR(p.y2[15], 427.68, 1e-9);
}

TEST(SamplePair, Invariants) {
  auto rng = stream_rng(3, 0);
  for (int i = 0; i < 500; ++i) {
    auto p = sample_pair(rng);
    for (double v : {p.a, p.b, p.c, p.d}) {
      EXPECT_GE(v, 5.0);
      EXPECT_LE(v, 15.0);
    }
    const auto ref = make_pair(p.a, p.b, p.c, p.d);
    EXPECT_EQ(p.y1, ref.y1);
    EXPECT_EQ(p.y2, ref.y2);
    for (std::size_t k = 0; k < kLength; ++k) {
      const double x = static_cast<double>(k + 1);
      EXPECT_NEAR(p.y1[k], p.a * x + p.b, 1e-13 * p.y1[k]);
      EXPECT_NEAR(p.y2[k] - p.y1[k], p.c * x + p.d, 1e-12 * p.y2[k]);
    }
  }
}

TEST(BuildDataset, SizesDeterminismAndDisjointness) {
  auto c = synth_preset("desk");
  auto s = build_dataset(c);
  EXPECT_EQ(s.train.size(), 8000u);
  EXPECT_EQ(s.val.size(), 1000u);
  EXPECT_EQ(s.test.size(), 1000u);
  auto again = build_dataset(c);
  EXPECT_EQ(s.test.back().y2, again.test.back().y2);
  std::set<std::tuple<double, double, double, double>> seen;
  for (const auto* split : {&s.train, &s.val, &s.test})
    for (const auto& p : *split) seen.emplace(p.a, p.b, p.c, p.d);
  EXPECT_EQ(seen.size(), 10000u);
  c.seed = 2;
  EXPECT_NE(build_dataset(c).train[0].a, s.train[0].a);
}

TEST(BuildDataset, PaperPresetMeanOfA) {
  auto c = synth_preset("paper");
  EXPECT_EQ(c.n_train, 70000u);
  EXPECT_EQ(c.n_val, 5000u);
  EXPECT_EQ(c.n_test, 5000u);
  EXPECT_EQ(c.hidden, 2048u);
  auto s = build_dataset(c);
  double sum = 0;
  for (const auto& p : s.train) sum += p.a;
  EXPECT_NEAR(sum / 70000.0, 10.0, 0.1);
}

TEST(Preset, UnknownName) { EXPECT_THROW(synth_preset("huge"), ConfigError); }

TEST(ForecastMse, PerfectAndZeroPredictors) {
  auto rng = stream_rng(9, 0);
  std::vector<PairedSequences> data;
  for (int i = 0; i < 30; ++i) data.push_back(sample_pair(rng));
  SynthModel::Forecast perfect, zero;
  double sq1 = 0, sq2 = 0;
  for (const auto& p : data) {
    std::array<double, kForecast> f1{}, f2{};
    for (std::size_t t = 0; t < kForecast; ++t) {
      f1[t] = p.y1[t + 1];
      f2[t] = p.y2[t + 1];
      sq1 += f1[t] * f1[t];
      sq2 += f2[t] * f2[t];
    }
    perfect.y1.push_back(f1);
    perfect.y2.push_back(f2);
    zero.y1.push_back({});
    zero.y2.push_back({});
  }
  auto r = forecast_mse(perfect, data);
  EXPECT_EQ(r.y1, 0.0);
  EXPECT_EQ(r.y2, 0.0);
  auto z = forecast_mse(zero, data);
  EXPECT_NEAR(z.y1, sq1 / (30.0 * kForecast), 1e-9);
  EXPECT_NEAR(z.y2, sq2 / (30.0 * kForecast), 1e-9);
  zero.y1.pop_back();
  EXPECT_THROW(forecast_mse(zero, data), DimensionError);
}

TEST(Normalizer, StandardizesTrainingSplit) {
  auto s = build_dataset(tiny(DecodeMode::independent));
  auto n = fit_normalizer(s.train);
  double sum = 0;
  for (const auto& p : s.train)
    for (double v : p.y2) sum += (v - n.y2_mean) / n.y2_std;
  EXPECT_NEAR(sum, 0.0, 1e-8);
  EXPECT_GT(n.y2_std, n.y1_std);
}

TEST(SynthModel, PredictionShapes) {
  for (auto mode : {DecodeMode::independent, DecodeMode::baseline2x, DecodeMode::consistent}) {
    auto c = tiny(mode);
    auto s = build_dataset(c);
    SynthModel m(c, fit_normalizer(s.train));
    auto f = m.forward(std::span(s.train).first(5));
    EXPECT_EQ(f.y1.size(), kForecast);
    EXPECT_EQ(f.y1[0].shape(), (Shape{5, 1}));
    auto p = m.predict(std::span(s.test).first(3));
    EXPECT_EQ(p.y2.size(), 3u);
    EXPECT_TRUE(std::isfinite(f.loss.item()));
  }
}

TEST(SynthModel, ForecastDependsOnPartnerOnlyWhenCoupled) {
  for (auto mode : {DecodeMode::independent, DecodeMode::consistent}) {
    auto c = tiny(mode);
    auto s = build_dataset(c);
    SynthModel m(c, fit_normalizer(s.train));
    auto p = make_pair(7, 8, 9, 10);
    auto q = p;
    q.a = 12;
    q.b = 6;
    for (std::size_t k = 0; k < kLength; ++k) q.y1[k] = q.a * static_cast<double>(k + 1) + q.b;
    const PairedSequences one[] = {p}, two[] = {q};
    const double y2p = m.predict(one).y2[0][kForecast - 1];
    const double y2q = m.predict(two).y2[0][kForecast - 1];
    if (mode == DecodeMode::independent) {
      EXPECT_EQ(y2p, y2q);
    } else {
      EXPECT_NE(y2p, y2q);
    }
  }
}

TEST(TrainSynth, ZeroEpochsKeepsInitialization) {
  auto c = tiny(DecodeMode::consistent);
  c.epochs = 0;
  auto s = build_dataset(c);
  SynthModel m(c, fit_normalizer(s.train));
  SynthModel fresh(c, fit_normalizer(s.train));
  auto p = train_synth(m, s);
  EXPECT_EQ(p.epoch, 0u);
  ASSERT_EQ(m.params().size(), fresh.params().size());
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    auto a = m.params().params()[i].tensor.values();
    auto b = fresh.params().params()[i].tensor.values();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
}

TEST(TrainSynth, ReproducibleAndResumable) {
  auto c = tiny(DecodeMode::consistent);
  auto s = build_dataset(c);
  SynthModel a(c, fit_normalizer(s.train)), b(c, fit_normalizer(s.train));
  auto pa = train_synth(a, s);
  auto pb = train_synth(b, s);
  ASSERT_EQ(pa.trace.size(), 2u);
  EXPECT_EQ(pa.trace.back().train_loss, pb.trace.back().train_loss);
  EXPECT_EQ(pa.trace.back().val_metric, pb.trace.back().val_metric);

  auto half = c;
  half.epochs = 1;
  SynthModel r(half, fit_normalizer(s.train));
  auto pr = train_synth(r, s);
  SynthModel resumed(c, fit_normalizer(s.train));
  for (std::size_t i = 0; i < r.params().size(); ++i) {
    auto src = r.params().params()[i];
    auto dst = resumed.params().params()[i].tensor.mutable_values();
    std::copy(src.tensor.values().begin(), src.tensor.values().end(), dst.begin());
    resumed.params().params()[i].momentum = src.momentum;
  }
  auto pc = train_synth(resumed, s, pr);
  EXPECT_EQ(pc.trace.back().train_loss, pa.trace.back().train_loss);
}

TEST(TrainSynth, LossDecreases) {
  auto c = tiny(DecodeMode::consistent);
  c.epochs = 6;
  auto s = build_dataset(c);
  SynthModel m(c, fit_normalizer(s.train));
  auto p = train_synth(m, s);
  EXPECT_LT(p.trace.back().train_loss, p.trace.front().train_loss);
}

TEST(TrainSynth, DivergenceNamesEpoch) {
  auto c = tiny(DecodeMode::independent);
  c.schedule.initial = 1e30;
  c.clip_norm = 0;
  auto s = build_dataset(c);
  SynthModel m(c, fit_normalizer(s.train));
  EXPECT_THROW(train_synth(m, s), TrainingError);
}

}  // namespace
}  // namespace cmsd::synth
