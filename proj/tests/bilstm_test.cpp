#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ztn/bilstm.hpp"

namespace ztn {
namespace {

// Scalar LSTM cell, written out gate by gate.
struct ScalarCell {
  double wi, wf, wg, wo;  // input weights
  double ui, uf, ug, uo;  // recurrent weights
  double bi, bf, bg, bo;

  static double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

  // Returns h after consuming xs in order.
  double run(std::initializer_list<double> xs) const {
    double h = 0.0, c = 0.0;
    for (double x : xs) {
      const double i = sig(wi * x + ui * h + bi);
      const double f = sig(wf * x + uf * h + bf);
      const double g = std::tanh(wg * x + ug * h + bg);
      const double o = sig(wo * x + uo * h + bo);
      c = f * c + i * g;
      h = o * std::tanh(c);
    }
    return h;
  }
};

void load_cell(BiLstmModel& m, int dir, const ScalarCell& s) {
  auto p = m.parameters();
  const auto& c = m.cell(0, dir);
  const double wx[4] = {s.wi, s.wf, s.wg, s.wo};
  const double wh[4] = {s.ui, s.uf, s.ug, s.uo};
  const double b[4] = {s.bi, s.bf, s.bg, s.bo};
  for (int r = 0; r < 4; ++r) {
    p[c.wx + r] = wx[r];
    p[c.wh + r] = wh[r];
    p[c.b + r] = b[r];
  }
}

BiLstmArchitecture tiny(std::size_t hidden, std::size_t window, std::size_t layers = 1, std::size_t dense = 2) {
  BiLstmArchitecture a;
  a.hidden = hidden;
  a.window = window;
  a.layers = layers;
  a.dense_hidden = dense;
  a.dropout = 0.0;
  return a;
}

TEST(BiLstm, ParameterCountIsPureFunction) {
  const BiLstmArchitecture def;
  // 2 directions x (4H(in + H) + 4H) per layer, then the dense head.
  const std::size_t layer0 = 2 * (4 * 50 * (1 + 50) + 4 * 50);
  const std::size_t layer12 = 2 * (4 * 50 * (100 + 50) + 4 * 50);
  const std::size_t head = 32 * 100 + 32 + 32 + 1;
  EXPECT_EQ(def.parameter_count(), layer0 + 2 * layer12 + head);
  EXPECT_EQ(BiLstmModel(def).parameter_count(), def.parameter_count());
}

TEST(BiLstm, ZeroWeightsGiveZero) {
  BiLstmModel m(BiLstmArchitecture{});
  const std::vector<double> w{0.1, 0.5, 0.2, 0.9, 0.3, 0.4, 0.7, 0.8, 0.6};
  EXPECT_EQ(m.predict(w), 0.0);
}

TEST(BiLstm, WrongWindowLength) {
  BiLstmModel m(BiLstmArchitecture{}, 1);
  EXPECT_THROW(m.predict(std::vector<double>(8, 0.0)), DataError);
}

TEST(BiLstm, MatchesHandComputedCell) {
  BiLstmModel m(tiny(1, 2, 1, 1));
  const ScalarCell fwd{0.5, -0.3, 0.8, 0.2, 0.1, 0.4, -0.6, 0.3, 0.05, 0.2, -0.1, 0.15};
  const ScalarCell bwd{-0.4, 0.6, 0.3, -0.2, 0.25, -0.1, 0.5, 0.45, -0.05, 0.1, 0.2, -0.3};
  load_cell(m, 0, fwd);
  load_cell(m, 1, bwd);
  auto p = m.parameters();
  const auto& h = m.head();
  p[h.w1 + 0] = 0.7;
  p[h.w1 + 1] = -0.9;
  p[h.b1] = 0.4;
  p[h.w2] = 1.3;
  p[h.b2] = -0.2;

  const double x0 = 0.3, x1 = 0.8;
  // Last timestep: forward cell has seen x0, x1; reversed cell has seen only x1.
  const double hf = fwd.run({x0, x1});
  const double hb = bwd.run({x1});
  const double pre = 0.7 * hf - 0.9 * hb + 0.4;
  const double expected = 1.3 * std::max(pre, 0.0) - 0.2;
  EXPECT_NEAR(m.predict(std::vector<double>{x0, x1}), expected, 1e-14);

  // Reversed-direction output at t = 0 has consumed x1 then x0.
  const auto outs = m.layer_outputs(std::vector<double>{x0, x1});
  EXPECT_NEAR(outs[0][0 * 2 + 1], bwd.run({x1, x0}), 1e-14);
  EXPECT_NEAR(outs[0][1 * 2 + 0], hf, 1e-14);
}

TEST(BiLstm, ReversalSymmetryWithTiedWeights) {
  BiLstmModel m(tiny(4, 6), 17);
  auto p = m.parameters();
  const auto& f = m.cell(0, 0);
  const auto& b = m.cell(0, 1);
  for (std::size_t i = 0; i < b.wx - f.wx; ++i) p[b.wx + i] = p[f.wx + i];

  const std::vector<double> x{0.1, 0.7, -0.3, 0.4, 0.9, 0.2};
  const std::vector<double> rev(x.rbegin(), x.rend());
  const auto a = m.layer_outputs(x)[0];
  const auto r = m.layer_outputs(rev)[0];
  const std::size_t T = 6, H = 4;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < H; ++j) {
      EXPECT_DOUBLE_EQ(r[t * 2 * H + j], a[(T - 1 - t) * 2 * H + H + j]);
      EXPECT_DOUBLE_EQ(r[t * 2 * H + H + j], a[(T - 1 - t) * 2 * H + j]);
    }
}

// Central finite differences against backprop, for every parameter.
double max_relative_gradient_error(BiLstmModel& m, const std::vector<double>& window, double target,
                                   std::uint64_t dropout_seed = 0) {
  auto loss = [&](const BiLstmModel& model) {
    std::vector<double> scratch(model.parameter_count(), 0.0);
    if (dropout_seed != 0) {
      Rng rng(dropout_seed);
      return model.accumulate_gradient(window, target, scratch, 1.0, &rng);
    }
    return model.accumulate_gradient(window, target, scratch, 1.0);
  };
  std::vector<double> grad(m.parameter_count(), 0.0);
  if (dropout_seed != 0) {
    Rng rng(dropout_seed);
    m.accumulate_gradient(window, target, grad, 1.0, &rng);
  } else {
    m.accumulate_gradient(window, target, grad, 1.0);
  }

  const double eps = 1e-5;
  double worst = 0.0;
  auto p = m.parameters();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + eps;
    const double up = loss(m);
    p[i] = saved - eps;
    const double down = loss(m);
    p[i] = saved;
    const double numeric = (up - down) / (2 * eps);
    const double denom = std::max({std::abs(numeric), std::abs(grad[i]), 1e-6});
    worst = std::max(worst, std::abs(numeric - grad[i]) / denom);
  }
  return worst;
}

TEST(BiLstm, GradientCheckSingleLayer) {
  BiLstmModel m(tiny(3, 4, 1, 4), 5);
  // Keep the dense pre-activations away from the ReLU kink.
  auto p = m.parameters();
  for (std::size_t r = 0; r < 4; ++r) p[m.head().b1 + r] = 0.8;
  EXPECT_LT(max_relative_gradient_error(m, {0.2, 0.9, 0.4, 0.6}, 0.35), 1e-4);
}

TEST(BiLstm, GradientCheckAllGroupsThreeLayers) {
  BiLstmModel m(tiny(3, 4, 3, 4), 6);
  auto p = m.parameters();
  for (std::size_t r = 0; r < 4; ++r) p[m.head().b1 + r] = 0.8;
  EXPECT_LT(max_relative_gradient_error(m, {0.5, 0.1, 0.8, 0.3}, -0.2), 1e-4);
}

TEST(BiLstm, GradientCheckWithDropoutMasks) {
  auto arch = tiny(3, 4, 2, 4);
  arch.dropout = 0.3;
  BiLstmModel m(arch, 7);
  auto p = m.parameters();
  for (std::size_t r = 0; r < 4; ++r) p[m.head().b1 + r] = 0.8;
  EXPECT_LT(max_relative_gradient_error(m, {0.5, 0.1, 0.8, 0.3}, 0.4, 99), 1e-4);
}

TEST(BiLstm, ZeroDropoutMatchesNoDropout) {
  BiLstmModel m(tiny(4, 5, 2, 3), 8);
  const std::vector<double> x{0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> g1(m.parameter_count(), 0.0), g2(m.parameter_count(), 0.0);
  Rng rng(1);
  m.accumulate_gradient(x, 0.3, g1, 1.0, &rng);
  m.accumulate_gradient(x, 0.3, g2, 1.0, nullptr);
  EXPECT_EQ(g1, g2);
}

TEST(BiLstm, InferenceIgnoresDropout) {
  auto arch = tiny(4, 5, 2, 3);
  arch.dropout = 0.5;
  BiLstmModel m(arch, 8);
  const std::vector<double> x{0.1, 0.2, 0.3, 0.4, 0.5};
  const double first = m.predict(x);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(m.predict(x), first);
}

TEST(Adam, FirstStepIsSignedLearningRate) {
  AdamParams ap;
  Adam adam(3, ap);
  std::vector<double> params{1.0, 2.0, -3.0};
  const std::vector<double> g{0.5, -2.0, 1e-3};
  adam.step(params, g);
  EXPECT_NEAR(params[0], 1.0 - ap.learning_rate, 1e-8);
  EXPECT_NEAR(params[1], 2.0 + ap.learning_rate, 1e-8);
  EXPECT_NEAR(params[2], -3.0 - ap.learning_rate, 1e-7);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, BiasCorrectedMoments) {
  AdamParams ap;
  ap.learning_rate = 0.01;
  Adam adam(1, ap);
  std::vector<double> p{0.0};
  adam.step(p, std::vector<double>{1.0});
  adam.step(p, std::vector<double>{3.0});
  // Second step by hand.
  const double m = 0.9 * 0.1 + 0.1 * 3.0;
  const double v = 0.999 * 0.001 + 0.001 * 9.0;
  const double m_hat = m / (1 - 0.81);
  const double v_hat = v / (1 - 0.999 * 0.999);
  const double first = -0.01 / (1.0 + 1e-8);
  EXPECT_NEAR(p[0], first - 0.01 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-15);
}

TEST(Adam, RejectsBadParams) {
  AdamParams ap;
  ap.beta1 = 1.0;
  EXPECT_THROW(Adam(1, ap), ConfigError);
}

WindowedDataset series_windows(std::size_t n, std::size_t w, auto fn) {
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = fn(i);
  return make_windows(s, w);
}

TEST(Train, ConstantTargetLearnable) {
  BiLstmModel m(tiny(4, 5, 1, 4), 3);
  const auto data = series_windows(80, 5, [](std::size_t) { return 0.6; });
  ForecastTrainConfig cfg;
  cfg.epochs = 20;
  cfg.adam.learning_rate = 1e-2;
  const auto report = train(m, data, cfg);
  ASSERT_EQ(report.train_loss.size(), 20u);
  ASSERT_EQ(report.val_loss.size(), 20u);
  EXPECT_LT(mean_squared_error(m, data.slice(0, report.train_windows)), report.initial_train_loss);
}

TEST(Train, Deterministic) {
  const auto data = series_windows(60, 4, [](std::size_t i) { return 0.5 + 0.4 * std::sin(0.3 * i); });
  auto arch = tiny(3, 4, 2, 3);
  arch.dropout = 0.2;
  ForecastTrainConfig cfg;
  cfg.epochs = 3;
  BiLstmModel a(arch, 4), b(arch, 4);
  const auto ra = train(a, data, cfg);
  const auto rb = train(b, data, cfg);
  EXPECT_EQ(ra.train_loss, rb.train_loss);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
}

TEST(Train, NanLossNamesEpoch) {
  BiLstmModel m(tiny(2, 3), 1);
  std::vector<double> s{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, std::nan(""), 0.8};
  const auto data = make_windows(s, 3);
  ForecastTrainConfig cfg;
  cfg.epochs = 2;
  cfg.train_fraction = 1.0;
  cfg.val_fraction = 0.0;
  try {
    train(m, data, cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
  }
}

TEST(Train, RejectsBadSplits) {
  BiLstmModel m(tiny(2, 3), 1);
  const auto data = series_windows(20, 3, [](std::size_t i) { return 0.1 * (i % 5); });
  ForecastTrainConfig cfg;
  cfg.train_fraction = 0.8;
  cfg.val_fraction = 0.3;
  EXPECT_THROW(train(m, data, cfg), ConfigError);
  cfg.val_fraction = 0.1;
  cfg.epochs = 0;
  EXPECT_THROW(train(m, data, cfg), ConfigError);
}

TEST(Train, LearnsNoiselessSinusoid) {
  auto arch = tiny(12, 9, 2, 8);
  arch.dropout = 0.0;
  BiLstmModel m(arch, 21);
  const auto data =
      series_windows(400, 9, [](std::size_t i) { return 0.5 + 0.4 * std::sin(2 * std::numbers::pi * i / 25.0); });
  ForecastTrainConfig cfg;
  cfg.epochs = 60;
  cfg.adam.learning_rate = 5e-3;
  const auto report = train(m, data, cfg);
  const auto val = data.slice(report.train_windows, report.val_windows);
  double mean = 0.0;
  for (double t : val.targets()) mean += t / static_cast<double>(val.size());
  double var = 0.0;
  for (double t : val.targets()) var += (t - mean) * (t - mean) / static_cast<double>(val.size());
  EXPECT_LT(report.val_loss.back(), 0.1 * var);
}

TEST(PredictSeries, LengthAndDeterminism) {
  BiLstmModel m(tiny(3, 9, 1, 2), 2);
  std::vector<double> s(700);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = 40.0 + 20.0 * std::sin(0.05 * i);
  const auto scaler = MinMaxScaler::fit(s);
  const auto a = predict_series(m, scaler, s);
  EXPECT_EQ(a.size(), 691u);
  EXPECT_EQ(a, predict_series(m, scaler, s));
  EXPECT_DOUBLE_EQ(a[0], scaler.inverse(m.predict(scaler.transform(std::span<const double>(s.data(), 9)))));
}

}  // namespace
}  // namespace ztn
