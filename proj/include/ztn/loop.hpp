#pragma once

// End-to-end experiment: dataset generation, forecaster training, agent
// training on forecast states, the monitor -> predict -> decide -> act loop
// against a live simulator, and convergence summaries.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ztn/config.hpp"
#include "ztn/core.hpp"
#include "ztn/errors.hpp"
#include "ztn/forecaster.hpp"
#include "ztn/io.hpp"
#include "ztn/qagent.hpp"
#include "ztn/sim.hpp"

namespace ztn {

// ---------------------------------------------------------------------------
// Dataset

struct Dataset {
  TimeSeries train, test;
};

/// One continuous run; the first train_samples ticks form the training file
/// and the following test_samples ticks the test file.
inline Dataset generate_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto series = run(cfg.dataset_sim()).series();
  return {series.slice(0, cfg.train_samples), series.slice(cfg.train_samples, cfg.test_samples)};
}

// ---------------------------------------------------------------------------
// Forecaster pipeline

struct PipelineReport {
  double mse_bilstm = 0.0;  // Mbps^2 on the test file
  double mse_hybrid = 0.0;
  TrainingReport training;
  std::size_t booster_windows = 0;
  std::size_t test_samples = 0;

  nlohmann::json to_json() const {
    return {{"mse_bilstm", mse_bilstm},
            {"mse_hybrid", mse_hybrid},
            {"hybrid_over_bilstm", mse_bilstm > 0.0 ? mse_hybrid / mse_bilstm : 0.0},
            {"epochs", training.train_loss.size()},
            {"initial_train_loss", training.initial_train_loss},
            {"train_loss", training.train_loss},
            {"val_loss", training.val_loss},
            {"train_windows", training.train_windows},
            {"val_windows", training.val_windows},
            {"booster_windows", booster_windows},
            {"test_samples", test_samples}};
  }
};

struct PipelineResult {
  HybridForecaster forecaster;
  PipelineReport report;
  std::vector<HybridPrediction> test_predictions;  // one per test sample
};

/// Predictions for every sample of `test`, using the tail of `train` as the
/// first window's history.
inline std::vector<HybridPrediction> predict_test(const HybridForecaster& f, const TimeSeries& train,
                                                  const TimeSeries& test) {
  const std::size_t w = f.window();
  const auto tb = train.bandwidths();
  if (tb.size() < w) throw DataError("insufficient data: training series shorter than the window");
  std::vector<double> series(tb.end() - static_cast<std::ptrdiff_t>(w), tb.end());
  const auto xb = test.bandwidths();
  series.insert(series.end(), xb.begin(), xb.end());
  return f.predict_series(series);
}

/// Trains the BiLSTM on the ordered training split of the training file, fits
/// the booster on the recurrent residuals of every window of the training
/// file, and scores both stages on the test file. The validation block alone
/// holds only a couple of congestion episodes, too few for the trees.
inline PipelineResult train_pipeline(const ExperimentConfig& cfg, const TimeSeries& train, const TimeSeries& test) {
  if (cfg.forecast.epochs == 0) throw ConfigError("untrained model: forecaster.epochs must be >= 1");
  cfg.validate();
  const std::size_t w = cfg.arch.window;
  const auto bw = train.bandwidths();
  const auto scaler = MinMaxScaler::fit(bw);
  BiLstmModel model(cfg.arch, cfg.seed);
  const auto training = ztn::train(model, make_windows(scaler.transform(bw), w), cfg.forecast_training());

  BoosterParams bp = cfg.booster;
  bp.seed = cfg.seed;
  const auto rs = residual_set(model, scaler, bw, 0);
  auto booster = BoostedEnsemble::fit(rs.features, rs.residuals, bp);

  PipelineResult out{HybridForecaster(std::move(model), scaler, std::move(booster)), {}, {}};
  out.test_predictions = predict_test(out.forecaster, train, test);
  const auto actual = test.bandwidths();
  std::vector<double> rec, hyb;
  for (const auto& p : out.test_predictions) {
    rec.push_back(p.recurrent);
    hyb.push_back(p.hybrid);
  }
  out.report.mse_bilstm = mse(actual, rec);
  out.report.mse_hybrid = mse(actual, hyb);
  out.report.training = training;
  out.report.booster_windows = rs.residuals.size();
  out.report.test_samples = actual.size();
  return out;
}

// ---------------------------------------------------------------------------
// Agent

/// Hybrid predictions are unclamped; negative forecasts map to the bottom bin.
inline std::size_t state_of(const Discretizer& bins, double bandwidth) {
  return bins(std::max(bandwidth, 0.0)).bin_index;
}

struct AgentResult {
  QCheckpoint checkpoint;
  std::vector<TraceRow> trace;
};

/// Trains on the forecast state sequence of the test file. The trace's MAE
/// column compares acting on the forecast with acting on the measurement.
inline AgentResult train_agent(const ExperimentConfig& cfg, const HybridForecaster& f, const TimeSeries& train,
                               const TimeSeries& test, std::uint64_t seed) {
  cfg.validate();
  const auto bins = cfg.discretizer();
  const auto space = build_default_action_space();
  auto model = build_achieved_table(cfg.sim, space, bins, cfg.expected_metric, cfg.achieved_ticks);
  const auto preds = predict_test(f, train, test);
  std::vector<std::size_t> actual, predicted;
  for (std::size_t i = 0; i < test.size(); ++i) {
    actual.push_back(state_of(bins, test[i].bandwidth));
    predicted.push_back(state_of(bins, preds[i].hybrid));
  }
  QTable q(bins.num_bins(), space.cardinality());
  auto trace = ztn::train(q, predicted, model, cfg.agent, seed,
                          [&](const QTable& t) { return action_mae(model, t, actual, predicted); });
  return {QCheckpoint{std::move(q), std::move(model), bins.num_bins(), bins.max_bw()}, std::move(trace)};
}

// ---------------------------------------------------------------------------
// Closed loop

struct LoopRecord {
  double time_s = 0.0;
  double actual_bw = 0.0;
  double predicted_bw = 0.0;
  std::size_t action_actual = 0;
  std::size_t action_predicted = 0;
  double achieved_bw = 0.0;
  bool match = false;
};

struct LoopSummary {
  std::size_t timestamps = 0;
  std::size_t matches = 0;
  double accuracy = 0.0;
  double mae = 0.0;  // Mbps
  bool degenerate = false;  // untrained all-zero Q-table
  bool reactive = false;
  std::size_t actions_applied = 0;

  nlohmann::json to_json() const {
    return {{"timestamps", timestamps}, {"matches", matches},     {"accuracy", accuracy},
            {"mae", mae},               {"degenerate", degenerate}, {"mode", reactive ? "reactive" : "proactive"},
            {"actions_applied", actions_applied}};
  }
};

struct LoopResult {
  std::vector<LoopRecord> records;
  LoopSummary summary;
};

/// Maps the last w Mbps samples to a prediction of the next one.
using Predictor = std::function<double(std::span<const double>)>;

inline Predictor hybrid_predictor(const HybridForecaster& f) {
  return [&f](std::span<const double> window) { return f.predict(window).hybrid; };
}

/// After `cfg.warmup_ticks` uncontrolled ticks, each timestamp forecasts the
/// next sample from the trailing window, observes it, picks the greedy action
/// for both states and applies one of them: the forecast's (proactive) or
/// the measurement's (reactive).
inline LoopResult run_closed_loop(const ExperimentConfig& cfg, const Predictor& predict, const QTable& q,
                                  const AchievedTable& model, std::size_t timestamps, bool reactive = false) {
  const std::size_t w = cfg.arch.window;
  if (cfg.warmup_ticks < w)
    throw DataError("insufficient history: warm-up of " + std::to_string(cfg.warmup_ticks) + " ticks is shorter than the " +
                    std::to_string(w) + "-sample window");
  if (timestamps == 0) throw ConfigError("timestamps must be >= 1");
  const auto bins = cfg.discretizer();
  const auto space = build_default_action_space();
  if (q.num_states() != bins.num_bins() || q.num_actions() != space.cardinality() ||
      model.num_states() != q.num_states() || model.num_actions() != q.num_actions())
    throw DataError("checkpoint dimensions do not match the configured states and actions");

  Simulator sim(cfg.live_sim());
  std::vector<double> history;
  for (std::size_t k = 0; k < cfg.warmup_ticks; ++k) history.push_back(sim.step().observed_bw);

  LoopResult out;
  double abs_err = 0.0;
  for (std::size_t i = 0; i < timestamps; ++i) {
    const double predicted = predict(std::span<const double>(history).last(w));
    const auto obs = sim.step();
    history.push_back(obs.observed_bw);
    const std::size_t sy = state_of(bins, obs.observed_bw), sp = state_of(bins, predicted);
    const std::size_t ay = best_action(q, sy), ap = best_action(q, sp);
    const std::size_t applied = reactive ? ay : ap;
    sim.apply_action(space, applied);
    out.records.push_back({obs.timestamp, obs.observed_bw, predicted, ay, ap, model.achieved(sy, applied), ay == ap});
    abs_err += std::abs(model.achieved(sy, ay) - model.achieved(sy, ap));
  }

  auto& s = out.summary;
  s.timestamps = timestamps;
  for (const auto& r : out.records) s.matches += r.match;
  s.accuracy = static_cast<double>(s.matches) / static_cast<double>(timestamps);
  s.mae = abs_err / static_cast<double>(timestamps);
  s.degenerate = q.is_zero();
  s.reactive = reactive;
  s.actions_applied = sim.actions_applied();
  return out;
}

inline std::string loop_csv(const std::vector<LoopRecord>& records) {
  std::string out = "time_s,actual_bw,predicted_bw,action_actual,action_predicted,achieved_bw,match\n";
  for (const auto& r : records)
    out += fmt(r.time_s, 3) + "," + fmt(r.actual_bw) + "," + fmt(r.predicted_bw) + ",a" +
           std::to_string(r.action_actual + 1) + ",a" + std::to_string(r.action_predicted + 1) + "," +
           fmt(r.achieved_bw) + "," + (r.match ? "1" : "0") + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Convergence

struct ConvergenceReport {
  std::vector<std::pair<std::size_t, double>> points;  // (episode, mae)
  double initial = 0.0;
  double final = 0.0;
  double ratio = 1.0;  // final / initial; 1 when both are zero

  nlohmann::json to_json() const {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& [e, m] : points) pts.push_back({{"episode", e}, {"mae", m}});
    return {{"points", pts}, {"initial_mae", initial}, {"final_mae", final}, {"final_over_initial", ratio}};
  }
};

/// MAE sampled at every multiple of `every` episodes.
inline ConvergenceReport evaluate_convergence(const std::vector<TraceRow>& trace, std::size_t every) {
  if (every == 0) throw ConfigError("sampling interval must be >= 1");
  ConvergenceReport r;
  for (const auto& row : trace)
    if (row.episode > 0 && row.episode % every == 0) r.points.emplace_back(row.episode, row.mae);
  if (r.points.empty())
    throw DataError("insufficient data: trace has no episode that is a multiple of " + std::to_string(every));
  r.initial = r.points.front().second;
  r.final = r.points.back().second;
  if (r.initial > 0.0)
    r.ratio = r.final / r.initial;
  else
    r.ratio = r.final == 0.0 ? 1.0 : INFINITY;
  return r;
}

}  // namespace ztn
