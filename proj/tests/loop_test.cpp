#include <gtest/gtest.h>

#include <sstream>

#include "ztn/commands.hpp"
#include "ztn/loop.hpp"

namespace ztn {
namespace {

// Small enough to train in well under a second.
ExperimentConfig small_config() {
  ExperimentConfig c;
  c.train_samples = 300;
  c.test_samples = 80;
  c.arch.hidden = 4;
  c.arch.layers = 1;
  c.arch.dense_hidden = 4;
  c.forecast.epochs = 3;
  c.booster.n_estimators = 10;
  c.agent.episodes = 400;
  c.report_every = 100;
  c.warmup_ticks = 50;
  return c;
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ztn_loop_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Dataset, DefaultSizesAndContinuity) {
  const ExperimentConfig cfg;
  const auto d = generate_dataset(cfg);
  EXPECT_EQ(d.train.size(), 1800u);
  EXPECT_EQ(d.test.size(), 700u);
  EXPECT_EQ(d.test[0].timestamp, d.train[1799].timestamp + cfg.sim.tick);
  EXPECT_EQ(series_csv(d.train), series_csv(generate_dataset(cfg).train));
}

TEST(Dataset, SeedChangesData) {
  ExperimentConfig a = small_config(), b = small_config();
  b.seed = 2;
  EXPECT_NE(series_csv(generate_dataset(a).train), series_csv(generate_dataset(b).train));
}

TEST(Pipeline, ReportAndPredictions) {
  const auto cfg = small_config();
  const auto d = generate_dataset(cfg);
  const auto r = train_pipeline(cfg, d.train, d.test);
  ASSERT_EQ(r.test_predictions.size(), d.test.size());
  EXPECT_EQ(r.report.training.train_loss.size(), 3u);
  // 291 windows: 232 train, 29 validation; the booster sees all of them.
  EXPECT_EQ(r.report.training.train_windows, 232u);
  EXPECT_EQ(r.report.training.val_windows, 29u);
  EXPECT_EQ(r.report.booster_windows, 291u);

  double se_rec = 0, se_hyb = 0;
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    se_rec += std::pow(d.test[i].bandwidth - r.test_predictions[i].recurrent, 2);
    se_hyb += std::pow(d.test[i].bandwidth - r.test_predictions[i].hybrid, 2);
  }
  EXPECT_NEAR(r.report.mse_bilstm, se_rec / 80.0, 1e-9);
  EXPECT_NEAR(r.report.mse_hybrid, se_hyb / 80.0, 1e-9);

  // Prediction i reads the nine samples before test[i].
  std::vector<double> window;
  for (std::size_t k = 3; k > 0; --k) window.push_back(d.test[3 - k].bandwidth);
  for (std::size_t k = 0; k < 6; ++k) window.insert(window.begin(), d.train[d.train.size() - 1 - k].bandwidth);
  EXPECT_EQ(r.forecaster.predict(window).hybrid, r.test_predictions[3].hybrid);
}

TEST(Pipeline, ZeroEpochsIsAnError) {
  auto cfg = small_config();
  cfg.forecast.epochs = 0;
  const auto d = generate_dataset(small_config());
  EXPECT_THROW(train_pipeline(cfg, d.train, d.test), ConfigError);
}

TEST(Pipeline, Deterministic) {
  const auto cfg = small_config();
  const auto d = generate_dataset(cfg);
  const auto a = train_pipeline(cfg, d.train, d.test), b = train_pipeline(cfg, d.train, d.test);
  EXPECT_EQ(a.report.to_json().dump(), b.report.to_json().dump());
  EXPECT_EQ(a.forecaster.to_json().dump(), b.forecaster.to_json().dump());
}

struct Trained {
  ExperimentConfig cfg = small_config();
  Dataset data = generate_dataset(cfg);
  PipelineResult pipeline = train_pipeline(cfg, data.train, data.test);
  AgentResult agent = train_agent(cfg, pipeline.forecaster, data.train, data.test, 1);
};

const Trained& trained() {
  static const Trained t;
  return t;
}

TEST(Agent, TraceAndCheckpoint) {
  const auto& t = trained();
  EXPECT_EQ(t.agent.trace.size(), 400u);
  EXPECT_EQ(t.agent.checkpoint.q.num_states(), 20u);
  EXPECT_EQ(t.agent.checkpoint.q.num_actions(), 8u);
  ASSERT_TRUE(t.agent.checkpoint.model.has_value());
  EXPECT_FALSE(t.agent.checkpoint.q.is_zero());
  for (const auto& r : t.agent.trace) EXPECT_GE(r.mae, 0.0);
}

TEST(ClosedLoop, SummaryInvariants) {
  const auto& t = trained();
  const auto& c = t.agent.checkpoint;
  const auto r = run_closed_loop(t.cfg, hybrid_predictor(t.pipeline.forecaster), c.q, *c.model, 20);
  ASSERT_EQ(r.records.size(), 20u);
  EXPECT_EQ(r.summary.actions_applied, 20u);
  EXPECT_FALSE(r.summary.degenerate);
  EXPECT_GE(r.summary.accuracy, 0.0);
  EXPECT_LE(r.summary.accuracy, 1.0);
  EXPECT_GE(r.summary.mae, 0.0);
  if (r.summary.accuracy == 1.0) {
    EXPECT_EQ(r.summary.mae, 0.0);
  }
  std::size_t matches = 0;
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.match, rec.action_actual == rec.action_predicted);
    EXPECT_LT(rec.action_actual, 8u);
    EXPECT_LT(rec.action_predicted, 8u);
    matches += rec.match;
  }
  EXPECT_EQ(matches, r.summary.matches);
  const auto again = run_closed_loop(t.cfg, hybrid_predictor(t.pipeline.forecaster), c.q, *c.model, 20);
  EXPECT_EQ(loop_csv(again.records), loop_csv(r.records));
}

// A perfect predictor returns the value the live network is about to report.
// With perfect forecasts the proactive loop applies exactly the reactive
// loop's actions, so the reactive run's measurements are that oracle.
TEST(ClosedLoop, PerfectPredictorMatchesEverywhere) {
  const auto& t = trained();
  const auto& c = t.agent.checkpoint;
  const auto reactive = run_closed_loop(t.cfg, hybrid_predictor(t.pipeline.forecaster), c.q, *c.model, 20, true);
  std::size_t call = 0;
  const Predictor oracle = [&](std::span<const double>) { return reactive.records.at(call++).actual_bw; };
  const auto r = run_closed_loop(t.cfg, oracle, c.q, *c.model, 20);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(r.records[i].actual_bw, r.records[i].predicted_bw);
  EXPECT_EQ(r.summary.accuracy, 1.0);
  EXPECT_EQ(r.summary.mae, 0.0);
}

TEST(ClosedLoop, ZeroTableIsDegenerate) {
  const auto& t = trained();
  const QTable zero(20, 8);
  const auto r = run_closed_loop(t.cfg, hybrid_predictor(t.pipeline.forecaster), zero, *t.agent.checkpoint.model, 7);
  EXPECT_EQ(r.summary.accuracy, 1.0);
  EXPECT_TRUE(r.summary.degenerate);
  EXPECT_EQ(r.summary.actions_applied, 7u);
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.action_actual, 0u);
    EXPECT_EQ(rec.action_predicted, 0u);
  }
}

TEST(ClosedLoop, Errors) {
  const auto& t = trained();
  const auto& c = t.agent.checkpoint;
  auto cfg = t.cfg;
  cfg.warmup_ticks = 3;
  EXPECT_THROW(run_closed_loop(cfg, hybrid_predictor(t.pipeline.forecaster), c.q, *c.model, 5), DataError);
  EXPECT_THROW(run_closed_loop(t.cfg, hybrid_predictor(t.pipeline.forecaster), QTable(10, 8), *c.model, 5),
               DataError);
}

TEST(Convergence, SamplingAndRatio) {
  std::vector<TraceRow> trace;
  for (std::size_t e = 1; e <= 40000; ++e) trace.push_back({e, 0.0, 0.01, 37.0 / static_cast<double>(e)});
  const auto r = evaluate_convergence(trace, 2000);
  ASSERT_EQ(r.points.size(), 20u);
  EXPECT_EQ(r.points.front().first, 2000u);
  EXPECT_EQ(r.points.back().first, 40000u);
  EXPECT_DOUBLE_EQ(r.ratio, (37.0 / 40000) / (37.0 / 2000));

  for (auto& row : trace) row.mae = 4.0;
  EXPECT_EQ(evaluate_convergence(trace, 2000).ratio, 1.0);
  for (auto& row : trace) row.mae = 0.0;
  EXPECT_EQ(evaluate_convergence(trace, 2000).ratio, 1.0);
  trace.resize(1999);
  EXPECT_THROW(evaluate_convergence(trace, 2000), DataError);
}

std::map<std::string, std::string> run_all_commands(const ExperimentConfig& cfg, const fs::path& dir) {
  std::ostringstream log;
  cmd::simulate(cfg, dir, log);
  cmd::train(cfg, dir, log);
  cmd::train_agent(cfg, dir, log);
  cmd::run_loop(cfg, dir, cfg.timestamps, false, log);
  cmd::report(cfg, dir, log);
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = read_text(e.path());
  return files;
}

TEST(Commands, EndToEndByteIdentical) {
  const auto cfg = small_config();
  const auto a = run_all_commands(cfg, scratch_dir("a"));
  const auto b = run_all_commands(cfg, scratch_dir("b"));
  EXPECT_EQ(a.size(), 11u);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.at("loop.csv").substr(0, a.at("loop.csv").find('\n')),
            "time_s,actual_bw,predicted_bw,action_actual,action_predicted,achieved_bw,match");
}

TEST(Commands, MissingArtifacts) {
  std::ostringstream log;
  const auto dir = scratch_dir("empty");
  EXPECT_THROW(cmd::train(small_config(), dir, log), DataError);
  EXPECT_THROW(cmd::run_loop(small_config(), dir, 20, false, log), DataError);
  EXPECT_THROW(cmd::report(small_config(), dir, log), DataError);
}

}  // namespace
}  // namespace ztn
