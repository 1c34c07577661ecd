#pragma once

// File-level commands behind the CLI: each reads and writes fixed file names
// inside one artifact directory.
//
//   simulate     -> train.csv, test.csv
//   train        -> forecaster.json, train_report.json, predictions.csv
//   train-agent  -> qtable.json, trace.csv
//   run-loop     -> loop.csv, loop_summary.json
//   report       -> report.txt, report.json (from whatever exists)

#include <filesystem>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "ztn/config.hpp"
#include "ztn/io.hpp"
#include "ztn/loop.hpp"

namespace ztn::cmd {

namespace fs = std::filesystem;

inline void simulate(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& log) {
  const auto data = generate_dataset(cfg);
  write_series_csv(dir / "train.csv", data.train);
  write_series_csv(dir / "test.csv", data.test);
  log << "wrote " << data.train.size() << " training and " << data.test.size() << " test samples to " << dir.string()
      << "\n";
}

inline void train(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& log) {
  const auto train = read_series_csv(dir / "train.csv");
  const auto test = read_series_csv(dir / "test.csv");
  const auto result = train_pipeline(cfg, train, test);
  save_forecaster(dir / "forecaster.json", result.forecaster);
  save_json(dir / "train_report.json", result.report.to_json());
  std::string csv = "time_s,actual_bw,bilstm_bw,hybrid_bw\n";
  for (std::size_t i = 0; i < test.size(); ++i)
    csv += fmt(test[i].timestamp, 3) + "," + fmt(test[i].bandwidth) + "," + fmt(result.test_predictions[i].recurrent) +
           "," + fmt(result.test_predictions[i].hybrid) + "\n";
  write_text(dir / "predictions.csv", csv);
  log << "test MSE: bilstm " << fmt(result.report.mse_bilstm, 4) << ", hybrid " << fmt(result.report.mse_hybrid, 4)
      << "\n";
}

inline void train_agent(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& log) {
  const auto f = load_forecaster(dir / "forecaster.json");
  if (f.window() != cfg.arch.window) throw DataError("forecaster checkpoint window differs from the configuration");
  const auto result =
      ztn::train_agent(cfg, f, read_series_csv(dir / "train.csv"), read_series_csv(dir / "test.csv"), cfg.seed);
  save_qtable(dir / "qtable.json", result.checkpoint);
  write_text(dir / "trace.csv", trace_csv(result.trace));
  log << "trained " << result.trace.size() << " episodes, final MAE " << fmt(result.trace.back().mae, 4) << " Mbps\n";
}

inline LoopSummary run_loop(const ExperimentConfig& cfg, const fs::path& dir, std::size_t timestamps, bool reactive,
                            std::ostream& log) {
  const auto f = load_forecaster(dir / "forecaster.json");
  const auto c = load_qtable(dir / "qtable.json");
  if (!c.model) throw DataError("Q-table checkpoint carries no achieved-bandwidth table");
  if (c.num_bins != cfg.num_bins || c.max_bw != cfg.max_bw)
    throw DataError("Q-table checkpoint bins differ from the configuration");
  const auto result = run_closed_loop(cfg, hybrid_predictor(f), c.q, *c.model, timestamps, reactive);
  write_text(dir / "loop.csv", loop_csv(result.records));
  save_json(dir / "loop_summary.json", result.summary.to_json());
  log << "accuracy " << fmt(result.summary.accuracy, 3) << " (" << result.summary.matches << "/"
      << result.summary.timestamps << "), MAE " << fmt(result.summary.mae, 4) << " Mbps"
      << (result.summary.degenerate ? " [degenerate: untrained Q-table]" : "") << "\n";
  return result.summary;
}

/// Collects the metrics of every stage that has run into one text and one
/// JSON report.
inline void report(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& log) {
  nlohmann::json doc = nlohmann::json::object();
  std::string text;
  if (fs::exists(dir / "train_report.json")) {
    const auto r = load_json(dir / "train_report.json");
    doc["forecaster"] = {{"mse_bilstm", r.at("mse_bilstm")}, {"mse_hybrid", r.at("mse_hybrid")}};
    text += "forecaster (test MSE, Mbps^2)\n  bilstm  " + fmt(r.at("mse_bilstm").get<double>(), 4) + "\n  hybrid  " +
            fmt(r.at("mse_hybrid").get<double>(), 4) + "\n";
  }
  if (fs::exists(dir / "trace.csv")) {
    const auto conv = evaluate_convergence(read_trace_csv(dir / "trace.csv"), cfg.report_every);
    doc["convergence"] = conv.to_json();
    text += "agent MAE by episode (Mbps)\n";
    for (const auto& [e, m] : conv.points) text += "  " + std::to_string(e) + "  " + fmt(m, 4) + "\n";
    text += "  final/initial  " + (std::isfinite(conv.ratio) ? fmt(conv.ratio, 4) : std::string("inf")) + "\n";
  }
  if (fs::exists(dir / "loop_summary.json")) {
    const auto s = load_json(dir / "loop_summary.json");
    doc["loop"] = s;
    text += "closed loop (" + s.at("mode").get<std::string>() + ")\n  accuracy  " +
            fmt(s.at("accuracy").get<double>(), 3) + " (" + std::to_string(s.at("matches").get<std::size_t>()) + "/" +
            std::to_string(s.at("timestamps").get<std::size_t>()) + ")\n  MAE  " + fmt(s.at("mae").get<double>(), 4) +
            " Mbps\n";
    if (s.at("degenerate").get<bool>()) text += "  degenerate: untrained Q-table\n";
  }
  if (doc.empty()) throw DataError("nothing to report in " + dir.string());
  write_text(dir / "report.txt", text);
  save_json(dir / "report.json", doc);
  log << text;
}

}  // namespace ztn::cmd
