// ztn: dataset generation, forecaster and agent training, closed-loop runs.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ztn/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop congestion control with a hybrid forecaster and a Q-learning agent"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::size_t timestamps = 0;
  bool reactive = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "INI configuration file (defaults apply when omitted)")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "global seed, overrides experiment.seed");
    sub->add_option("--out", out_dir, "artifact directory")->capture_default_str();
    return sub;
  };
  auto* simulate = common(app.add_subcommand("simulate", "generate the training and test datasets"));
  auto* train = common(app.add_subcommand("train", "train the BiLSTM and the residual booster"));
  auto* train_agent = common(app.add_subcommand("train-agent", "train the Q-learning agent on forecast states"));
  auto* run_loop = common(app.add_subcommand("run-loop", "run the closed loop against a live simulator"));
  run_loop->add_option("--timestamps", timestamps, "loop length (default: loop.timestamps)");
  run_loop->add_flag("--reactive", reactive, "apply the measured state's action instead of the forecast's");
  auto* report = common(app.add_subcommand("report", "summarise the artifacts in --out"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ztn::ExitCode::kInvalidConfig);
  }

  try {
    ztn::ExperimentConfig cfg = config_path.empty() ? ztn::ExperimentConfig{} : ztn::load_config(config_path);
    if (seed) cfg.seed = *seed;
    cfg.validate();
    if (simulate->parsed()) ztn::cmd::simulate(cfg, out_dir, std::cout);
    if (train->parsed()) ztn::cmd::train(cfg, out_dir, std::cout);
    if (train_agent->parsed()) ztn::cmd::train_agent(cfg, out_dir, std::cout);
    if (run_loop->parsed()) ztn::cmd::run_loop(cfg, out_dir, timestamps ? timestamps : cfg.timestamps, reactive, std::cout);
    if (report->parsed()) ztn::cmd::report(cfg, out_dir, std::cout);
  } catch (const ztn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ztn::ExitCode::kDataError);
  }
  return 0;
}
