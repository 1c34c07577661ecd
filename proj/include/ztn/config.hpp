#pragma once

// Experiment configuration: every tunable in one struct, loaded from a flat
// INI-style file ([section] key = value) whose sections mirror the modules.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ztn/bilstm.hpp"
#include "ztn/booster.hpp"
#include "ztn/errors.hpp"
#include "ztn/qagent.hpp"
#include "ztn/sim.hpp"

namespace ztn {

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t train_samples = 1800;
  std::size_t test_samples = 700;
  std::size_t num_bins = 20;
  double max_bw = 100.0;
  double expected_metric = 100.0;  // E_Q, the link's theoretical maximum
  std::size_t achieved_ticks = 5;  // ticks averaged per achieved-table entry
  std::size_t timestamps = 20;     // closed-loop evaluation length
  std::size_t warmup_ticks = 200;  // live-network ticks before the loop starts
  std::size_t report_every = 2000; // convergence sampling interval, episodes

  SimConfig sim{};
  BiLstmArchitecture arch{};
  ForecastTrainConfig forecast{};
  BoosterParams booster{};
  AgentParams agent{};

  /// Seeds of each stochastic stage, derived from the global seed.
  SimConfig dataset_sim() const {
    SimConfig s = sim;
    s.rng_seed = seed;
    s.duration = static_cast<double>(train_samples + test_samples) * s.tick;
    return s;
  }
  SimConfig live_sim() const {
    SimConfig s = sim;
    s.rng_seed = seed + 1;  // an independent realisation of the same network
    s.duration = static_cast<double>(warmup_ticks + timestamps) * s.tick;
    return s;
  }
  ForecastTrainConfig forecast_training() const {
    ForecastTrainConfig f = forecast;
    f.seed = seed;
    return f;
  }
  Discretizer discretizer() const { return Discretizer(num_bins, max_bw); }

  void validate() const {
    sim.validate();
    arch.validate();
    agent.validate();
    if (train_samples == 0 || test_samples == 0) throw ConfigError("sample counts must be >= 1");
    if (num_bins == 0) throw ConfigError("experiment.num_bins must be >= 1");
    if (!(max_bw > 0.0)) throw ConfigError("experiment.max_bw must be > 0");
    if (!(expected_metric > 0.0)) throw ConfigError("experiment.expected_metric must be > 0");
    if (achieved_ticks == 0) throw ConfigError("experiment.achieved_ticks must be >= 1");
    if (timestamps == 0) throw ConfigError("loop.timestamps must be >= 1");
    if (warmup_ticks < arch.window)
      throw ConfigError("loop.warmup must cover the " + std::to_string(arch.window) + "-sample window");
    if (report_every == 0) throw ConfigError("agent.report_every must be >= 1");
    if (forecast.batch_size == 0) throw ConfigError("forecaster.batch_size must be >= 1");
    if (!(booster.learning_rate > 0.0)) throw ConfigError("booster.learning_rate must be > 0");
    if (!(forecast.adam.learning_rate > 0.0)) throw ConfigError("forecaster.learning_rate must be > 0");
  }
};

namespace detail {

using boost::property_tree::ptree;

template <class T>
void read_key(const ptree& tree, const std::string& key, T& into, std::set<std::string>& known) {
  known.insert(key);
  const auto node = tree.get_optional<std::string>(key);
  if (!node) return;
  std::istringstream in(*node);
  T value{};
  in >> value;
  if (in.fail() || !(in >> std::ws).eof()) throw ConfigError("bad value for " + key + ": '" + *node + "'");
  into = value;
}

}  // namespace detail

/// Applies the keys present in an INI document on top of `cfg`. Unknown keys
/// are rejected so typos surface instead of silently using defaults.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig cfg = {}) {
  detail::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  std::set<std::string> known;
  auto key = [&](const std::string& k, auto& into) { detail::read_key(tree, k, into, known); };

  key("experiment.seed", cfg.seed);
  key("experiment.train_samples", cfg.train_samples);
  key("experiment.test_samples", cfg.test_samples);
  key("experiment.num_bins", cfg.num_bins);
  key("experiment.max_bw", cfg.max_bw);
  key("experiment.expected_metric", cfg.expected_metric);

  auto& s = cfg.sim;
  key("sim.capacity", s.capacity);
  key("sim.ues", s.num_ues_max);
  key("sim.lambda", s.lambda);
  key("sim.tick", s.tick);
  key("sim.mean_holding_ticks", s.mean_holding_ticks);
  key("sim.session_ramp_ticks", s.session_ramp_ticks);
  key("sim.initial_ues", s.initial_ues);
  key("sim.congestion_period", s.congestion_period);
  key("sim.congestion_ramp", s.congestion_ramp);
  key("sim.gr_multiplier", s.gr_multiplier);
  key("sim.ebs_seconds", s.ebs_seconds);
  key("sim.achieved_ticks", cfg.achieved_ticks);
  // One congestion window per period, described by three keys.
  if (s.congestion.empty()) s.congestion.push_back({});
  key("sim.congestion_start", s.congestion[0].start);
  key("sim.congestion_end", s.congestion[0].end);
  key("sim.congestion_load", s.congestion[0].extra_load);
  const char* app_keys[kNumApps] = {"mmtc", "embb", "urllc"};
  for (std::size_t i = 0; i < kNumApps; ++i) {
    const std::string p = std::string("sim.") + app_keys[i];
    key(p + "_demand", s.apps[i].per_ue_demand);
    key(p + "_provisioned", s.apps[i].provisioned_rate);
    key(p + "_background", s.background_load[i]);
  }

  key("forecaster.window", cfg.arch.window);
  key("forecaster.hidden", cfg.arch.hidden);
  key("forecaster.layers", cfg.arch.layers);
  key("forecaster.dense_hidden", cfg.arch.dense_hidden);
  key("forecaster.dropout", cfg.arch.dropout);
  key("forecaster.epochs", cfg.forecast.epochs);
  key("forecaster.batch_size", cfg.forecast.batch_size);
  key("forecaster.learning_rate", cfg.forecast.adam.learning_rate);
  key("forecaster.train_fraction", cfg.forecast.train_fraction);
  key("forecaster.val_fraction", cfg.forecast.val_fraction);

  key("booster.n_estimators", cfg.booster.n_estimators);
  key("booster.learning_rate", cfg.booster.learning_rate);
  key("booster.max_depth", cfg.booster.max_depth);

  key("agent.alpha", cfg.agent.alpha);
  key("agent.gamma", cfg.agent.gamma);
  key("agent.epsilon_start", cfg.agent.epsilon_start);
  key("agent.epsilon_decay", cfg.agent.epsilon_decay);
  key("agent.epsilon_end", cfg.agent.epsilon_end);
  key("agent.episodes", cfg.agent.episodes);
  key("agent.report_every", cfg.report_every);

  key("loop.timestamps", cfg.timestamps);
  key("loop.warmup", cfg.warmup_ticks);

  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("config key outside a section: " + section);
    for (const auto& [name, _] : body)
      if (!known.count(section + "." + name)) throw ConfigError("unknown config key: " + section + "." + name);
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in);
}

/// Writes the configuration in the format parse_config reads.
inline void write_config(std::ostream& out, const ExperimentConfig& c) {
  const auto& s = c.sim;
  const auto& w = s.congestion.empty() ? CongestionWindow{} : s.congestion[0];
  out << "[experiment]\n"
      << "seed = " << c.seed << "\ntrain_samples = " << c.train_samples << "\ntest_samples = " << c.test_samples
      << "\nnum_bins = " << c.num_bins << "\nmax_bw = " << c.max_bw << "\nexpected_metric = " << c.expected_metric
      << "\n\n[sim]\n"
      << "capacity = " << s.capacity << "\nues = " << s.num_ues_max << "\nlambda = " << s.lambda
      << "\ntick = " << s.tick << "\nmean_holding_ticks = " << s.mean_holding_ticks
      << "\nsession_ramp_ticks = " << s.session_ramp_ticks << "\ninitial_ues = " << s.initial_ues
      << "\ncongestion_start = " << w.start << "\ncongestion_end = " << w.end
      << "\ncongestion_load = " << w.extra_load << "\ncongestion_period = " << s.congestion_period
      << "\ncongestion_ramp = " << s.congestion_ramp << "\ngr_multiplier = " << s.gr_multiplier
      << "\nebs_seconds = " << s.ebs_seconds << "\nachieved_ticks = " << c.achieved_ticks << "\n";
  const char* app_keys[kNumApps] = {"mmtc", "embb", "urllc"};
  for (std::size_t i = 0; i < kNumApps; ++i)
    out << app_keys[i] << "_demand = " << s.apps[i].per_ue_demand << "\n"
        << app_keys[i] << "_provisioned = " << s.apps[i].provisioned_rate << "\n"
        << app_keys[i] << "_background = " << s.background_load[i] << "\n";
  out << "\n[forecaster]\n"
      << "window = " << c.arch.window << "\nhidden = " << c.arch.hidden << "\nlayers = " << c.arch.layers
      << "\ndense_hidden = " << c.arch.dense_hidden << "\ndropout = " << c.arch.dropout
      << "\nepochs = " << c.forecast.epochs << "\nbatch_size = " << c.forecast.batch_size
      << "\nlearning_rate = " << c.forecast.adam.learning_rate << "\ntrain_fraction = " << c.forecast.train_fraction
      << "\nval_fraction = " << c.forecast.val_fraction << "\n\n[booster]\n"
      << "n_estimators = " << c.booster.n_estimators << "\nlearning_rate = " << c.booster.learning_rate
      << "\nmax_depth = " << c.booster.max_depth << "\n\n[agent]\n"
      << "alpha = " << c.agent.alpha << "\ngamma = " << c.agent.gamma << "\nepsilon_start = " << c.agent.epsilon_start
      << "\nepsilon_decay = " << c.agent.epsilon_decay << "\nepsilon_end = " << c.agent.epsilon_end
      << "\nepisodes = " << c.agent.episodes << "\nreport_every = " << c.report_every << "\n\n[loop]\n"
      << "timestamps = " << c.timestamps << "\nwarmup = " << c.warmup_ticks << "\n";
}

}  // namespace ztn
