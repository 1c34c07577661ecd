#pragma once

// Tabular Q-learning over a discrete action space: epsilon-greedy selection,
// squared-shortfall reward, Bellman update, per-episode epsilon decay, and a
// simulator-derived achieved-bandwidth table that grounds the reward.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ztn/core.hpp"
#include "ztn/errors.hpp"
#include "ztn/random.hpp"
#include "ztn/sim.hpp"

namespace ztn {

struct AgentParams {
  double alpha = 0.1;
  double gamma = 0.9;
  double epsilon_start = 1.0;
  double epsilon_end = 0.01;
  double epsilon_decay = 0.995;
  std::size_t episodes = 40000;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("agent.alpha must be in (0, 1]");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("agent.gamma must be in [0, 1)");
    if (!(epsilon_end > 0.0 && epsilon_end <= epsilon_start && epsilon_start <= 1.0))
      throw ConfigError("agent epsilons need 0 < epsilon_end <= epsilon_start <= 1");
    if (!(epsilon_decay > 0.0 && epsilon_decay < 1.0)) throw ConfigError("agent.epsilon_decay must be in (0, 1)");
  }
};

class QTable {
 public:
  QTable(std::size_t states, std::size_t actions) : states_(states), actions_(actions), values_(states * actions, 0.0) {
    if (states == 0 || actions == 0) throw ConfigError("Q-table needs at least one state and one action");
  }

  std::size_t num_states() const noexcept { return states_; }
  std::size_t num_actions() const noexcept { return actions_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double at(std::size_t s, std::size_t a) const { return values_[index(s, a)]; }
  void set(std::size_t s, std::size_t a, double v) {
    if (!std::isfinite(v)) throw DivergenceError("non-finite Q-value for state " + std::to_string(s));
    values_[index(s, a)] = v;
  }
  std::span<const double> row(std::size_t s) const {
    check_state(s);
    return {values_.data() + s * actions_, actions_};
  }

  /// True while no entry has been written away from zero.
  bool is_zero() const {
    for (double v : values_)
      if (v != 0.0) return false;
    return true;
  }

 private:
  void check_state(std::size_t s) const {
    if (s >= states_) throw DataError("state " + std::to_string(s) + " outside Q-table");
  }
  std::size_t index(std::size_t s, std::size_t a) const {
    check_state(s);
    if (a >= actions_) throw DataError("action " + std::to_string(a) + " outside Q-table");
    return s * actions_ + a;
  }

  std::size_t states_, actions_;
  std::vector<double> values_;
};

/// Negative squared shortfall from the expected metric; 0 only on a match.
inline double reward(double expected, double obtained) {
  const double d = expected - obtained;
  return -(d * d);
}

/// Argmax of row s; ties go to the lowest index.
inline std::size_t best_action(const QTable& q, std::size_t s) {
  const auto r = q.row(s);
  std::size_t best = 0;
  for (std::size_t a = 1; a < r.size(); ++a)
    if (r[a] > r[best]) best = a;
  return best;
}

inline std::size_t select_action(const QTable& q, std::size_t s, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must be in [0, 1]");
  if (rng.uniform() < epsilon) return rng.index(q.num_actions());
  return best_action(q, s);
}

/// Bellman step toward r + gamma * max_a' Q(s', a'). Without a next state the
/// target is r alone (end of the replayed series).
inline void update(QTable& q, std::size_t s, std::size_t a, double r, std::optional<std::size_t> s_next, double alpha,
                   double gamma) {
  if (!std::isfinite(r)) throw DataError("non-finite reward");
  double future = 0.0;
  if (s_next) future = q.at(*s_next, best_action(q, *s_next));
  const double old = q.at(s, a);
  q.set(s, a, old + alpha * (r + gamma * future - old));
}

inline double decay_epsilon(double start, double decay, std::size_t episode, double end) {
  return std::max(start * std::pow(decay, static_cast<double>(episode)), end);
}

// ---------------------------------------------------------------------------
// Reward model

/// Achieved bandwidth O(s, a) for every state/action pair plus the fixed
/// expected metric.
class AchievedTable {
 public:
  AchievedTable(double expected, std::size_t states, std::size_t actions, std::vector<double> values)
      : expected_(expected), states_(states), actions_(actions), values_(std::move(values)) {
    if (!(expected > 0.0) || !std::isfinite(expected)) throw ConfigError("expected metric must be > 0");
    if (states == 0 || actions == 0 || values_.size() != states * actions)
      throw DataError("achieved table shape mismatch");
    for (double v : values_)
      if (!std::isfinite(v)) throw DataError("non-finite achieved bandwidth");
  }

  double expected() const noexcept { return expected_; }
  std::size_t num_states() const noexcept { return states_; }
  std::size_t num_actions() const noexcept { return actions_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double achieved(std::size_t s, std::size_t a) const {
    if (s >= states_ || a >= actions_) throw DataError("achieved table index out of range");
    return values_[s * actions_ + a];
  }
  double reward(std::size_t s, std::size_t a) const { return ztn::reward(expected_, achieved(s, a)); }

  /// Highest-reward action for s, lowest index on ties.
  std::size_t optimal_action(std::size_t s) const {
    std::size_t best = 0;
    for (std::size_t a = 1; a < actions_; ++a)
      if (reward(s, a) > reward(s, best)) best = a;
    return best;
  }

 private:
  double expected_;
  std::size_t states_, actions_;
  std::vector<double> values_;
};

/// Share of a bin's load carried by each class: proportional to per-UE
/// demand, i.e. an equal number of sessions per class.
inline std::array<double, kNumApps> demand_shares(const SimConfig& cfg) {
  double total = 0.0;
  for (const auto& a : cfg.apps) total += a.per_ue_demand;
  if (!(total > 0.0)) throw ConfigError("at least one application class must have demand");
  std::array<double, kNumApps> out{};
  for (std::size_t i = 0; i < kNumApps; ++i) out[i] = cfg.apps[i].per_ue_demand / total;
  return out;
}

/// Builds O(s, a): for each state a frozen simulator (no arrivals, no
/// congestion) carries the bin-centre load split by demand share, action a
/// is applied, and observed bandwidth is averaged over `ticks` steps.
inline AchievedTable build_achieved_table(const SimConfig& base, const ActionSpace& space, const Discretizer& bins,
                                          double expected, std::size_t ticks = 5) {
  if (ticks == 0) throw ConfigError("achieved table needs at least one tick");
  const auto shares = demand_shares(base);
  std::vector<double> values;
  values.reserve(bins.num_bins() * space.cardinality());
  for (std::size_t s = 0; s < bins.num_bins(); ++s) {
    SimConfig cfg = base;
    cfg.lambda = 0.0;
    cfg.initial_ues = 0;
    cfg.congestion.clear();
    for (std::size_t i = 0; i < kNumApps; ++i) cfg.background_load[i] = bins.center(s) * shares[i];
    for (std::size_t a = 0; a < space.cardinality(); ++a) {
      Simulator sim(cfg);
      sim.apply_action(space, a);
      double sum = 0.0;
      for (std::size_t k = 0; k < ticks; ++k) sum += sim.step().observed_bw;
      values.push_back(sum / static_cast<double>(ticks));
    }
  }
  return AchievedTable(expected, bins.num_bins(), space.cardinality(), std::move(values));
}

/// Mean |O(s_i, greedy(s_i)) - O(s_i, greedy(p_i))| over paired states: the
/// bandwidth cost of acting on p_i instead of s_i.
inline double action_mae(const AchievedTable& model, const QTable& q, std::span<const std::size_t> actual,
                         std::span<const std::size_t> predicted) {
  if (actual.size() != predicted.size()) throw DataError("paired state sequences differ in length");
  if (actual.empty()) throw DataError("insufficient data: no states to compare");
  double acc = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i)
    acc += std::abs(model.achieved(actual[i], best_action(q, actual[i])) -
                    model.achieved(actual[i], best_action(q, predicted[i])));
  return acc / static_cast<double>(actual.size());
}

// ---------------------------------------------------------------------------
// Training

struct TraceRow {
  std::size_t episode = 0;
  double total_reward = 0.0;
  double epsilon = 0.0;  // exploration rate used during the episode
  double mae = 0.0;
};

using MaeProbe = std::function<double(const QTable&)>;

/// Replays `states` in order once per episode. Each step picks an
/// epsilon-greedy action, scores it with the reward model and updates toward
/// the next state in the series, wrapping to the head at the end. Epsilon
/// decays after every episode.
inline std::vector<TraceRow> train(QTable& q, std::span<const std::size_t> states, const AchievedTable& model,
                                   const AgentParams& p, std::uint64_t seed, const MaeProbe& probe = {}) {
  p.validate();
  if (states.empty()) throw DataError("insufficient data: no training states");
  if (q.num_states() != model.num_states() || q.num_actions() != model.num_actions())
    throw DataError("Q-table and reward model dimensions differ");
  Rng rng(seed);
  std::vector<TraceRow> trace;
  trace.reserve(p.episodes);
  double epsilon = p.epsilon_start;
  for (std::size_t e = 1; e <= p.episodes; ++e) {
    double total = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
      const std::size_t s = states[i];
      const std::size_t a = select_action(q, s, epsilon, rng);
      const double r = model.reward(s, a);
      total += r;
      // The replay restarts at the head of the series, so the last state
      // bootstraps from the first rather than from a zero terminal value.
      const std::size_t next = states[(i + 1) % states.size()];
      update(q, s, a, r, next, p.alpha, p.gamma);
    }
    trace.push_back({e, total, epsilon, probe ? probe(q) : 0.0});
    epsilon = decay_epsilon(p.epsilon_start, p.epsilon_decay, e, p.epsilon_end);
  }
  return trace;
}

}  // namespace ztn
