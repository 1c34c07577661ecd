#pragma once

// Domain types shared by the simulator, the forecaster and the agent:
// bandwidth observations, discretized network states, and the action space
// built from traffic-management configuration sets.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ztn/errors.hpp"

namespace ztn {

// ---------------------------------------------------------------------------
// Observations

struct QosObservation {
  double timestamp = 0.0;  // seconds
  double bandwidth = 0.0;  // Mbps
};

/// Ordered bandwidth samples. Timestamps strictly increase, bandwidths are
/// finite and non-negative.
class TimeSeries {
 public:
  TimeSeries() = default;
  explicit TimeSeries(std::vector<QosObservation> samples) : samples_(std::move(samples)) {
    for (std::size_t i = 0; i < samples_.size(); ++i) check(i);
  }

  void push_back(QosObservation obs) {
    samples_.push_back(obs);
    check(samples_.size() - 1);
  }

  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  const QosObservation& operator[](std::size_t i) const { return samples_[i]; }
  auto begin() const noexcept { return samples_.begin(); }
  auto end() const noexcept { return samples_.end(); }
  const std::vector<QosObservation>& samples() const noexcept { return samples_; }

  std::vector<double> bandwidths() const {
    std::vector<double> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.bandwidth);
    return out;
  }

  /// Samples [first, first + count).
  TimeSeries slice(std::size_t first, std::size_t count) const {
    if (first + count > samples_.size()) throw DataError("time series slice out of range");
    return TimeSeries(std::vector<QosObservation>(samples_.begin() + static_cast<std::ptrdiff_t>(first),
                                                  samples_.begin() + static_cast<std::ptrdiff_t>(first + count)));
  }

 private:
  void check(std::size_t i) const {
    const auto& s = samples_[i];
    if (!std::isfinite(s.bandwidth) || s.bandwidth < 0.0)
      throw DataError("bandwidth must be finite and non-negative at sample " + std::to_string(i));
    if (!std::isfinite(s.timestamp) || s.timestamp < 0.0)
      throw DataError("timestamp must be finite and non-negative at sample " + std::to_string(i));
    if (i > 0 && !(s.timestamp > samples_[i - 1].timestamp))
      throw DataError("timestamps must strictly increase at sample " + std::to_string(i));
  }

  std::vector<QosObservation> samples_;
};

// ---------------------------------------------------------------------------
// States

struct NetworkState {
  std::size_t bin_index = 0;
  friend bool operator==(NetworkState, NetworkState) = default;
};

/// Uniform-width, left-closed bins over [0, max_bw]. Values at or above
/// max_bw land in the top bin.
class Discretizer {
 public:
  Discretizer(std::size_t num_bins, double max_bw) : num_bins_(num_bins), max_bw_(max_bw) {
    if (num_bins_ < 1) throw ConfigError("num_bins must be >= 1");
    if (!(max_bw_ > 0.0) || !std::isfinite(max_bw_)) throw ConfigError("max_bw must be positive and finite");
  }

  std::size_t num_bins() const noexcept { return num_bins_; }
  double max_bw() const noexcept { return max_bw_; }
  double bin_width() const noexcept { return max_bw_ / static_cast<double>(num_bins_); }

  NetworkState operator()(double bandwidth) const {
    if (!std::isfinite(bandwidth)) throw DataError("cannot discretize a non-finite bandwidth");
    if (bandwidth < 0.0) throw DataError("cannot discretize a negative bandwidth");
    const double idx = std::floor(bandwidth / bin_width());
    if (idx >= static_cast<double>(num_bins_ - 1)) return {num_bins_ - 1};
    return {static_cast<std::size_t>(idx)};
  }

  double lower_edge(std::size_t bin) const { return static_cast<double>(bin) * bin_width(); }
  double center(std::size_t bin) const { return (static_cast<double>(bin) + 0.5) * bin_width(); }

 private:
  std::size_t num_bins_;
  double max_bw_;
};

inline NetworkState discretize(double bandwidth, std::size_t num_bins, double max_bw) {
  return Discretizer(num_bins, max_bw)(bandwidth);
}

/// Row-major composition of per-parameter bins into a single state index,
/// for states built from more than one QoS parameter.
inline NetworkState compose_state(std::span<const std::size_t> bins, std::span<const std::size_t> bin_counts) {
  if (bins.size() != bin_counts.size() || bins.empty()) throw DataError("state tuple arity mismatch");
  std::size_t index = 0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (bins[i] >= bin_counts[i]) throw DataError("state component out of range");
    index = index * bin_counts[i] + bins[i];
  }
  return {index};
}

// ---------------------------------------------------------------------------
// Traffic-management settings

enum class AppKind : std::uint8_t { kMmtc = 0, kEmbb = 1, kUrllc = 2 };
inline constexpr std::size_t kNumApps = 3;

enum class Priority : std::uint8_t { kLow = 0, kMedium = 1, kHigh = 2 };
enum class QosModel : std::uint8_t { kBestEffort = 0, kRealTimePolling = 1, kUnsolicitedGrant = 2 };
struct GenerationRate {
  friend bool operator==(GenerationRate, GenerationRate) = default;
};

/// One application's assignment within an action: a generation-rate change,
/// a priority level, or a QoS model.
using AppSetting = std::variant<GenerationRate, Priority, QosModel>;

/// Per-application assignment, indexed by AppKind (App1 = mMTC, App2 = eMBB,
/// App3 = URLLC).
using ConfigTuple = std::array<AppSetting, kNumApps>;

inline std::string_view app_name(AppKind k) {
  switch (k) {
    case AppKind::kMmtc: return "mMTC";
    case AppKind::kEmbb: return "eMBB";
    case AppKind::kUrllc: return "URLLC";
  }
  return "?";
}

inline std::string setting_label(const AppSetting& s) {
  struct {
    std::string operator()(GenerationRate) const { return "GR"; }
    std::string operator()(Priority p) const {
      switch (p) {
        case Priority::kLow: return "L";
        case Priority::kMedium: return "M";
        case Priority::kHigh: return "H";
      }
      return "?";
    }
    std::string operator()(QosModel q) const {
      switch (q) {
        case QosModel::kBestEffort: return "BE";
        case QosModel::kRealTimePolling: return "RTPS";
        case QosModel::kUnsolicitedGrant: return "UGS";
      }
      return "?";
    }
  } visitor;
  return std::visit(visitor, s);
}

inline AppSetting parse_setting(std::string_view label) {
  if (label == "GR") return GenerationRate{};
  if (label == "L") return Priority::kLow;
  if (label == "M") return Priority::kMedium;
  if (label == "H") return Priority::kHigh;
  if (label == "BE") return QosModel::kBestEffort;
  if (label == "RTPS") return QosModel::kRealTimePolling;
  if (label == "UGS") return QosModel::kUnsolicitedGrant;
  throw ConfigError("unknown traffic-management setting '" + std::string(label) + "'");
}

// ---------------------------------------------------------------------------
// Action space

/// A named set of configuration choices, e.g. priority = {L, M, H}.
struct ConfigSet {
  std::string name;
  std::vector<std::string> elements;

  ConfigSet(std::string n, std::vector<std::string> e) : name(std::move(n)), elements(std::move(e)) {
    if (elements.empty()) throw ConfigError("config set '" + name + "' is empty");
    std::unordered_set<std::string> seen;
    for (const auto& el : elements)
      if (!seen.insert(el).second) throw ConfigError("config set '" + name + "' repeats element '" + el + "'");
  }

  bool contains(std::string_view el) const {
    for (const auto& e : elements)
      if (e == el) return true;
    return false;
  }
};

struct Action {
  std::string name;                 // "a1", "a2", ...
  std::vector<std::string> labels;  // one element per config set
};

/// Ordered, densely indexed actions over a list of configuration sets.
class ActionSpace {
 public:
  ActionSpace(std::vector<ConfigSet> configs, std::vector<Action> actions)
      : configs_(std::move(configs)), actions_(std::move(actions)) {
    if (configs_.empty()) throw ConfigError("action space needs at least one config set");
    if (actions_.empty()) throw ConfigError("action space needs at least one action");
    for (const auto& a : actions_) {
      if (a.labels.size() != configs_.size())
        throw ConfigError("action " + a.name + " does not assign every config set");
      for (std::size_t i = 0; i < configs_.size(); ++i)
        if (!configs_[i].contains(a.labels[i]))
          throw ConfigError("action " + a.name + " uses '" + a.labels[i] + "' outside set '" + configs_[i].name + "'");
    }
  }

  std::size_t cardinality() const noexcept { return actions_.size(); }
  const std::vector<ConfigSet>& configs() const noexcept { return configs_; }
  const std::vector<Action>& actions() const noexcept { return actions_; }

  const Action& at(std::size_t index) const {
    if (index >= actions_.size())
      throw ConfigError("action index " + std::to_string(index) + " outside action space of size " +
                        std::to_string(actions_.size()));
    return actions_[index];
  }

  /// Typed per-application view; requires one config set per application.
  ConfigTuple tuple(std::size_t index) const {
    const auto& a = at(index);
    if (a.labels.size() != kNumApps) throw ConfigError("action " + a.name + " is not a per-application tuple");
    return {parse_setting(a.labels[0]), parse_setting(a.labels[1]), parse_setting(a.labels[2])};
  }

 private:
  std::vector<ConfigSet> configs_;
  std::vector<Action> actions_;
};

/// Cartesian product of the sets, lexicographic in set-element indices with
/// the last set varying fastest.
inline ActionSpace build_full_action_space(std::vector<ConfigSet> configs) {
  if (configs.empty()) throw ConfigError("action space needs at least one config set");
  std::size_t total = 1;
  for (const auto& c : configs) total *= c.elements.size();

  std::vector<Action> actions;
  actions.reserve(total);
  std::vector<std::size_t> odometer(configs.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    Action a{"a" + std::to_string(n + 1), {}};
    for (std::size_t i = 0; i < configs.size(); ++i) a.labels.push_back(configs[i].elements[odometer[i]]);
    actions.push_back(std::move(a));
    for (std::size_t i = configs.size(); i-- > 0;) {
      if (++odometer[i] < configs[i].elements.size()) break;
      odometer[i] = 0;
    }
  }
  return ActionSpace(std::move(configs), std::move(actions));
}

/// Labels each application may take: GR plus every priority and QoS model.
inline std::vector<std::string> app_setting_labels() { return {"GR", "L", "M", "H", "BE", "RTPS", "UGS"}; }

/// The eight curated congestion-mitigation actions over App1/App2/App3.
inline ActionSpace build_default_action_space() {
  std::vector<ConfigSet> configs{{"App1", app_setting_labels()},
                                 {"App2", app_setting_labels()},
                                 {"App3", app_setting_labels()}};
  std::vector<Action> actions{
      {"a1", {"GR", "L", "RTPS"}}, {"a2", {"GR", "RTPS", "M"}}, {"a3", {"M", "BE", "GR"}},
      {"a4", {"L", "RTPS", "GR"}}, {"a5", {"RTPS", "M", "GR"}}, {"a6", {"M", "GR", "BE"}},
      {"a7", {"H", "UGS", "GR"}},  {"a8", {"UGS", "GR", "H"}},
  };
  return ActionSpace(std::move(configs), std::move(actions));
}

inline nlohmann::json to_json(const ActionSpace& space) {
  nlohmann::json doc;
  doc["cardinality"] = space.cardinality();
  auto& configs = doc["configs"] = nlohmann::json::array();
  for (const auto& c : space.configs()) configs.push_back({{"name", c.name}, {"elements", c.elements}});
  auto& actions = doc["actions"] = nlohmann::json::array();
  for (const auto& a : space.actions()) {
    nlohmann::json entry{{"name", a.name}};
    for (std::size_t i = 0; i < a.labels.size(); ++i) entry[space.configs()[i].name] = a.labels[i];
    actions.push_back(std::move(entry));
  }
  return doc;
}

inline ActionSpace action_space_from_json(const nlohmann::json& doc) {
  try {
    std::vector<ConfigSet> configs;
    for (const auto& c : doc.at("configs"))
      configs.emplace_back(c.at("name").get<std::string>(), c.at("elements").get<std::vector<std::string>>());
    std::vector<Action> actions;
    for (const auto& a : doc.at("actions")) {
      Action act{a.at("name").get<std::string>(), {}};
      for (const auto& c : configs) act.labels.push_back(a.at(c.name).get<std::string>());
      actions.push_back(std::move(act));
    }
    return ActionSpace(std::move(configs), std::move(actions));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed action space document: ") + e.what());
  }
}

}  // namespace ztn
