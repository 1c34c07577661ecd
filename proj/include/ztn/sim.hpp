#pragma once

// Discrete-time single-cell congestion simulator.
//
// UEs arrive as a Poisson process and hold for an exponential time. Each UE
// belongs to one application class and offers a fixed rate. Per tick, the
// per-class offered load goes through a CIR/EIR/EBS shaper whose stance
// follows the class's QoS model, and a two-pass priority scheduler (committed
// traffic first, then excess traffic, highest priority first) fits everything
// into the link capacity. What the link carries is the observed bandwidth.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ztn/core.hpp"
#include "ztn/errors.hpp"
#include "ztn/random.hpp"

namespace ztn {

struct AppClass {
  AppKind kind;
  Priority default_priority;
  QosModel default_qos;
  double per_ue_demand;    // Mbps offered by one UE
  double provisioned_rate; // Mbps reference rate for the RTPS/BE shaper stances
};

/// Application classes with the priority/QoS pairing mMTC-L-BE,
/// eMBB-M-RTPS, URLLC-H-UGS. The narrow classes are provisioned for a single
/// session, so moving them to a BE/RTPS stance costs throughput well below
/// link saturation.
inline std::array<AppClass, kNumApps> default_app_classes() {
  return {{
      {AppKind::kMmtc, Priority::kLow, QosModel::kBestEffort, 0.5, 0.5},
      {AppKind::kEmbb, Priority::kMedium, QosModel::kRealTimePolling, 5.0, 60.0},
      {AppKind::kUrllc, Priority::kHigh, QosModel::kUnsolicitedGrant, 1.0, 1.0},
  }};
}

struct ShaperConfig {
  double cir = 0.0;  // Mbps, committed rate
  double eir = 0.0;  // Mbps, excess rate
  double ebs = 0.0;  // megabits, burst buffer depth
};

struct ShapeResult {
  double conformant = 0.0;     // Mbps
  double excess_served = 0.0;  // Mbps
  double buffered_out = 0.0;   // megabits
  double dropped = 0.0;        // Mbps
};

/// Single token-bucket shaping step. Service order: CIR, then EIR, then the
/// EBS buffer, then drop. Conserves volume:
/// offered*tick + buffered_in = (conformant + excess + dropped)*tick + buffered_out.
inline ShapeResult shape(double offered, const ShaperConfig& cfg, double buffered_in, double tick) {
  offered = std::max(offered, 0.0);
  buffered_in = std::max(buffered_in, 0.0);
  const double cir = std::max(cfg.cir, 0.0);
  const double eir = std::max(cfg.eir, 0.0);
  const double ebs = std::max(cfg.ebs, 0.0);

  ShapeResult r;
  double volume = offered * tick + buffered_in;  // megabits waiting this tick
  r.conformant = std::min(volume / tick, cir);
  volume = std::max(volume - r.conformant * tick, 0.0);
  r.excess_served = std::min(volume / tick, eir);
  volume = std::max(volume - r.excess_served * tick, 0.0);
  r.buffered_out = std::min(volume, ebs);
  r.dropped = (volume - r.buffered_out) / tick;
  return r;
}

struct CongestionWindow {
  double start = 0.0;       // s
  double end = 0.0;         // s
  double extra_load = 0.0;  // Mbps added to eMBB offered load
};

struct SimConfig {
  double capacity = 100.0;       // Mbps
  double lambda = 2.0;           // mean UE arrivals per tick
  std::size_t num_ues_max = 30;  // N
  double tick = 1.0;             // s
  double duration = 100.0;       // s
  double mean_holding_ticks = 10.0;
  double session_ramp_ticks = 10.0;  // linear rate ramp at session start and end
  std::size_t initial_ues = 0;
  std::vector<CongestionWindow> congestion{{40.0, 60.0, 80.0}};
  double congestion_period = 100.0;  // s; > 0 repeats the windows with this period
  double congestion_ramp = 10.0;     // s of linear ramp at each window edge
  std::array<AppClass, kNumApps> apps = default_app_classes();
  std::array<double, kNumApps> background_load{};  // Mbps constant offered load per class
  double gr_multiplier = 1.5;   // offered-load factor applied by a GR assignment
  double ebs_seconds = 0.5;     // buffer depth as seconds of the stance's rate
  std::uint64_t rng_seed = 1;

  void validate() const {
    if (!(capacity > 0.0) || !std::isfinite(capacity)) throw ConfigError("sim.capacity must be > 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("sim.lambda must be >= 0");
    if (!(tick > 0.0) || !std::isfinite(tick)) throw ConfigError("sim.tick must be > 0");
    if (!(duration >= 0.0) || !std::isfinite(duration)) throw ConfigError("sim.duration must be >= 0");
    if (!(mean_holding_ticks > 0.0)) throw ConfigError("sim.mean_holding_ticks must be > 0");
    if (!(session_ramp_ticks >= 0.0)) throw ConfigError("sim.session_ramp_ticks must be >= 0");
    if (initial_ues > num_ues_max) throw ConfigError("sim.initial_ues exceeds sim.num_ues_max");
    if (!(congestion_period >= 0.0) || !(congestion_ramp >= 0.0))
      throw ConfigError("congestion period and ramp must be >= 0");
    if (!(gr_multiplier >= 0.0) || !std::isfinite(gr_multiplier)) throw ConfigError("sim.gr_multiplier must be >= 0");
    if (!(ebs_seconds >= 0.0)) throw ConfigError("sim.ebs_seconds must be >= 0");
    for (const auto& w : congestion)
      if (!(w.end >= w.start) || !(w.extra_load >= 0.0)) throw ConfigError("malformed congestion window");
    for (const auto& a : apps)
      if (!(a.per_ue_demand >= 0.0) || !(a.provisioned_rate >= 0.0)) throw ConfigError("app rates must be >= 0");
    for (double b : background_load)
      if (!(b >= 0.0)) throw ConfigError("background load must be >= 0");
  }

  std::size_t num_ticks() const { return static_cast<std::size_t>(std::llround(duration / tick)); }
};

/// Live per-application controls, changed by actions.
struct AppControl {
  Priority priority = Priority::kLow;
  QosModel qos = QosModel::kBestEffort;
  double gr = 1.0;
  friend bool operator==(const AppControl&, const AppControl&) = default;
};

/// Shaper parameters implied by a QoS model for an application currently
/// offering `offered` Mbps.
///   UGS  - committed rate equals demand, no excess rate.
///   RTPS - half the provisioned rate committed, half as excess.
///   BE   - excess rate only, up to the provisioned rate.
inline ShaperConfig shaper_stance(QosModel qos, double offered, double provisioned, double ebs_seconds) {
  switch (qos) {
    case QosModel::kUnsolicitedGrant: return {offered, 0.0, ebs_seconds * offered};
    case QosModel::kRealTimePolling: return {0.5 * provisioned, 0.5 * provisioned, ebs_seconds * provisioned};
    case QosModel::kBestEffort: return {0.0, provisioned, ebs_seconds * provisioned};
  }
  return {};
}

struct TickObservation {
  double timestamp = 0.0;
  std::array<double, kNumApps> offered{};  // Mbps
  std::array<double, kNumApps> served{};   // Mbps
  double conformant = 0.0;                 // Mbps
  double excess_served = 0.0;              // Mbps
  double buffered = 0.0;                   // megabits after the tick
  double buffered_before = 0.0;            // megabits before the tick
  double dropped = 0.0;                    // Mbps
  double observed_bw = 0.0;                // Mbps
  std::size_t active_ues = 0;

  double offered_total() const { return offered[0] + offered[1] + offered[2]; }
};

class Simulator {
 public:
  explicit Simulator(SimConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.rng_seed) {
    cfg_.validate();
    reset_controls();
    for (std::size_t i = 0; i < cfg_.initial_ues; ++i) admit_ue(0.0);
  }

  const SimConfig& config() const noexcept { return cfg_; }
  const std::array<AppControl, kNumApps>& controls() const noexcept { return controls_; }
  std::size_t ticks_elapsed() const noexcept { return ticks_; }
  std::size_t active_ues() const noexcept { return ues_.size(); }
  std::size_t actions_applied() const noexcept { return actions_applied_; }
  double now() const noexcept { return static_cast<double>(ticks_) * cfg_.tick; }

  /// Resets every application to its default priority/QoS model and unit
  /// generation rate, then applies the tuple's assignments. Applying the
  /// same tuple twice yields the same controls.
  void apply_action(const ConfigTuple& action) {
    reset_controls();
    for (std::size_t i = 0; i < kNumApps; ++i) {
      auto& c = controls_[i];
      std::visit(
          [&](auto s) {
            using S = decltype(s);
            if constexpr (std::is_same_v<S, GenerationRate>) c.gr = cfg_.gr_multiplier;
            else if constexpr (std::is_same_v<S, Priority>) c.priority = s;
            else c.qos = s;
          },
          action[i]);
    }
    ++actions_applied_;
  }

  void apply_action(const ActionSpace& space, std::size_t index) { apply_action(space.tuple(index)); }

  /// Restores default controls without counting as an applied action.
  void reset_controls() {
    for (std::size_t i = 0; i < kNumApps; ++i)
      controls_[i] = {cfg_.apps[i].default_priority, cfg_.apps[i].default_qos, 1.0};
  }

  double congestion_load(double t) const {
    double extra = 0.0;
    const double local = cfg_.congestion_period > 0.0 ? std::fmod(t, cfg_.congestion_period) : t;
    for (const auto& w : cfg_.congestion) {
      if (local < w.start || local >= w.end) continue;
      double factor = 1.0;
      if (cfg_.congestion_ramp > 0.0) {
        const double up = (local - w.start + cfg_.tick) / cfg_.congestion_ramp;
        const double down = (w.end - local) / cfg_.congestion_ramp;
        factor = std::clamp(std::min(up, down), 0.0, 1.0);
      }
      extra += factor * w.extra_load;
    }
    return extra;
  }

  TickObservation step() {
    const double t = now();
    const double tick = cfg_.tick;

    const double ramp = cfg_.session_ramp_ticks * tick;
    std::erase_if(ues_, [t, ramp](const Ue& u) { return u.departs + ramp <= t; });
    const std::uint64_t arrivals = rng_.poisson(cfg_.lambda);
    for (std::uint64_t k = 0; k < arrivals && ues_.size() < cfg_.num_ues_max; ++k) admit_ue(t);

    TickObservation obs;
    obs.timestamp = t;
    obs.active_ues = ues_.size();
    std::array<double, kNumApps> counts{};
    for (const auto& u : ues_) counts[static_cast<std::size_t>(u.kind)] += session_factor(u, t);
    for (std::size_t i = 0; i < kNumApps; ++i) {
      obs.offered[i] =
          (counts[i] * cfg_.apps[i].per_ue_demand + cfg_.background_load[i]) * controls_[i].gr;
    }
    obs.offered[static_cast<std::size_t>(AppKind::kEmbb)] += congestion_load(t);

    // Scheduling order: priority high to low, ties by application index.
    std::array<std::size_t, kNumApps> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return controls_[a].priority > controls_[b].priority;
    });

    std::array<ShaperConfig, kNumApps> stance{};
    std::array<double, kNumApps> volume{};  // megabits waiting
    for (std::size_t i = 0; i < kNumApps; ++i) {
      stance[i] = shaper_stance(controls_[i].qos, obs.offered[i], cfg_.apps[i].provisioned_rate, cfg_.ebs_seconds);
      obs.buffered_before += buffers_[i];
      volume[i] = obs.offered[i] * tick + buffers_[i];
    }

    double link_left = cfg_.capacity;
    std::array<double, kNumApps> conformant{}, excess{};
    for (std::size_t i : order) {
      conformant[i] = std::min({volume[i] / tick, stance[i].cir, link_left});
      volume[i] = std::max(volume[i] - conformant[i] * tick, 0.0);
      link_left = std::max(link_left - conformant[i], 0.0);
    }
    for (std::size_t i : order) {
      excess[i] = std::min({volume[i] / tick, stance[i].eir, link_left});
      volume[i] = std::max(volume[i] - excess[i] * tick, 0.0);
      link_left = std::max(link_left - excess[i], 0.0);
    }
    for (std::size_t i = 0; i < kNumApps; ++i) {
      buffers_[i] = std::min(volume[i], stance[i].ebs);
      const double dropped = (volume[i] - buffers_[i]) / tick;
      obs.served[i] = conformant[i] + excess[i];
      obs.conformant += conformant[i];
      obs.excess_served += excess[i];
      obs.dropped += dropped;
      obs.buffered += buffers_[i];
    }
    obs.observed_bw = std::min(obs.conformant + obs.excess_served, cfg_.capacity);
    ++ticks_;
    return obs;
  }

 private:
  struct Ue {
    AppKind kind;
    double arrives;
    double departs;
  };

  // Fraction of its demand a UE offers at time t: ramps up after arrival and
  // down after its holding time ends.
  double session_factor(const Ue& u, double t) const {
    const double ramp = cfg_.session_ramp_ticks * cfg_.tick;
    if (ramp <= 0.0) return t < u.departs ? 1.0 : 0.0;
    const double up = (t - u.arrives + cfg_.tick) / ramp;
    const double down = (u.departs + ramp - t) / ramp;
    return std::clamp(std::min(up, down), 0.0, 1.0);
  }

  void admit_ue(double t) {
    const auto kind = static_cast<AppKind>(rng_.index(kNumApps));
    ues_.push_back({kind, t, t + rng_.exponential(cfg_.mean_holding_ticks * cfg_.tick)});
  }

  SimConfig cfg_;
  Rng rng_;
  std::vector<Ue> ues_;
  std::array<AppControl, kNumApps> controls_{};
  std::array<double, kNumApps> buffers_{};
  std::size_t ticks_ = 0;
  std::size_t actions_applied_ = 0;
};

/// Chooses an action index (or none) after each observation.
using ActionPolicy = std::function<std::optional<std::size_t>(const TickObservation&)>;

struct SimRun {
  std::vector<TickObservation> ticks;

  TimeSeries series() const {
    std::vector<QosObservation> samples;
    samples.reserve(ticks.size());
    for (const auto& t : ticks) samples.push_back({t.timestamp, t.observed_bw});
    return TimeSeries(std::move(samples));
  }
};

/// Runs duration/tick steps. When a policy is given, its choice is applied
/// after each observation, before the next tick.
inline SimRun run(const SimConfig& cfg, const ActionSpace* space = nullptr, const ActionPolicy& policy = {}) {
  if (policy && space == nullptr) throw ConfigError("a policy needs an action space");
  Simulator sim(cfg);
  SimRun out;
  const std::size_t n = cfg.num_ticks();
  out.ticks.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.ticks.push_back(sim.step());
    if (policy) {
      if (auto a = policy(out.ticks.back())) sim.apply_action(*space, *a);
    }
  }
  return out;
}

}  // namespace ztn
