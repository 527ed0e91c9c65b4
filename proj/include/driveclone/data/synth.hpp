#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "driveclone/data/recording.hpp"
#include "driveclone/error.hpp"
#include "driveclone/rng.hpp"
#include "driveclone/sim/kinematics.hpp"

namespace driveclone::data {

struct IdmParams {
  double desired_speed = 30.0;  // m/s
  double max_acceleration = 1.0;
  double comfortable_braking = 2.0;
  double time_headway = 1.2;  // s
  double min_gap = 2.0;       // m
  double exponent = 4.0;
};

// Intelligent Driver Model. `gap` is bumper to bumper; `closing_speed` is
// own speed minus leader speed. No leader: pass gap = +inf.
inline double idm_acceleration(const IdmParams& p, double speed, double gap, double closing_speed) {
  const double free_term = std::pow(speed / p.desired_speed, p.exponent);
  double interaction = 0.0;
  if (std::isfinite(gap)) {
    const double desired_gap =
        p.min_gap + std::max(0.0, speed * p.time_headway +
                                      speed * closing_speed /
                                          (2.0 * std::sqrt(p.max_acceleration * p.comfortable_braking)));
    const double g = std::max(gap, 0.1);
    interaction = (desired_gap / g) * (desired_gap / g);
  }
  return p.max_acceleration * (1.0 - free_term - interaction);
}

struct SynthConfig {
  int n_vehicles = 20;
  int n_lanes = 3;
  double duration_s = 60.0;
  std::uint64_t seed = 0;
  int track_id = 1;
  double road_length = 420.0;
  double lane_width = 3.75;
  double frame_rate = 25.0;
  double min_desired_speed = 28.0;
  double max_desired_speed = 32.0;
  double initial_fill = 0.5;             // share of vehicles on the road at frame 1
  double entry_window = 0.7;             // remaining vehicles enter during this share of the duration
  double lane_change_probability = 0.3;  // per vehicle, one scripted maneuver
  double lane_change_duration_s = 4.0;
  double max_braking = 9.0;
  IdmParams idm;  // desired_speed is drawn per vehicle
};

namespace detail {

struct SynthVehicle {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double length = 4.5;
  double width = 2.0;
  IdmParams idm;
  int lane = 1;         // lane of the current lateral center
  int origin_lane = 0;  // non-zero while changing lanes
  int target_lane = 0;
  int maneuver_step = 0;
  std::optional<double> lane_change_at;  // x at which a scripted change is attempted
  int lane_change_dir = 0;
  double ax = 0.0;
  double ay = 0.0;

  double rear() const { return x; }
  double front() const { return x + length; }
  bool occupies(int l) const { return lane == l || (target_lane != 0 && (origin_lane == l || target_lane == l)); }
};

class TrafficGenerator {
 public:
  explicit TrafficGenerator(const SynthConfig& cfg) : cfg_(cfg), rng_(make_rng(cfg.seed, 0x7a11ULL)) {
    for (int i = 0; i <= cfg.n_lanes; ++i) boundaries_.push_back(i * cfg.lane_width);
    dt_ = 1.0 / cfg.frame_rate;
  }

  Recording run() {
    TrackMeta meta{cfg_.track_id, cfg_.road_length, boundaries_, cfg_.frame_rate};
    Recording rec = make_recording(meta);
    const int n_frames = static_cast<int>(std::llround(cfg_.duration_s * cfg_.frame_rate));

    std::vector<SynthVehicle> pending;
    for (int id = 1; id <= cfg_.n_vehicles; ++id) pending.push_back(draw_vehicle(id));
    const int n_initial = static_cast<int>(std::llround(cfg_.initial_fill * cfg_.n_vehicles));
    place_initial(pending, std::min<int>(n_initial, static_cast<int>(pending.size())));
    // Whatever did not fit joins the entry queue, spread over the entry window.
    std::vector<double> entry_times;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      entry_times.push_back(pending.size() == 1 ? 0.0
                                                : cfg_.entry_window * cfg_.duration_s * static_cast<double>(i) /
                                                      static_cast<double>(pending.size() - 1));
    }
    std::deque<std::pair<double, SynthVehicle>> queue;
    for (std::size_t i = 0; i < pending.size(); ++i) queue.emplace_back(entry_times[i], pending[i]);

    for (int k = 0; k < n_frames; ++k) {
      const double t = k * dt_;
      if (k > 0 || active_.empty()) admit(queue, t);
      compute_accelerations();
      record(rec, k + 1);
      advance();
      schedule_lane_changes();
    }
    std::stable_sort(rec.frames.begin(), rec.frames.end(), frame_order);
    return rec;
  }

 private:
  SynthVehicle draw_vehicle(int id) {
    SynthVehicle v;
    v.id = id;
    v.idm = cfg_.idm;
    v.idm.desired_speed = uniform(rng_, cfg_.min_desired_speed, cfg_.max_desired_speed);
    v.length = uniform(rng_, 4.0, 5.5);
    v.width = uniform(rng_, 1.8, 2.2);
    v.lane = 1 + static_cast<int>(uniform_index(rng_, static_cast<std::uint64_t>(cfg_.n_lanes)));
    if (cfg_.n_lanes > 1 && uniform(rng_, 0.0, 1.0) < cfg_.lane_change_probability) {
      v.lane_change_at = uniform(rng_, 0.2, 0.7) * cfg_.road_length;
      v.lane_change_dir = uniform(rng_, 0.0, 1.0) < 0.5 ? -1 : 1;
      if (v.lane + v.lane_change_dir < 1 || v.lane + v.lane_change_dir > cfg_.n_lanes) v.lane_change_dir *= -1;
    }
    return v;
  }

  double lane_y(int lane, double width) const { return lane_center(boundaries_, lane) - 0.5 * width; }

  void place_initial(std::vector<SynthVehicle>& pending, int n_initial) {
    std::vector<std::vector<SynthVehicle>> per_lane(static_cast<std::size_t>(cfg_.n_lanes));
    for (int i = 0; i < n_initial; ++i) per_lane[static_cast<std::size_t>(pending[i].lane - 1)].push_back(pending[i]);
    std::vector<SynthVehicle> leftover;
    for (auto& lane_vehicles : per_lane) {
      if (lane_vehicles.empty()) continue;
      const double spacing = (cfg_.road_length - 20.0) / static_cast<double>(lane_vehicles.size());
      std::optional<std::pair<double, double>> ahead;  // (rear, speed) of the last placed vehicle
      for (std::size_t k = 0; k < lane_vehicles.size(); ++k) {
        auto& v = lane_vehicles[k];
        const double jitter = uniform(rng_, -0.2, 0.2) * spacing;
        v.x = std::clamp(cfg_.road_length - 10.0 - (static_cast<double>(k) + 0.5) * spacing + jitter - v.length, 0.0,
                         cfg_.road_length - v.length);
        v.y = lane_y(v.lane, v.width);
        v.vx = ahead ? std::min(v.idm.desired_speed, ahead->second) : v.idm.desired_speed;
        if (ahead && ahead->first - v.front() < v.idm.min_gap + v.vx * v.idm.time_headway) {
          leftover.push_back(v);
          continue;
        }
        active_.push_back(v);
        ahead = std::make_pair(v.rear(), v.vx);
      }
    }
    std::vector<SynthVehicle> rest(pending.begin() + n_initial, pending.end());
    leftover.insert(leftover.end(), rest.begin(), rest.end());
    std::stable_sort(leftover.begin(), leftover.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    pending = std::move(leftover);
  }

  // Nearest vehicle ahead (by rear bumper) occupying `lane`, excluding `self`.
  const SynthVehicle* leader_in(int lane, double front, int self) const {
    const SynthVehicle* best = nullptr;
    for (const auto& o : active_) {
      if (o.id == self || !o.occupies(lane) || o.rear() < front - 1e-9) continue;
      if (!best || o.rear() < best->rear()) best = &o;
    }
    return best;
  }

  const SynthVehicle* follower_in(int lane, double rear, int self) const {
    const SynthVehicle* best = nullptr;
    for (const auto& o : active_) {
      if (o.id == self || !o.occupies(lane) || o.front() > rear + 1e-9) continue;
      if (!best || o.front() > best->front()) best = &o;
    }
    return best;
  }

  void admit(std::deque<std::pair<double, SynthVehicle>>& queue, double t) {
    while (!queue.empty() && queue.front().first <= t) {
      auto v = queue.front().second;
      bool placed = false;
      for (int attempt = 0; attempt < cfg_.n_lanes && !placed; ++attempt) {
        const int lane = 1 + (v.lane - 1 + attempt) % cfg_.n_lanes;
        v.x = 0.0;
        const auto* lead = leader_in(lane, 0.0, v.id);
        double speed = v.idm.desired_speed;
        if (lead) {
          speed = std::min(speed, lead->vx);
          const double gap = lead->rear() - v.length;
          if (gap < std::max(10.0, v.idm.min_gap + speed * v.idm.time_headway)) continue;
        }
        if (lane != v.lane) {
          v.lane = lane;
          if (v.lane + v.lane_change_dir < 1 || v.lane + v.lane_change_dir > cfg_.n_lanes) v.lane_change_dir *= -1;
        }
        v.vx = speed;
        v.y = lane_y(lane, v.width);
        active_.push_back(v);
        placed = true;
      }
      if (!placed) return;  // keep order; retry next tick
      queue.pop_front();
    }
  }

  void compute_accelerations() {
    for (auto& v : active_) {
      double a = std::numeric_limits<double>::infinity();
      for (int lane : {v.lane, v.origin_lane, v.target_lane}) {
        if (lane == 0) continue;
        const auto* lead = leader_in(lane, v.front(), v.id);
        const double gap = lead ? lead->rear() - v.front() : std::numeric_limits<double>::infinity();
        const double closing = lead ? v.vx - lead->vx : 0.0;
        a = std::min(a, idm_acceleration(v.idm, v.vx, gap, closing));
      }
      v.ax = std::max(a, -cfg_.max_braking);
      v.ay = 0.0;
      if (v.target_lane != 0) {
        const int n = maneuver_steps();
        const double period = cfg_.lane_change_duration_s;
        const double amplitude = 2.0 * std::numbers::pi * cfg_.lane_width / (period * period);
        const double dir = v.target_lane > v.origin_lane ? 1.0 : -1.0;
        v.ay = dir * amplitude * std::sin(2.0 * std::numbers::pi * v.maneuver_step / n);
      }
    }
  }

  void record(Recording& rec, int frame) const {
    for (const auto& v : active_) {
      VehicleFrame f;
      f.frame = frame;
      f.vehicle_id = v.id;
      f.x = v.x;
      f.y = v.y;
      f.width = v.length;
      f.height = v.width;
      f.x_velocity = v.vx;
      f.y_velocity = v.vy;
      f.x_acceleration = v.ax;
      f.y_acceleration = v.ay;
      f.lane_id = v.lane;
      rec.frames.push_back(f);
    }
  }

  int maneuver_steps() const {
    return std::max(2, static_cast<int>(std::llround(cfg_.lane_change_duration_s * cfg_.frame_rate)));
  }

  void advance() {
    const sim::SpeedLimits limits{100.0, 100.0};
    for (auto& v : active_) {
      sim::EgoState s{v.x, v.y, v.vx, v.vy, v.length, v.width, v.lane};
      const auto next = sim::integrate(s, {v.ax, v.ay}, dt_, boundaries_, limits);
      v.x = next.x;
      v.y = next.y;
      v.vx = next.x_velocity;
      v.vy = next.y_velocity;
      if (v.target_lane != 0) {
        v.lane = next.lane_id;
        if (++v.maneuver_step >= maneuver_steps()) {
          v.target_lane = 0;
          v.origin_lane = 0;
          v.maneuver_step = 0;
          v.vy = 0.0;
        }
      }
    }
    std::erase_if(active_, [&](const SynthVehicle& v) { return v.front() > cfg_.road_length; });
  }

  void schedule_lane_changes() {
    for (auto& v : active_) {
      if (v.target_lane != 0 || !v.lane_change_at || v.x < *v.lane_change_at) continue;
      if (v.x > 0.85 * cfg_.road_length) {
        v.lane_change_at.reset();
        continue;
      }
      const int target = v.lane + v.lane_change_dir;
      if (target < 1 || target > cfg_.n_lanes) {
        v.lane_change_at.reset();
        continue;
      }
      const auto* lead = leader_in(target, v.rear(), v.id);
      const auto* back = follower_in(target, v.front(), v.id);
      const bool lead_ok = !lead || lead->rear() - v.front() >= std::max(20.0, v.vx * v.idm.time_headway);
      const bool back_ok =
          !back || (v.rear() - back->front() >= std::max(20.0, back->vx * 1.5) && back->vx <= v.vx + 2.0);
      const bool alongside = std::any_of(active_.begin(), active_.end(), [&](const SynthVehicle& o) {
        return o.id != v.id && o.occupies(target) && o.rear() < v.front() + 1.0 && v.rear() < o.front() + 1.0;
      });
      if (!lead_ok || !back_ok || alongside) continue;
      v.origin_lane = v.lane;
      v.target_lane = target;
      v.maneuver_step = 0;
      v.lane_change_at.reset();
    }
  }

  SynthConfig cfg_;
  Rng rng_;
  std::vector<double> boundaries_;
  double dt_ = 0.04;
  std::vector<SynthVehicle> active_;
};

}  // namespace detail

// Car-following traffic in the tracks schema: IDM longitudinal control, a
// share of vehicles performing one scripted lane change. Deterministic per
// seed. Vehicles that cannot enter before the end of the duration are dropped.
inline Recording synth_traffic(const SynthConfig& cfg) {
  if (cfg.n_vehicles < 1) throw InvalidConfig("n_vehicles must be >= 1");
  if (cfg.n_lanes < 1) throw InvalidConfig("n_lanes must be >= 1");
  if (!(cfg.duration_s > 0.0) || !(cfg.frame_rate > 0.0)) throw InvalidConfig("duration and frame rate must be positive");
  if (!(cfg.road_length > 20.0) || !(cfg.lane_width > 2.5)) throw InvalidConfig("road too small");
  if (!(cfg.min_desired_speed > 0.0) || cfg.max_desired_speed < cfg.min_desired_speed) {
    throw InvalidConfig("desired speed range");
  }
  return detail::TrafficGenerator(cfg).run();
}

}  // namespace driveclone::data
