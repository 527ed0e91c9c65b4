#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "driveclone/bc/policy.hpp"
#include "driveclone/data/recording.hpp"
#include "driveclone/error.hpp"
#include "driveclone/rng.hpp"
#include "driveclone/sim/highway_env.hpp"
#include "driveclone/sim/simulator.hpp"

namespace driveclone::eval {

using Eigen::VectorXd;

inline double kmh(double mps) { return mps * 3.6; }

inline double lane_change_rate(long changes, long drivers) {
  if (drivers < 1) throw DivisionByZeroDrivers("lane change rate over " + std::to_string(drivers) + " drivers");
  return static_cast<double>(changes) / static_cast<double>(drivers);
}

struct MetricsRow {
  std::string policy;
  double collisions = 0.0;  // collision-terminated episodes per insertion set (one set per track)
  double velocity_kmph = 0.0;
  double acceleration = 0.0;  // mean applied longitudinal command, m/s^2
  long lane_changes = 0;
  long episodes = 0;
  long collision_episodes = 0;
  long frames = 0;

  double lane_change_rate() const { return eval::lane_change_rate(lane_changes, episodes); }
};

struct PolicyMean {
  double vel_kmph = 0.0;
  double acc = 0.0;
};

struct TrackProfile {
  int track_id = 0;
  double expert_vel_kmph = 0.0;
  double expert_acc = 0.0;
  std::vector<std::pair<std::string, PolicyMean>> policies;
};

// Mean shifted by the first sample: exact for constant input.
class ShiftedMean {
 public:
  void add(double v) {
    if (n_ == 0) shift_ = v;
    sum_ += v - shift_;
    ++n_;
  }
  void merge(const ShiftedMean& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    sum_ += o.sum_ + static_cast<double>(o.n_) * (o.shift_ - shift_);
    n_ += o.n_;
  }
  double mean() const { return n_ ? shift_ + sum_ / static_cast<double>(n_) : 0.0; }
  long count() const { return n_; }

 private:
  double shift_ = 0.0;
  double sum_ = 0.0;
  long n_ = 0;
};

// Per-track recorded means over every vehicle and frame. Speeds use |vx| so a
// track driven in -x reads the same as one driven in +x.
inline std::vector<TrackProfile> expert_profiles(const std::vector<data::Recording>& recordings) {
  std::vector<TrackProfile> out;
  for (const auto& rec : recordings) {
    if (rec.empty()) continue;
    ShiftedMean v, a;
    for (const auto& f : rec.frames) {
      v.add(std::abs(f.x_velocity));
      a.add(f.x_acceleration);
    }
    out.push_back({rec.track_id, kmh(v.mean()), a.mean(), {}});
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.track_id < y.track_id; });
  return out;
}

using Controller = std::function<sim::Action(const VectorXd& obs)>;

inline Controller controller(const bc::Policy& p) {
  return [&p](const VectorXd& obs) { return bc::predict(p, obs); };
}

struct EvalConfig {
  int insertions_per_track = 30;
  int max_steps = 0;  // 0 = until the track ends
  std::uint64_t seed = 0;
  int workers = 1;
  sim::SimConfig sim;
  sim::SpawnPolicy spawn;
};

struct TrackResult {
  int track_id = 0;
  ShiftedMean velocity, acceleration;
  long lane_changes = 0;
  long collisions = 0;
  long off_road = 0;
  long episodes = 0;
};

inline TrackResult evaluate_track(const Controller& ctl, const data::Recording& rec, const EvalConfig& cfg) {
  TrackResult r;
  r.track_id = rec.track_id;
  sim::ReplaySimulator s(rec, cfg.sim);
  auto rng = make_rng(cfg.seed, 0xe7a1ULL + static_cast<std::uint64_t>(rec.track_id));
  for (int e = 0; e < cfg.insertions_per_track; ++e) {
    VectorXd obs = s.reset(sim::sample_spawn(s.index(), cfg.sim, cfg.spawn, rng));
    for (int k = 0; cfg.max_steps <= 0 || k < cfg.max_steps; ++k) {
      auto [next, info] = s.step(ctl(obs));
      r.velocity.add(s.ego().x_velocity);
      r.acceleration.add(s.last_action().a_long);
      r.lane_changes += info.lane_change;
      if (info.done) {
        r.collisions += info.collision;
        r.off_road += info.off_road;
        break;
      }
      obs = std::move(next);
    }
    ++r.episodes;
  }
  return r;
}

struct Evaluation {
  MetricsRow row;
  std::vector<std::pair<int, PolicyMean>> tracks;  // ordered by track id
  long off_road = 0;
};

// One insertion set per recording; per-track runs are independent and merged
// in track-id order.
inline Evaluation run_evaluation(const std::string& name, const Controller& ctl,
                                 const std::vector<data::Recording>& recordings, const EvalConfig& cfg) {
  if (recordings.empty()) throw InvalidConfig("evaluation needs at least one recording");
  if (cfg.insertions_per_track < 1) throw InvalidConfig("insertions_per_track must be positive");
  if (name.find_first_of(",\n\"") != std::string::npos) throw InvalidConfig("policy name '" + name + "' breaks CSV");
  std::vector<const data::Recording*> order;
  for (const auto& r : recordings) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->track_id < b->track_id; });

  std::vector<TrackResult> results(order.size());
  const int workers = std::clamp(cfg.workers, 1, static_cast<int>(order.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < order.size(); ++i) results[i] = evaluate_track(ctl, *order[i], cfg);
  } else {
    std::vector<std::exception_ptr> errors(order.size());
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = static_cast<std::size_t>(w); i < order.size(); i += static_cast<std::size_t>(workers)) {
          try {
            results[i] = evaluate_track(ctl, *order[i], cfg);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  Evaluation ev;
  ev.row.policy = name;
  ShiftedMean vel, acc;
  for (const auto& t : results) {
    vel.merge(t.velocity);
    acc.merge(t.acceleration);
    ev.row.lane_changes += t.lane_changes;
    ev.row.collision_episodes += t.collisions;
    ev.row.episodes += t.episodes;
    ev.off_road += t.off_road;
    ev.tracks.push_back({t.track_id, {kmh(t.velocity.mean()), t.acceleration.mean()}});
  }
  ev.row.velocity_kmph = kmh(vel.mean());
  ev.row.acceleration = acc.mean();
  ev.row.frames = vel.count();
  ev.row.collisions = static_cast<double>(ev.row.collision_episodes) / static_cast<double>(results.size());
  return ev;
}

inline Evaluation run_evaluation(const std::string& name, const bc::Policy& p,
                                 const std::vector<data::Recording>& recordings, const EvalConfig& cfg) {
  return run_evaluation(name, controller(p), recordings, cfg);
}

// Expert rows joined with each evaluation's per-track means, by track id.
inline std::vector<TrackProfile> merge_profiles(std::vector<TrackProfile> expert, const std::vector<Evaluation>& evals) {
  for (auto& p : expert) {
    for (const auto& e : evals) {
      PolicyMean m{};
      for (const auto& [id, pm] : e.tracks)
        if (id == p.track_id) m = pm;
      p.policies.emplace_back(e.row.policy, m);
    }
  }
  return expert;
}

}  // namespace driveclone::eval
