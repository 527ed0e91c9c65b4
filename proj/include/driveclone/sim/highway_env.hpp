#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "driveclone/data/recording.hpp"
#include "driveclone/error.hpp"
#include "driveclone/rng.hpp"
#include "driveclone/sim/simulator.hpp"

namespace driveclone::sim {

struct EnvStep {
  Observation observation;
  StepInfo info;
  bool truncated = false;  // horizon reached without a terminal event
  double reward = 0.0;     // environment reward; replayed highways give none
};

// Minimal episodic interface consumed by the policy-gradient trainers.
class EpisodicEnv {
 public:
  virtual ~EpisodicEnv() = default;
  virtual Observation reset(Rng& rng) = 0;
  virtual EnvStep step(const Action& action) = 0;
  virtual int observation_width() const = 0;
  virtual ActionBounds action_bounds() const = 0;
};

using EnvFactory = std::function<std::unique_ptr<EpisodicEnv>(std::uint64_t worker_seed)>;

struct SpawnPolicy {
  double clearance = 15.0;         // free distance ahead of and behind the ego in its lane
  double lateral_clearance = 5.0;  // free distance to vehicles in adjacent lanes
  double max_x_fraction = 0.4;     // spawn rear bumper within this share of the road
  int min_remaining_frames = 50;   // frames the episode can last at least
  int attempts = 200;
};

// Rejection-samples a spawn point whose lane has the requested clearance.
inline SpawnSpec sample_spawn(const data::FrameIndex& index, const SimConfig& cfg, const SpawnPolicy& policy,
                              Rng& rng) {
  const auto& rec = index.recording();
  if (rec.empty() || rec.lane_count() < 1) throw NoValidSpawn("track " + std::to_string(rec.track_id) + " is empty");
  const int first = rec.first_frame();
  const int last = std::max(first, rec.last_frame() - policy.min_remaining_frames);
  const double x_max = std::max(0.0, std::min(policy.max_x_fraction * rec.road_length, rec.road_length - cfg.ego_width));
  for (int attempt = 0; attempt < policy.attempts; ++attempt) {
    SpawnSpec s;
    s.frame = first + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(last - first + 1)));
    s.lane = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(rec.lane_count())));
    s.x = uniform(rng, 0.0, x_max);
    if (s.frame >= rec.last_frame()) continue;
    bool clear = true;
    for (const auto& v : index.at(s.frame)) {
      const double margin = v.lane_id == s.lane ? policy.clearance : policy.lateral_clearance;
      if (std::abs(v.lane_id - s.lane) > 1) continue;
      if (v.x < s.x + cfg.ego_width + margin && s.x < v.x + v.width + margin) {
        clear = false;
        break;
      }
    }
    if (clear) return s;
  }
  throw NoValidSpawn("no clear spawn in track " + std::to_string(rec.track_id));
}

// Episodes over a pool of recordings: spawn drawn per reset, episode cut at
// `horizon` steps (0 = until the track ends).
class HighwayEnv : public EpisodicEnv {
 public:
  HighwayEnv(std::shared_ptr<const std::vector<data::Recording>> pool, SimConfig cfg, SpawnPolicy spawn = {},
             int horizon = 0)
      : pool_(std::move(pool)), cfg_(std::move(cfg)), spawn_(spawn), horizon_(horizon) {
    if (!pool_ || pool_->empty()) throw InvalidConfig("environment needs at least one recording");
    for (const auto& rec : *pool_) sims_.emplace_back(rec, cfg_);
  }

  Observation reset(Rng& rng) override {
    for (int attempt = 0;; ++attempt) {
      current_ = static_cast<std::size_t>(uniform_index(rng, sims_.size()));
      try {
        const auto spawn = sample_spawn(sims_[current_].index(), cfg_, spawn_, rng);
        steps_ = 0;
        return sims_[current_].reset(spawn);
      } catch (const NoValidSpawn&) {
        if (attempt > 10 * static_cast<int>(sims_.size())) throw;
      }
    }
  }

  EnvStep step(const Action& action) override {
    auto [obs, info] = sims_[current_].step(action);
    ++steps_;
    EnvStep out{std::move(obs), info, false, 0.0};
    out.truncated = !info.done && horizon_ > 0 && steps_ >= horizon_;
    return out;
  }

  int observation_width() const override { return cfg_.observation.width(); }
  ActionBounds action_bounds() const override { return cfg_.bounds; }
  const ReplaySimulator& simulator() const { return sims_[current_]; }

 private:
  std::shared_ptr<const std::vector<data::Recording>> pool_;
  SimConfig cfg_;
  SpawnPolicy spawn_;
  int horizon_;
  std::vector<ReplaySimulator> sims_;
  std::size_t current_ = 0;
  int steps_ = 0;
};

}  // namespace driveclone::sim
