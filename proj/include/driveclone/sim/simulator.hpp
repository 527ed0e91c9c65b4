#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driveclone/data/recording.hpp"
#include "driveclone/error.hpp"
#include "driveclone/sim/kinematics.hpp"
#include "driveclone/sim/observation.hpp"
#include "driveclone/text.hpp"

namespace driveclone::sim {

struct SpawnSpec {
  int frame = 1;
  int lane = 1;
  double x = 0.0;  // rear bumper of the ego
};

struct StepInfo {
  bool collision = false;
  bool lane_change = false;
  bool off_road = false;
  bool end_of_track = false;
  bool done = false;
};

struct SimConfig {
  ObservationSpec observation;
  ActionBounds bounds;
  SpeedLimits limits;
  double ego_width = 4.5;  // longitudinal length
  double ego_height = 2.0;
  double default_speed = 30.0;  // spawn speed when no recorded vehicle is present at the spawn frame
  bool quantize = false;        // snap actions to the 9x5 grid
};

struct TrajectoryRow {
  int frame = 0;
  EgoState ego;
  Action action;  // applied action that produced this state (zero for the spawn row)
  bool collision = false;
};

// Replays a Recording with one inserted ego. Recorded vehicles are copied from
// the log each tick and never react; only the ego is integrated. The Recording
// must outlive the simulator and is never modified.
class ReplaySimulator {
 public:
  explicit ReplaySimulator(const data::Recording& rec, SimConfig cfg = {})
      : rec_(&rec), index_(rec), cfg_(std::move(cfg)) {}

  const data::Recording& recording() const { return *rec_; }
  const data::FrameIndex& index() const { return index_; }
  const SimConfig& config() const { return cfg_; }
  double dt() const { return rec_->dt(); }

  Observation reset(const SpawnSpec& spawn) {
    if (!index_.has_frame(spawn.frame)) throw InvalidSpawn("frame " + std::to_string(spawn.frame) + " not in track");
    if (spawn.frame >= rec_->last_frame()) throw InvalidSpawn("spawn frame leaves no step before the track ends");
    if (spawn.lane < 1 || spawn.lane > rec_->lane_count()) throw InvalidSpawn("lane " + std::to_string(spawn.lane));
    if (spawn.x < 0.0 || spawn.x + cfg_.ego_width > rec_->road_length) throw InvalidSpawn("x outside the road");

    EgoState ego;
    ego.width = cfg_.ego_width;
    ego.height = cfg_.ego_height;
    ego.x = spawn.x;
    ego.y = data::lane_center(rec_->lane_boundaries, spawn.lane) - 0.5 * ego.height;
    ego.lane_id = spawn.lane;
    ego.x_velocity = std::min(local_speed(spawn.frame, spawn.lane, spawn.x), cfg_.limits.max_long);
    ego.y_velocity = 0.0;
    if (detect_collision(rect_of(ego), index_.at(spawn.frame))) throw InvalidSpawn("ego overlaps a recorded vehicle");

    ego_ = ego;
    frame_ = spawn.frame;
    done_ = false;
    started_ = true;
    trajectory_.clear();
    trajectory_.push_back({frame_, ego_, {}, false});
    return observation();
  }

  std::pair<Observation, StepInfo> step(const Action& requested) {
    if (!started_) throw EpisodeFinished("step before reset");
    if (done_) throw EpisodeFinished("episode already terminated");
    Action a = cfg_.bounds.clamp(requested);
    if (cfg_.quantize) a = quantize_action(a, cfg_.bounds);

    const int prev_lane = ego_.lane_id;
    ego_ = integrate(ego_, a, dt(), rec_->lane_boundaries, cfg_.limits);
    ++frame_;

    StepInfo info;
    info.collision = detect_collision(rect_of(ego_), index_.at(frame_));
    info.lane_change = detect_lane_change(prev_lane, ego_.lane_id);
    info.off_road = sim::off_road(rec_->lane_boundaries, ego_.center_y());
    info.end_of_track = frame_ >= rec_->last_frame() || ego_.x + ego_.width > rec_->road_length;
    info.done = info.collision || info.off_road || info.end_of_track;
    done_ = info.done;
    last_action_ = a;
    trajectory_.push_back({frame_, ego_, a, info.collision});
    return {observation(), info};
  }

  Observation observation() const { return observe(index_, frame_, ego_, cfg_.observation); }

  const EgoState& ego() const { return ego_; }
  int frame() const { return frame_; }
  bool done() const { return done_; }
  const Action& last_action() const { return last_action_; }
  std::span<const data::VehicleFrame> traffic() const { return index_.at(frame_); }
  const std::vector<TrajectoryRow>& trajectory() const { return trajectory_; }

  // Average recorded speed in `lane` near x at `frame`, falling back to the
  // whole frame and then to the configured default.
  double local_speed(int frame, int lane, double x) const {
    double sum = 0.0;
    int n = 0;
    double all_sum = 0.0;
    int all_n = 0;
    for (const auto& v : index_.at(frame)) {
      all_sum += v.x_velocity;
      ++all_n;
      if (v.lane_id == lane && std::abs(v.center_x() - x) <= cfg_.observation.sensing_range) {
        sum += v.x_velocity;
        ++n;
      }
    }
    if (n > 0) return std::max(0.0, sum / n);
    if (all_n > 0) return std::max(0.0, all_sum / all_n);
    return cfg_.default_speed;
  }

 private:
  const data::Recording* rec_;
  data::FrameIndex index_;
  SimConfig cfg_;
  EgoState ego_;
  Action last_action_;
  int frame_ = 0;
  bool done_ = true;
  bool started_ = false;
  std::vector<TrajectoryRow> trajectory_;
};

// Traffic-only playback, no ego. Yields the simulator's view of each frame.
class TrafficReplay {
 public:
  explicit TrafficReplay(const data::Recording& rec) : index_(rec), frame_(rec.first_frame()) {}

  bool valid() const { return index_.has_frame(frame_); }
  int frame() const { return frame_; }
  std::vector<data::VehicleFrame> vehicles() const {
    const auto span = index_.at(frame_);
    return {span.begin(), span.end()};
  }
  void advance() { ++frame_; }

 private:
  data::FrameIndex index_;
  int frame_;
};

// "frame,ego_x,ego_y,ego_vx,ego_vy,a_long,a_lat,collision,lane_id"
inline std::string export_trajectory(const std::vector<TrajectoryRow>& rows) {
  std::string out = "frame,ego_x,ego_y,ego_vx,ego_vy,a_long,a_lat,collision,lane_id\n";
  for (const auto& r : rows) {
    out += std::to_string(r.frame);
    for (double v : {r.ego.x, r.ego.y, r.ego.x_velocity, r.ego.y_velocity, r.action.a_long, r.action.a_lat}) {
      out += ',' + text::exact(v);
    }
    out += r.collision ? ",1," : ",0,";
    out += std::to_string(r.ego.lane_id) + '\n';
  }
  return out;
}

}  // namespace driveclone::sim
