#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <optional>
#include <span>

#include "driveclone/data/recording.hpp"
#include "driveclone/sim/kinematics.hpp"

namespace driveclone::sim {

// Feature layout (after normalization, each clipped to [-clip, clip]):
//   0  ego longitudinal speed / velocity_scale
//   1  ego lateral offset from its lane center / lane width
//   2  ego lateral velocity / lateral_velocity_scale      (only if lateral_velocity)
//   then 6 neighbor slots x (gap / gap_scale, relative velocity / velocity_scale):
//   lead and rear in the ego lane, the left lane (lane_id - 1), the right lane (lane_id + 1).
using Observation = Eigen::VectorXd;

enum class Slot { lead = 0, rear, left_lead, left_rear, right_lead, right_rear };
inline constexpr int kSlotCount = 6;

struct ObservationSpec {
  double sensing_range = 200.0;
  double gap_scale = 200.0;
  double velocity_scale = 50.0;
  double lateral_velocity_scale = 2.0;
  double clip = 1.5;
  bool lateral_velocity = true;

  int ego_width() const { return lateral_velocity ? 3 : 2; }
  int width() const { return ego_width() + 2 * kSlotCount; }
  int slot_offset(Slot s) const { return ego_width() + 2 * static_cast<int>(s); }
};

struct Neighbor {
  int vehicle_id = 0;
  double gap = 0.0;           // bumper-to-bumper distance, m
  double rel_velocity = 0.0;  // neighbor x_velocity minus ego x_velocity, m/s
};

using NeighborSlots = std::array<std::optional<Neighbor>, kSlotCount>;

// Nearest vehicle per slot by longitudinal gap, within sensing range. A
// vehicle is "lead" when its center lies strictly ahead of the ego center.
// Lane membership uses each vehicle's recorded lane_id. `exclude_id` removes
// the ego itself when a recorded vehicle plays the ego.
inline NeighborSlots find_neighbors(std::span<const data::VehicleFrame> vehicles, const EgoState& ego,
                                    int lane_count, const ObservationSpec& spec,
                                    std::optional<int> exclude_id = std::nullopt) {
  NeighborSlots slots;
  const int lanes[3] = {ego.lane_id, ego.lane_id - 1, ego.lane_id + 1};
  for (const auto& v : vehicles) {
    if (exclude_id && v.vehicle_id == *exclude_id) continue;
    for (int k = 0; k < 3; ++k) {
      if (lanes[k] < 1 || lanes[k] > lane_count || v.lane_id != lanes[k]) continue;
      const bool ahead = v.center_x() > ego.center_x();
      const double gap = ahead ? v.x - (ego.x + ego.width) : ego.x - (v.x + v.width);
      if (gap > spec.sensing_range) continue;
      auto& slot = slots[static_cast<std::size_t>(2 * k + (ahead ? 0 : 1))];
      if (!slot || gap < slot->gap) slot = Neighbor{v.vehicle_id, gap, v.x_velocity - ego.x_velocity};
    }
  }
  return slots;
}

inline Observation encode_observation(const EgoState& ego, const NeighborSlots& slots,
                                      std::span<const double> lane_boundaries, const ObservationSpec& spec) {
  Observation obs(spec.width());
  auto put = [&](int i, double v) { obs[i] = std::clamp(v, -spec.clip, spec.clip); };
  const int lane = std::clamp(ego.lane_id, 1, std::max(1, static_cast<int>(lane_boundaries.size()) - 1));
  double offset = 0.0;
  if (lane_boundaries.size() >= 2) {
    offset = (ego.center_y() - data::lane_center(lane_boundaries, lane)) / data::lane_width(lane_boundaries, lane);
  }
  put(0, ego.x_velocity / spec.velocity_scale);
  put(1, offset);
  if (spec.lateral_velocity) put(2, ego.y_velocity / spec.lateral_velocity_scale);
  for (int s = 0; s < kSlotCount; ++s) {
    const auto& n = slots[static_cast<std::size_t>(s)];
    const int at = spec.ego_width() + 2 * s;
    put(at, (n ? n->gap : spec.sensing_range) / spec.gap_scale);
    put(at + 1, (n ? n->rel_velocity : 0.0) / spec.velocity_scale);
  }
  return obs;
}

inline Observation observe(const data::FrameIndex& index, int frame, const EgoState& ego, const ObservationSpec& spec,
                           std::optional<int> exclude_id = std::nullopt) {
  const auto& rec = index.recording();
  const auto slots = find_neighbors(index.at(frame), ego, rec.lane_count(), spec, exclude_id);
  return encode_observation(ego, slots, rec.lane_boundaries, spec);
}

inline Observation observe(const data::Recording& rec, int frame, const EgoState& ego, const ObservationSpec& spec) {
  return observe(data::FrameIndex(rec), frame, ego, spec);
}

inline EgoState ego_from_frame(const data::VehicleFrame& f) {
  return {f.x, f.y, f.x_velocity, f.y_velocity, f.width, f.height, f.lane_id};
}

}  // namespace driveclone::sim
