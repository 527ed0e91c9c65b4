#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "driveclone/data/recording.hpp"

namespace driveclone::sim {

// Acceleration command in m/s^2.
struct Action {
  double a_long = 0.0;
  double a_lat = 0.0;

  friend bool operator==(const Action&, const Action&) = default;
};

struct ActionBounds {
  double min_long = -6.0;
  double max_long = 4.0;
  double min_lat = -2.0;
  double max_lat = 2.0;

  Action clamp(const Action& a) const {
    return {std::clamp(a.a_long, min_long, max_long), std::clamp(a.a_lat, min_lat, max_lat)};
  }

  bool contains(const Action& a) const {
    return a.a_long >= min_long && a.a_long <= max_long && a.a_lat >= min_lat && a.a_lat <= max_lat;
  }

  // Largest magnitude per axis; used to bring actions to unit scale for networks.
  double long_scale() const { return std::max(std::abs(min_long), std::abs(max_long)); }
  double lat_scale() const { return std::max(std::abs(min_lat), std::abs(max_lat)); }

  friend bool operator==(const ActionBounds&, const ActionBounds&) = default;
};

// Maps a continuous action to the nearest point of a uniform grid spanning the
// bounds (9 longitudinal x 5 lateral levels by default).
inline Action quantize_action(const Action& a, const ActionBounds& bounds, int long_levels = 9, int lat_levels = 5) {
  auto snap = [](double v, double lo, double hi, int levels) {
    v = std::clamp(v, lo, hi);
    if (levels < 2) return 0.5 * (lo + hi);
    const double step = (hi - lo) / (levels - 1);
    return lo + std::round((v - lo) / step) * step;
  };
  return {snap(a.a_long, bounds.min_long, bounds.max_long, long_levels),
          snap(a.a_lat, bounds.min_lat, bounds.max_lat, lat_levels)};
}

struct EgoState {
  double x = 0.0;  // top-left corner, like VehicleFrame
  double y = 0.0;
  double x_velocity = 0.0;
  double y_velocity = 0.0;
  double width = 4.5;
  double height = 2.0;
  int lane_id = 1;

  double center_x() const { return x + 0.5 * width; }
  double center_y() const { return y + 0.5 * height; }

  friend bool operator==(const EgoState&, const EgoState&) = default;
};

struct SpeedLimits {
  double max_long = 50.0;  // m/s; longitudinal speed is held in [0, max_long]
  double max_lat = 3.0;    // m/s; lateral speed is held in [-max_lat, max_lat]
};

// Lane containing lateral position y; outside the road the nearest edge lane.
inline int lane_for(std::span<const double> boundaries, double y) {
  if (boundaries.size() < 2) return 1;
  if (const auto lane = data::lane_at(boundaries, y)) return *lane;
  return y < boundaries.front() ? 1 : static_cast<int>(boundaries.size()) - 1;
}

inline bool off_road(std::span<const double> boundaries, double center_y) {
  return boundaries.size() < 2 || center_y < boundaries.front() || center_y > boundaries.back();
}

// Semi-implicit Euler: velocity first, then position with the new velocity.
inline EgoState integrate(const EgoState& s, const Action& a, double dt, std::span<const double> lane_boundaries,
                          const SpeedLimits& limits = {}) {
  EgoState next = s;
  next.x_velocity = std::clamp(s.x_velocity + a.a_long * dt, 0.0, limits.max_long);
  next.y_velocity = std::clamp(s.y_velocity + a.a_lat * dt, -limits.max_lat, limits.max_lat);
  next.x = s.x + next.x_velocity * dt;
  next.y = s.y + next.y_velocity * dt;
  next.lane_id = lane_for(lane_boundaries, next.center_y());
  return next;
}

// Axis-aligned rectangle with top-left corner (x, y).
struct Rect {
  double x = 0.0;
  double y = 0.0;
  double width = 0.0;
  double height = 0.0;
};

inline Rect rect_of(const EgoState& s) { return {s.x, s.y, s.width, s.height}; }
inline Rect rect_of(const data::VehicleFrame& f) { return {f.x, f.y, f.width, f.height}; }

// Positive-area overlap. Touching edges or corners do not count.
inline bool overlaps(const Rect& a, const Rect& b) {
  return a.x < b.x + b.width && b.x < a.x + a.width && a.y < b.y + b.height && b.y < a.y + a.height;
}

inline bool detect_collision(const Rect& ego, std::span<const Rect> others) {
  return std::any_of(others.begin(), others.end(), [&](const Rect& o) { return overlaps(ego, o); });
}

inline bool detect_collision(const Rect& ego, std::span<const data::VehicleFrame> others) {
  return std::any_of(others.begin(), others.end(), [&](const auto& o) { return overlaps(ego, rect_of(o)); });
}

inline bool detect_lane_change(int prev_lane, int new_lane) { return prev_lane != new_lane; }

}  // namespace driveclone::sim
