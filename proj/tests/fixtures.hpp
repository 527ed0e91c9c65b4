#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

#include "driveclone/bc/train.hpp"
#include "driveclone/data/recording.hpp"
#include "driveclone/rng.hpp"

namespace driveclone::testing {

inline data::VehicleFrame vehicle(int frame, int id, double x, int lane, double vx, double length = 4.5,
                                  double ax = 0.0) {
  data::VehicleFrame f;
  f.frame = frame;
  f.vehicle_id = id;
  f.x = x;
  f.width = length;
  f.height = 2.0;
  f.y = 3.75 * (lane - 1) + 0.875;  // centered in a 3.75 m lane
  f.x_velocity = vx;
  f.x_acceleration = ax;
  f.lane_id = lane;
  return f;
}

// Vehicles moving at constant speed for `frames` frames starting at frame 1.
struct Mover {
  int id;
  double x0;
  int lane;
  double vx;
  double length = 4.5;
};

inline data::Recording constant_speed_recording(const std::vector<Mover>& movers, int frames,
                                                double road_length = 2000.0) {
  data::TrackMeta meta;
  meta.road_length = road_length;
  std::vector<data::VehicleFrame> rows;
  for (int f = 1; f <= frames; ++f) {
    for (const auto& m : movers) rows.push_back(vehicle(f, m.id, m.x0 + m.vx * (f - 1) / 25.0, m.lane, m.vx, m.length));
  }
  std::stable_sort(rows.begin(), rows.end(), data::frame_order);
  return data::make_recording(meta, std::move(rows));
}

// Inverse-sine toy: y ~ U(0,1), x = y + 0.3 sin(2 pi y) + U(-0.1, 0.1); the
// task predicts y from x, which is multivalued for x near 0.5.
inline bc::Regression inverse_sine(int n, std::uint64_t seed) {
  auto rng = make_rng(seed, 0x51eeULL);
  bc::Regression r;
  r.x.resize(1, n);
  r.y.resize(1, n);
  for (int i = 0; i < n; ++i) {
    const double y = uniform(rng, 0.0, 1.0);
    r.y(0, i) = y;
    r.x(0, i) = y + 0.3 * std::sin(2.0 * std::numbers::pi * y) + uniform(rng, -0.1, 0.1);
  }
  return r;
}

}  // namespace driveclone::testing
