#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "driveclone/data/recording.hpp"
#include "driveclone/error.hpp"
#include "driveclone/sim/observation.hpp"
#include "driveclone/text.hpp"

namespace driveclone::data {

struct Demonstration {
  sim::Observation observation;
  sim::Action action;
  int vehicle_id = 0;
  int frame = 0;
  int track_id = 0;
};

// The recorded vehicle plays the ego: one (observation, recorded acceleration)
// pair per frame, except its last frame (which has no successor state).
inline std::vector<Demonstration> extract_demonstrations(const Recording& rec, int vehicle_id,
                                                         const sim::ObservationSpec& spec,
                                                         const FrameIndex& index) {
  const auto rows = vehicle_rows(rec, vehicle_id);
  if (rows.empty()) throw UnknownVehicle("vehicle " + std::to_string(vehicle_id) + " not in track " +
                                         std::to_string(rec.track_id));
  std::vector<Demonstration> demos;
  demos.reserve(rows.size() - 1);
  for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
    const auto& f = rec.frames[rows[k]];
    Demonstration d;
    d.observation = sim::observe(index, f.frame, sim::ego_from_frame(f), spec, vehicle_id);
    d.action = {f.x_acceleration, f.y_acceleration};
    d.vehicle_id = vehicle_id;
    d.frame = f.frame;
    d.track_id = rec.track_id;
    demos.push_back(std::move(d));
  }
  return demos;
}

inline std::vector<Demonstration> extract_demonstrations(const Recording& rec, int vehicle_id,
                                                         const sim::ObservationSpec& spec) {
  return extract_demonstrations(rec, vehicle_id, spec, FrameIndex(rec));
}

// Every vehicle of every recording, in (track order, vehicle id) order.
inline std::vector<Demonstration> extract_all_demonstrations(const std::vector<Recording>& recs,
                                                             const sim::ObservationSpec& spec) {
  std::vector<Demonstration> all;
  for (const auto& rec : recs) {
    const FrameIndex index(rec);
    for (int id : vehicle_ids(rec)) {
      auto d = extract_demonstrations(rec, id, spec, index);
      all.insert(all.end(), std::make_move_iterator(d.begin()), std::make_move_iterator(d.end()));
    }
  }
  return all;
}

// "track_id,vehicle_id,frame,obs_0..obs_{n-1},a_long,a_lat"
inline std::string serialize_demonstrations(const std::vector<Demonstration>& demos) {
  const int width = demos.empty() ? 0 : static_cast<int>(demos.front().observation.size());
  std::string out = "track_id,vehicle_id,frame";
  for (int i = 0; i < width; ++i) out += ",obs_" + std::to_string(i);
  out += ",a_long,a_lat\n";
  for (const auto& d : demos) {
    out += std::to_string(d.track_id) + ',' + std::to_string(d.vehicle_id) + ',' + std::to_string(d.frame);
    for (Eigen::Index i = 0; i < d.observation.size(); ++i) out += ',' + text::exact(d.observation[i]);
    out += ',' + text::exact(d.action.a_long) + ',' + text::exact(d.action.a_lat) + '\n';
  }
  return out;
}

inline std::vector<Demonstration> parse_demonstrations(std::string_view csv) {
  const auto rows = text::lines(csv);
  if (rows.empty()) throw MissingColumn("track_id");
  const auto header = text::split(rows[0], ',');
  if (header.size() < 5 || text::trim(header[0]) != "track_id" || text::trim(header[1]) != "vehicle_id" ||
      text::trim(header[2]) != "frame" || text::trim(header[header.size() - 2]) != "a_long" ||
      text::trim(header.back()) != "a_lat") {
    throw MissingColumn("demonstration header must be track_id,vehicle_id,frame,obs_*,a_long,a_lat");
  }
  const auto width = static_cast<Eigen::Index>(header.size() - 5);
  std::vector<Demonstration> demos;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (text::trim(rows[r]).empty()) continue;
    const auto cells = text::split(rows[r], ',');
    const auto line = "line " + std::to_string(r + 1);
    if (cells.size() != header.size()) throw MalformedRow(line + ": wrong field count");
    auto num = [&](std::size_t c) {
      const auto v = text::parse_double(cells[c]);
      if (!v) throw MalformedRow(line + ": bad number");
      return *v;
    };
    auto integer = [&](std::size_t c) {
      const auto v = text::parse_int(cells[c]);
      if (!v) throw MalformedRow(line + ": bad integer");
      return static_cast<int>(*v);
    };
    Demonstration d;
    d.track_id = integer(0);
    d.vehicle_id = integer(1);
    d.frame = integer(2);
    d.observation.resize(width);
    for (Eigen::Index i = 0; i < width; ++i) d.observation[i] = num(3 + static_cast<std::size_t>(i));
    d.action = {num(cells.size() - 2), num(cells.size() - 1)};
    demos.push_back(std::move(d));
  }
  return demos;
}

}  // namespace driveclone::data
