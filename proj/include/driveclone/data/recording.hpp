#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "driveclone/error.hpp"
#include "driveclone/text.hpp"

namespace driveclone::data {

// One row of a HighD-style tracks file. x, y locate the top-left corner of the
// bounding box in road coordinates; width is the longitudinal length and
// height the lateral extent.
struct VehicleFrame {
  int frame = 1;
  int vehicle_id = 0;
  double x = 0.0;
  double y = 0.0;
  double width = 0.0;
  double height = 0.0;
  double x_velocity = 0.0;
  double y_velocity = 0.0;
  double x_acceleration = 0.0;
  double y_acceleration = 0.0;
  int lane_id = 1;

  double center_x() const { return x + 0.5 * width; }
  double center_y() const { return y + 0.5 * height; }

  friend bool operator==(const VehicleFrame&, const VehicleFrame&) = default;
};

// Road geometry and identity that the tracks file itself does not carry.
struct TrackMeta {
  int track_id = 0;
  double road_length = 420.0;
  std::vector<double> lane_boundaries = {0.0, 3.75, 7.5, 11.25};
  double frame_rate = 25.0;
};

struct Recording {
  int track_id = 0;
  std::vector<VehicleFrame> frames;  // sorted by (frame, vehicle_id)
  double road_length = 420.0;
  std::vector<double> lane_boundaries = {0.0, 3.75, 7.5, 11.25};
  double frame_rate = 25.0;

  int lane_count() const { return std::max(0, static_cast<int>(lane_boundaries.size()) - 1); }
  double dt() const { return 1.0 / frame_rate; }
  bool empty() const { return frames.empty(); }
  int first_frame() const { return frames.empty() ? 0 : frames.front().frame; }
  int last_frame() const { return frames.empty() ? 0 : frames.back().frame; }

  TrackMeta meta() const { return {track_id, road_length, lane_boundaries, frame_rate}; }

  friend bool operator==(const Recording&, const Recording&) = default;
};

inline Recording make_recording(const TrackMeta& meta, std::vector<VehicleFrame> frames = {}) {
  Recording rec;
  rec.track_id = meta.track_id;
  rec.road_length = meta.road_length;
  rec.lane_boundaries = meta.lane_boundaries;
  rec.frame_rate = meta.frame_rate;
  rec.frames = std::move(frames);
  return rec;
}

inline bool frame_order(const VehicleFrame& a, const VehicleFrame& b) {
  return a.frame != b.frame ? a.frame < b.frame : a.vehicle_id < b.vehicle_id;
}

// Lane whose [lower, upper) lateral interval contains y, 1-based.
inline std::optional<int> lane_at(std::span<const double> boundaries, double y) {
  for (std::size_t i = 0; i + 1 < boundaries.size(); ++i) {
    if (y >= boundaries[i] && y < boundaries[i + 1]) return static_cast<int>(i) + 1;
  }
  return std::nullopt;
}

inline double lane_center(std::span<const double> boundaries, int lane_id) {
  const auto i = static_cast<std::size_t>(lane_id - 1);
  return 0.5 * (boundaries[i] + boundaries[i + 1]);
}

inline double lane_width(std::span<const double> boundaries, int lane_id) {
  const auto i = static_cast<std::size_t>(lane_id - 1);
  return boundaries[i + 1] - boundaries[i];
}

// Random access to the vehicles present at each frame of a sorted Recording.
class FrameIndex {
 public:
  FrameIndex() = default;
  explicit FrameIndex(const Recording& rec) : rec_(&rec) {
    if (rec.frames.empty()) return;
    first_ = rec.first_frame();
    const int last = rec.last_frame();
    offsets_.assign(static_cast<std::size_t>(last - first_ + 2), 0);
    std::size_t i = 0;
    for (int f = first_; f <= last; ++f) {
      offsets_[static_cast<std::size_t>(f - first_)] = i;
      while (i < rec.frames.size() && rec.frames[i].frame == f) ++i;
    }
    offsets_.back() = rec.frames.size();
  }

  bool has_frame(int frame) const {
    return !offsets_.empty() && frame >= first_ && frame < first_ + static_cast<int>(offsets_.size()) - 1;
  }

  std::span<const VehicleFrame> at(int frame) const {
    if (!has_frame(frame)) return {};
    const auto k = static_cast<std::size_t>(frame - first_);
    return std::span<const VehicleFrame>(rec_->frames).subspan(offsets_[k], offsets_[k + 1] - offsets_[k]);
  }

  const Recording& recording() const { return *rec_; }

 private:
  const Recording* rec_ = nullptr;
  int first_ = 0;
  std::vector<std::size_t> offsets_;
};

// Indices into rec.frames for one vehicle, in frame order.
inline std::vector<std::size_t> vehicle_rows(const Recording& rec, int vehicle_id) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < rec.frames.size(); ++i) {
    if (rec.frames[i].vehicle_id == vehicle_id) rows.push_back(i);
  }
  return rows;
}

inline std::vector<int> vehicle_ids(const Recording& rec) {
  std::vector<int> ids;
  ids.reserve(rec.frames.size());
  for (const auto& f : rec.frames) ids.push_back(f.vehicle_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::array<std::string_view, 11> kTrackColumns = {
    "frame", "id", "x", "y", "width", "height",
    "xVelocity", "yVelocity", "xAcceleration", "yAcceleration", "laneId"};

namespace detail {

inline void check_contiguity(const std::vector<VehicleFrame>& sorted_frames) {
  std::map<int, int> last_seen;
  std::vector<VehicleFrame> by_vehicle = sorted_frames;
  std::stable_sort(by_vehicle.begin(), by_vehicle.end(), [](const auto& a, const auto& b) {
    return a.vehicle_id != b.vehicle_id ? a.vehicle_id < b.vehicle_id : a.frame < b.frame;
  });
  for (std::size_t i = 1; i < by_vehicle.size(); ++i) {
    const auto& prev = by_vehicle[i - 1];
    const auto& cur = by_vehicle[i];
    if (prev.vehicle_id == cur.vehicle_id && cur.frame > prev.frame + 1) {
      throw NonContiguousVehicle("vehicle " + std::to_string(cur.vehicle_id) + " jumps from frame " +
                                 std::to_string(prev.frame) + " to " + std::to_string(cur.frame));
    }
  }
}

}  // namespace detail

// Parses a tracks file. Columns are located by header name; unknown columns
// are ignored and reported through `warnings`. Rows are re-sorted by
// (frame, vehicle_id).
inline Recording parse_tracks(std::string_view csv_text, const TrackMeta& meta,
                              std::vector<std::string>* warnings = nullptr) {
  const auto rows = text::lines(csv_text);
  if (rows.empty()) throw MissingColumn(std::string(kTrackColumns[0]));

  const auto header = text::split(rows[0], ',');
  std::array<int, kTrackColumns.size()> col{};
  col.fill(-1);
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = text::trim(header[c]);
    const auto it = std::find(kTrackColumns.begin(), kTrackColumns.end(), name);
    if (it != kTrackColumns.end()) {
      col[static_cast<std::size_t>(it - kTrackColumns.begin())] = static_cast<int>(c);
    } else if (warnings) {
      warnings->push_back("ignoring column '" + std::string(name) + "'");
    }
  }
  for (std::size_t k = 0; k < kTrackColumns.size(); ++k) {
    if (col[k] < 0) throw MissingColumn(std::string(kTrackColumns[k]));
  }

  std::vector<VehicleFrame> frames;
  frames.reserve(rows.size());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (text::trim(rows[r]).empty()) continue;
    const auto cells = text::split(rows[r], ',');
    const auto line_no = std::to_string(r + 1);
    if (cells.size() != header.size()) throw MalformedRow("line " + line_no + ": wrong field count");
    auto num = [&](std::size_t k) {
      const auto v = text::parse_double(cells[static_cast<std::size_t>(col[k])]);
      if (!v || !std::isfinite(*v)) throw MalformedRow("line " + line_no + ": bad " + std::string(kTrackColumns[k]));
      return *v;
    };
    auto integer = [&](std::size_t k) {
      const auto v = text::parse_int(cells[static_cast<std::size_t>(col[k])]);
      if (!v) throw MalformedRow("line " + line_no + ": bad " + std::string(kTrackColumns[k]));
      return static_cast<int>(*v);
    };
    VehicleFrame f;
    f.frame = integer(0);
    f.vehicle_id = integer(1);
    f.x = num(2);
    f.y = num(3);
    f.width = num(4);
    f.height = num(5);
    f.x_velocity = num(6);
    f.y_velocity = num(7);
    f.x_acceleration = num(8);
    f.y_acceleration = num(9);
    f.lane_id = integer(10);
    frames.push_back(f);
  }
  std::stable_sort(frames.begin(), frames.end(), frame_order);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].frame == frames[i - 1].frame && frames[i].vehicle_id == frames[i - 1].vehicle_id) {
      throw MalformedRow("duplicate (frame " + std::to_string(frames[i].frame) + ", id " +
                         std::to_string(frames[i].vehicle_id) + ")");
    }
  }
  detail::check_contiguity(frames);
  return make_recording(meta, std::move(frames));
}

// Writes the 11-column schema; every double in its shortest exact form so a
// parse of the output reproduces the Recording field for field.
inline std::string serialize_tracks(const Recording& rec) {
  std::string out;
  for (std::size_t k = 0; k < kTrackColumns.size(); ++k) {
    if (k) out += ',';
    out += kTrackColumns[k];
  }
  out += '\n';
  for (const auto& f : rec.frames) {
    out += std::to_string(f.frame);
    out += ',';
    out += std::to_string(f.vehicle_id);
    for (double v : {f.x, f.y, f.width, f.height, f.x_velocity, f.y_velocity, f.x_acceleration, f.y_acceleration}) {
      out += ',';
      out += text::exact(v);
    }
    out += ',';
    out += std::to_string(f.lane_id);
    out += '\n';
  }
  return out;
}

// Sidecar "key=value" file carrying the TrackMeta of a serialized recording.
inline std::string serialize_meta(const TrackMeta& meta) {
  std::string out = "track_id=" + std::to_string(meta.track_id) + "\n";
  out += "road_length=" + text::exact(meta.road_length) + "\n";
  out += "frame_rate=" + text::exact(meta.frame_rate) + "\n";
  out += "lane_boundaries=";
  for (std::size_t i = 0; i < meta.lane_boundaries.size(); ++i) {
    if (i) out += ';';
    out += text::exact(meta.lane_boundaries[i]);
  }
  out += "\n";
  return out;
}

inline TrackMeta parse_meta(std::string_view body) {
  TrackMeta meta;
  for (const auto& line : text::lines(body)) {
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw MalformedRow("meta line without '=': " + std::string(t));
    const auto key = text::trim(t.substr(0, eq));
    const auto value = text::trim(t.substr(eq + 1));
    auto number = [&] {
      const auto v = text::parse_double(value);
      if (!v) throw MalformedRow("meta value for " + std::string(key));
      return *v;
    };
    if (key == "track_id") {
      meta.track_id = static_cast<int>(number());
    } else if (key == "road_length") {
      meta.road_length = number();
    } else if (key == "frame_rate") {
      meta.frame_rate = number();
    } else if (key == "lane_boundaries") {
      meta.lane_boundaries.clear();
      for (auto cell : text::split(value, ';')) {
        const auto v = text::parse_double(cell);
        if (!v) throw MalformedRow("meta lane boundary '" + std::string(cell) + "'");
        meta.lane_boundaries.push_back(*v);
      }
    } else {
      throw MalformedRow("unknown meta key " + std::string(key));
    }
  }
  return meta;
}

// ---------------------------------------------------------------------------
// Validation

struct Finding {
  enum class Severity { error, warning };
  Severity severity = Severity::error;
  std::string location;
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;

  bool ok() const { return findings.empty(); }

  // One "SEVERITY:location:message" line per finding.
  std::string to_text() const {
    std::string out;
    for (const auto& f : findings) {
      out += f.severity == Finding::Severity::error ? "ERROR" : "WARNING";
      out += ':' + f.location + ':' + f.message + '\n';
    }
    return out;
  }
};

inline ValidationReport validate_recording(const Recording& rec) {
  ValidationReport report;
  auto error = [&](std::string loc, std::string msg) {
    report.findings.push_back({Finding::Severity::error, std::move(loc), std::move(msg)});
  };
  auto where = [](const VehicleFrame& f) {
    return "frame=" + std::to_string(f.frame) + ",id=" + std::to_string(f.vehicle_id);
  };

  if (!(rec.frame_rate > 0.0)) error("track=" + std::to_string(rec.track_id), "frame_rate must be positive");
  if (!(rec.road_length > 0.0)) error("track=" + std::to_string(rec.track_id), "road_length must be positive");
  if (rec.lane_boundaries.size() < 2) error("track=" + std::to_string(rec.track_id), "need at least one lane");
  for (std::size_t i = 1; i < rec.lane_boundaries.size(); ++i) {
    if (!(rec.lane_boundaries[i] > rec.lane_boundaries[i - 1])) {
      error("track=" + std::to_string(rec.track_id), "lane boundaries not strictly increasing");
      break;
    }
  }

  for (std::size_t i = 0; i < rec.frames.size(); ++i) {
    const auto& f = rec.frames[i];
    if (f.frame < 1) error(where(f), "frame must be >= 1");
    if (!(f.width > 0.0)) error(where(f), "width must be positive");
    if (!(f.height > 0.0)) error(where(f), "height must be positive");
    if (f.lane_id < 1) error(where(f), "lane_id must be >= 1");
    if (!(f.x >= 0.0 && f.x <= rec.road_length)) error(where(f), "x outside [0, road_length]");
    for (double v : {f.x, f.y, f.width, f.height, f.x_velocity, f.y_velocity, f.x_acceleration, f.y_acceleration}) {
      if (!std::isfinite(v)) {
        error(where(f), "non-finite field");
        break;
      }
    }
    if (i > 0) {
      const auto& p = rec.frames[i - 1];
      if (p.frame == f.frame && p.vehicle_id == f.vehicle_id) {
        error(where(f), "duplicate (frame, vehicle_id) pair (" + std::to_string(f.frame) + ", " +
                            std::to_string(f.vehicle_id) + ")");
      } else if (frame_order(f, p)) {
        error(where(f), "rows not ordered by (frame, vehicle_id)");
      }
    }
  }

  std::map<int, std::vector<int>> frames_of;
  for (const auto& f : rec.frames) frames_of[f.vehicle_id].push_back(f.frame);
  for (auto& [id, fs] : frames_of) {
    std::sort(fs.begin(), fs.end());
    for (std::size_t i = 1; i < fs.size(); ++i) {
      if (fs[i] > fs[i - 1] + 1) {
        error("id=" + std::to_string(id), "frames not contiguous between " + std::to_string(fs[i - 1]) + " and " +
                                              std::to_string(fs[i]));
        break;
      }
    }
  }
  return report;
}

}  // namespace driveclone::data
