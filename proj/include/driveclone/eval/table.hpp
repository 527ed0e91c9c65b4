#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "driveclone/error.hpp"
#include "driveclone/eval/metrics.hpp"
#include "driveclone/text.hpp"

namespace driveclone::eval {

inline constexpr std::string_view kTableHeader =
    "policy,collisions,velocity_kmph,acceleration,lane_changes,lane_change_rate,episodes";

inline std::string table_csv(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw InvalidConfig("comparison table needs at least one row");
  std::string out(kTableHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += r.policy + ',' + text::sig6(r.collisions) + ',' + text::sig6(r.velocity_kmph) + ',' +
           text::sig6(r.acceleration) + ',' + std::to_string(r.lane_changes) + ',' +
           text::sig6(r.episodes ? r.lane_change_rate() : 0.0) + ',' + std::to_string(r.episodes) + '\n';
  }
  return out;
}

inline std::string profiles_csv(const std::vector<TrackProfile>& profiles) {
  std::string out = "Track,expert_vel_kmph,expert_acc";
  const auto* first = profiles.empty() ? nullptr : &profiles.front();
  if (first)
    for (const auto& [name, m] : first->policies) out += ',' + name + "_vel_kmph," + name + "_acc";
  out += '\n';
  for (const auto& p : profiles) {
    if (p.policies.size() != first->policies.size()) throw ShapeMismatch("profiles disagree on the policy set");
    out += std::to_string(p.track_id) + ',' + text::sig6(p.expert_vel_kmph) + ',' + text::sig6(p.expert_acc);
    for (const auto& [name, m] : p.policies) out += ',' + text::sig6(m.vel_kmph) + ',' + text::sig6(m.acc);
    out += '\n';
  }
  return out;
}

namespace detail {

inline double number(std::string_view s, const std::string& what) {
  auto v = text::parse_double(s);
  if (!v) throw ShapeMismatch("not a number in " + what + ": '" + std::string(s) + "'");
  return *v;
}

inline long integer(std::string_view s, const std::string& what) {
  auto v = text::parse_int(s);
  if (!v) throw ShapeMismatch("not an integer in " + what + ": '" + std::string(s) + "'");
  return static_cast<long>(*v);
}

}  // namespace detail

inline std::vector<MetricsRow> parse_table(std::string_view csv) {
  const auto ls = text::lines(csv);
  if (ls.empty() || text::trim(ls.front()) != kTableHeader) throw ShapeMismatch("comparison table header");
  std::vector<MetricsRow> rows;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    if (text::trim(ls[i]).empty()) continue;
    const auto f = text::split(text::trim(ls[i]), ',');
    if (f.size() != 7) throw ShapeMismatch("table row " + std::to_string(i) + " has " + std::to_string(f.size()) + " fields");
    MetricsRow r;
    r.policy = std::string(f[0]);
    r.collisions = detail::number(f[1], "collisions");
    r.velocity_kmph = detail::number(f[2], "velocity_kmph");
    r.acceleration = detail::number(f[3], "acceleration");
    r.lane_changes = detail::integer(f[4], "lane_changes");
    r.episodes = detail::integer(f[6], "episodes");
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<TrackProfile> parse_profiles(std::string_view csv) {
  const auto ls = text::lines(csv);
  if (ls.empty()) throw ShapeMismatch("empty profile csv");
  const auto head = text::split(text::trim(ls.front()), ',');
  if (head.size() < 3 || head[0] != "Track" || head[1] != "expert_vel_kmph" || head[2] != "expert_acc" ||
      (head.size() - 3) % 2 != 0)
    throw ShapeMismatch("profile header");
  std::vector<std::string> names;
  for (std::size_t c = 3; c < head.size(); c += 2) {
    const std::string_view v = head[c];
    constexpr std::string_view suffix = "_vel_kmph";
    if (v.size() <= suffix.size() || v.substr(v.size() - suffix.size()) != suffix) throw ShapeMismatch("profile header");
    std::string name(v.substr(0, v.size() - suffix.size()));
    if (head[c + 1] != name + "_acc") throw ShapeMismatch("profile header");
    names.push_back(std::move(name));
  }
  std::vector<TrackProfile> out;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    if (text::trim(ls[i]).empty()) continue;
    const auto f = text::split(text::trim(ls[i]), ',');
    if (f.size() != head.size()) throw ShapeMismatch("profile row " + std::to_string(i));
    TrackProfile p;
    p.track_id = static_cast<int>(detail::integer(f[0], "Track"));
    p.expert_vel_kmph = detail::number(f[1], "expert_vel_kmph");
    p.expert_acc = detail::number(f[2], "expert_acc");
    for (std::size_t k = 0; k < names.size(); ++k)
      p.policies.emplace_back(names[k], PolicyMean{detail::number(f[3 + 2 * k], names[k]), detail::number(f[4 + 2 * k], names[k])});
    out.push_back(std::move(p));
  }
  return out;
}

// Comparison table to `table_path`, per-track profiles to `profile_path`.
inline void export_table(const std::vector<MetricsRow>& rows, const std::vector<TrackProfile>& profiles,
                         const std::string& table_path, const std::string& profile_path) {
  text::write_file(table_path, table_csv(rows));
  text::write_file(profile_path, profiles_csv(profiles));
}

}  // namespace driveclone::eval
