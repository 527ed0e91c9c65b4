#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "driveclone/error.hpp"
#include "driveclone/text.hpp"

namespace driveclone {

// Training curve plus the run's identity. The CSV form leaves out the wall
// clock so repeated runs produce identical bytes.
struct TrainReport {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> hyperparameters;
  double wall_clock_seconds = 0.0;

  void add(std::vector<double> row) {
    if (row.size() != columns.size()) throw ShapeMismatch("report row width");
    rows.push_back(std::move(row));
  }

  std::vector<double> column(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c] != name) continue;
      std::vector<double> out;
      for (const auto& r : rows) out.push_back(r[c]);
      return out;
    }
    throw InvalidConfig("report has no column '" + name + "'");
  }

  double last(const std::string& name) const {
    const auto c = column(name);
    if (c.empty()) throw EmptyDataset("report has no rows");
    return c.back();
  }

  std::string to_csv() const {
    std::string out;
    for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + columns[c];
    out += '\n';
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < r.size(); ++c) {
        if (c) out += ',';
        // counters print as integers
        out += (c == 0 && r[c] == std::floor(r[c])) ? std::to_string(static_cast<long long>(r[c])) : text::exact(r[c]);
      }
      out += '\n';
    }
    return out;
  }
};

}  // namespace driveclone
