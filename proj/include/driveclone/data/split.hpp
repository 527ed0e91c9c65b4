#pragma once

#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "driveclone/data/recording.hpp"
#include "driveclone/error.hpp"
#include "driveclone/rng.hpp"

namespace driveclone::data {

struct DatasetSplit {
  std::vector<Recording> train;
  std::vector<Recording> test;
};

// Seeded draw of disjoint train and test sets. Recordings are identified by
// track_id, which must be unique across the input.
inline DatasetSplit split_dataset(const std::vector<Recording>& recordings, std::size_t n_train, std::size_t n_test,
                                  std::uint64_t seed) {
  if (n_train + n_test > recordings.size()) {
    throw InsufficientRecordings("requested " + std::to_string(n_train) + "+" + std::to_string(n_test) +
                                 " from " + std::to_string(recordings.size()));
  }
  std::set<int> ids;
  for (const auto& r : recordings) {
    if (!ids.insert(r.track_id).second) throw InvalidConfig("duplicate track_id " + std::to_string(r.track_id));
  }
  std::vector<std::size_t> order(recordings.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_rng(seed, 0x5711ULL);
  shuffle(order, rng);

  DatasetSplit split;
  for (std::size_t i = 0; i < n_train; ++i) split.train.push_back(recordings[order[i]]);
  for (std::size_t i = n_train; i < n_train + n_test; ++i) split.test.push_back(recordings[order[i]]);
  return split;
}

}  // namespace driveclone::data
