#pragma once

// Shared generators for the property-style tests: seeded random intervals,
// random monotone pullback chains, and random flat arcs.

#include <random>
#include <vector>

#include "tentlim/core_map.hpp"
#include "tentlim/threads.hpp"

namespace tentlim::testing {

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline Interval random_interval(std::mt19937_64& rng, double min_len = 1e-4,
                                double max_len = 0.5) {
  const double len = uniform(rng, min_len, max_len);
  const double lo = uniform(rng, 0.0, 1.0 - len);
  return make_interval(lo, lo + len);
}

// Extends the given level-m interval to total depth by random monotone
// pullbacks; levels above m are forward images.  The result is m-flat by
// construction (single-branch pullbacks never cross c).
inline IntervalThread random_flat_arc(const TentParams& p, std::mt19937_64& rng, int m,
                                      int depth, const Interval& level_m) {
  std::vector<Interval> levels(static_cast<std::size_t>(depth) + 1);
  levels[static_cast<std::size_t>(m)] = level_m;
  for (int i = m + 1; i <= depth; ++i) {
    const Interval& prev = levels[static_cast<std::size_t>(i - 1)];
    auto left = monotone_pullback(p, prev, Branch::left);
    auto right = monotone_pullback(p, prev, Branch::right);
    if (left && (!right || (rng() & 1u))) {
      levels[static_cast<std::size_t>(i)] = *left;
    } else {
      levels[static_cast<std::size_t>(i)] = *right;
    }
  }
  for (int i = m - 1; i >= 0; --i) {
    levels[static_cast<std::size_t>(i)] = image_interval(p, levels[static_cast<std::size_t>(i + 1)]);
  }
  return IntervalThread{std::move(levels)};
}

inline IntervalThread random_flat_arc(const TentParams& p, std::mt19937_64& rng, int m,
                                      int depth) {
  return random_flat_arc(p, rng, m, depth, random_interval(rng));
}

}  // namespace tentlim::testing
