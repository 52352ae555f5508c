#pragma once

// Finite-depth threads (compatible backward orbits) and interval threads of
// the core tent map, flatness testing, the efficient 0-flat decomposition,
// and the two arc metrics.
//
// Everything here is a depth-N truncation of an object living in the inverse
// limit; verdicts that depend on the infinite tail carry either a depth stamp
// or an explicit tail enclosure.

#include <optional>
#include <vector>

#include "tentlim/core_map.hpp"

namespace tentlim {

struct FiniteThread {
  // coords[i] = x_i with f(x_{i+1}) = x_i.
  std::vector<double> coords;

  int depth() const { return static_cast<int>(coords.size()) - 1; }
  double project(int n) const { return coords.at(static_cast<std::size_t>(n)); }
};

// Validates the compatibility relation to tolerance tol.
FiniteThread make_thread(const TentParams& p, std::vector<double> coords, double tol = 1e-9);

struct IntervalThread {
  // levels[i] = J_i with f(J_{i+1}) = J_i exactly.
  std::vector<Interval> levels;

  int depth() const { return static_cast<int>(levels.size()) - 1; }
};

IntervalThread make_interval_thread(const TentParams& p, std::vector<Interval> levels,
                                    double tol = 1e-9);

// Forward shift prepends f(x_0); depth grows by one unless keep_depth drops
// the deepest coordinate.
FiniteThread shift_forward(const TentParams& p, const FiniteThread& t, bool keep_depth = false);
IntervalThread shift_forward(const TentParams& p, const IntervalThread& t);

// Backward shift drops the head and appends the chosen preimage of the
// deepest coordinate.  Throws when the left branch is requested below 2-s.
FiniteThread shift_backward(const TentParams& p, const FiniteThread& t, Branch b);

// True iff c avoids the interior of every level past m (depth-truncated
// verdict).  Interior containment is decided at resolution kFlatTol: a level
// grazing c within that distance counts as touching, not folding, which is
// what exact coincidences (e.g. f(0) = c at the golden slope) round to.
inline constexpr double kFlatTol = 1e-12;

bool is_m_flat(const TentParams& p, const IntervalThread& t, int m);

struct Decomposition {
  std::vector<IntervalThread> pieces;  // 0-flat, ordered left to right at level m
  std::vector<FiniteThread> nodes;     // shared endpoints; node k joins pieces k, k+1
};

// The efficient 0-flat decomposition of an m-flat interval thread: pieces are
// the monotonicity intervals of f^m on level m, lifted through the deeper
// levels by the unique monotone pullback.
Decomposition flat_decompose(const TentParams& p, const IntervalThread& t, int m);

// Points z with f^k(z) = c for some 0 <= k <= max_order, sorted; points
// closer than merge_tol are collapsed (distinct orders can hit the same point
// up to rounding).
std::vector<double> crit_preimages(const TentParams& p, int max_order,
                                   double merge_tol = kFlatTol);

// Arc length at level 0 summed over the 0-flat decomposition, with a
// first-order rounding allowance folded into the enclosure.
Ival rho(const TentParams& p, const IntervalThread& t, int m);

// Inverse-limit metric between equal-depth threads: the truncated sum is the
// lower bound and the geometric tail 2^{-(N-1)} is added for the upper bound.
Ival dhat(const FiniteThread& a, const FiniteThread& b);

struct DensityRadius {
  int level;      // largest l with J_l = [0,1]
  double radius;  // 2^{-l}
};

// Density radius of a flat thread, or nullopt if no level is the full core.
// Also checks the length consequence rho >= s^l and throws if it fails.
std::optional<DensityRadius> epsilon_density_radius(const TentParams& p,
                                                    const IntervalThread& t);

// The thread through base point x0 inside a 0-flat interval thread (unique
// monotone lift level by level).
FiniteThread thread_through(const TentParams& p, const IntervalThread& t, double x0);

// Smallest m such that the thread is m-flat, or nullopt if even the deepest
// level fails.
std::optional<int> flat_level(const TentParams& p, const IntervalThread& t);

}  // namespace tentlim
