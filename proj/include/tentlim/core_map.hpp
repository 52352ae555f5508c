#pragma once

// Arithmetic for the normalized core tent map.
//
// The map has slope s in [sqrt(2), 2] and critical point c = 1 - 1/s, with
// branches
//
//     f(x) = s*x + (2 - s)   on [0, c]   (increasing)
//     f(x) = s*(1 - x)       on [c, 1]   (decreasing)
//
// so that f(c) = 1 and f(1) = 0.  All operations here are pure functions of
// their inputs and safe to call concurrently.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tentlim/enclosure.hpp"

namespace tentlim {

enum class Mode { scalar, enclosure };
enum class Branch { left, right };

inline char branch_char(Branch b) { return b == Branch::left ? 'L' : 'R'; }

struct ConvergenceError : std::runtime_error {
  double residual;
  ConvergenceError(const std::string& what, double r)
      : std::runtime_error(what), residual(r) {}
};

// A computation that cannot decide its verdict within the configured
// truncation (e.g. too much unknown Monte Carlo mass).
struct Inconclusive : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exact descriptor for a slope in a real quadratic field.  The slope is
// s = (sp + sq*sqrt(d))/2 and the critical point c = (cp + cq*sqrt(d))/2;
// field elements (p + q*sqrt(d))/2 with integer p, q are closed under the
// branch maps, which is what makes exact orbit certification possible.
struct QuadSlope {
  std::int64_t d;
  std::int64_t sp, sq;
  std::int64_t cp, cq;
};

inline constexpr double kSqrt2 = 1.4142135623730951;
inline constexpr double kGolden = 1.6180339887498949;

class TentParams {
 public:
  static TentParams from_slope(double s, Mode mode = Mode::scalar);
  static TentParams golden(Mode mode = Mode::scalar);
  static TentParams sqrt2(Mode mode = Mode::scalar);
  static TentParams full_tent(Mode mode = Mode::scalar);  // s = 2

  // Like from_slope, but slopes within `snap_tol` of an algebraic reference
  // slope (golden ratio, sqrt(2), 2) are replaced by the exact one.
  static TentParams snapped(double s, Mode mode = Mode::scalar, double snap_tol = 1e-8);

  double slope() const { return s_; }
  double crit() const { return c_; }
  Mode mode() const { return mode_; }
  Ival slope_iv() const { return s_iv_; }
  Ival crit_iv() const { return c_iv_; }
  const std::optional<QuadSlope>& algebraic() const { return alg_; }

  bool is_sqrt2() const { return s_ == kSqrt2; }
  bool is_full() const { return s_ == 2.0; }
  bool endpoint_slope() const { return is_sqrt2() || is_full(); }

 private:
  TentParams(double s, Mode mode, std::optional<QuadSlope> alg);

  double s_;
  double c_;
  Mode mode_;
  Ival s_iv_;
  Ival c_iv_;
  std::optional<QuadSlope> alg_;
};

// A non-trivial subinterval of [0,1].  Endpoint membership is decided by the
// consumer; the box machinery treats intervals as open.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  double midpoint() const { return 0.5 * (lo + hi); }
  bool contains_interior(double x) const { return lo < x && x < hi; }
  bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
};

Interval make_interval(double lo, double hi);

struct Preimage {
  double point;
  Branch branch;
};

struct MarkovStructure {
  int preperiod = 0;
  int period = 0;
  // Distinct orbit points c, f(c), ..., f^{preperiod+period-1}(c), in orbit order.
  std::vector<double> orbit_points;
  bool certified = false;
};

// Point evaluation.  Throws std::domain_error for x outside [0,1].
double eval(const TentParams& p, double x);

// Enclosure evaluation: returns an interval containing f(x) for every x in
// the input interval (treated as an uncertain point).
Ival eval(const TentParams& p, const Ival& x);

bool has_left_preimage(const TentParams& p, double y);
double left_preimage(const TentParams& p, double y);   // in [0, c], needs y >= 2-s
double right_preimage(const TentParams& p, double y);  // in [c, 1], always

// All preimages of y, right branch first.  At y = 1 the two coincide at c
// and both labels are returned.
std::vector<Preimage> preimages(const TentParams& p, double y);

// Exact image f(J).  |f(J)| = s|J| if c is not interior to J, otherwise
// f(J) = [min(f(lo), f(hi)), 1].
Interval image_interval(const TentParams& p, const Interval& J);

// The monotone-branch preimage of J, i.e. the interval mapped
// homeomorphically onto J by the requested branch.  Empty if J leaves the
// branch range (left branch range is [2-s, 1]).
std::optional<Interval> monotone_pullback(const TentParams& p, const Interval& J, Branch b);

// Connected component of f^{-1}(J) containing `through` (J treated as open).
// Throws if through is not in f^{-1}(J).
Interval pullback_component(const TentParams& p, const Interval& J, double through);

// [c, f(c), ..., f^n(c)]; the first three entries are (c, 1, 0) exactly.
std::vector<double> critical_orbit(const TentParams& p, int n);

// Like critical_orbit, but when the orbit is certified eventually periodic
// the tail is extended by cycling the exact points instead of iterating,
// which would amplify rounding by s per step.
std::vector<double> critical_orbit_stable(const TentParams& p, int n);

// Detects an eventually periodic critical orbit within the first n iterates.
// For parameters carrying an algebraic slope descriptor the search is done in
// exact quadratic-field arithmetic and the result is flagged certified;
// otherwise points are matched within tol and the result is uncertified.
std::optional<MarkovStructure> detect_markov(const TentParams& p, int n, double tol = 1e-12);

// Open components of [0,1] minus the first n+1 critical-orbit points.
// Orbit points closer than cluster_tol are merged before cutting.
std::vector<Interval> complement_components(const TentParams& p, int n,
                                            double cluster_tol = 1e-12);

// Minimal N with f^N(J) = [0,1], by iterating image_interval on the closure.
// Throws for s = sqrt(2), where the covering bound degenerates.
int covering_time(const TentParams& p, const Interval& J);

// ceil(-2 log|J| / log(s^2/2)), the a-priori covering bound.
int covering_time_bound(const TentParams& p, double length);

}  // namespace tentlim
