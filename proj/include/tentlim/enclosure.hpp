#pragma once

// Closed interval arithmetic over binary64 with outward rounding.
//
// Every operation returns an interval that contains the exact real result.
// Directed rounding is realized by widening each computed bound one ulp
// outward, which dominates the half-ulp error of a correctly rounded
// IEEE-754 operation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tentlim {

inline double next_down(double x) {
  return std::nextafter(x, -std::numeric_limits<double>::infinity());
}

inline double next_up(double x) {
  return std::nextafter(x, std::numeric_limits<double>::infinity());
}

struct Ival {
  double lo = 0.0;
  double hi = 0.0;

  Ival() = default;
  Ival(double lo_, double hi_) : lo(lo_), hi(hi_) {
    if (!(lo <= hi)) throw std::invalid_argument("Ival: lo > hi");
  }

  static Ival point(double x) { return Ival(x, x); }
  static Ival hull(double a, double b) { return Ival(std::min(a, b), std::max(a, b)); }

  double mid() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }

  bool contains(double x) const { return lo <= x && x <= hi; }
  bool contains(const Ival& o) const { return lo <= o.lo && o.hi <= hi; }
  bool intersects(const Ival& o) const { return lo <= o.hi && o.lo <= hi; }

  bool certainly_lt(double x) const { return hi < x; }
  bool certainly_gt(double x) const { return lo > x; }
  bool certainly_lt(const Ival& o) const { return hi < o.lo; }
  bool certainly_gt(const Ival& o) const { return lo > o.hi; }
};

inline Ival outward(double lo, double hi) { return Ival(next_down(lo), next_up(hi)); }

inline Ival operator+(const Ival& a, const Ival& b) {
  return outward(a.lo + b.lo, a.hi + b.hi);
}

inline Ival operator-(const Ival& a, const Ival& b) {
  return outward(a.lo - b.hi, a.hi - b.lo);
}

inline Ival operator-(const Ival& a) { return Ival(-a.hi, -a.lo); }

inline Ival operator*(const Ival& a, const Ival& b) {
  const double p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo, p4 = a.hi * b.hi;
  return outward(std::min(std::min(p1, p2), std::min(p3, p4)),
                 std::max(std::max(p1, p2), std::max(p3, p4)));
}

inline Ival operator/(const Ival& a, const Ival& b) {
  if (b.contains(0.0)) throw std::domain_error("Ival: division by interval containing 0");
  const double q1 = a.lo / b.lo, q2 = a.lo / b.hi, q3 = a.hi / b.lo, q4 = a.hi / b.hi;
  return outward(std::min(std::min(q1, q2), std::min(q3, q4)),
                 std::max(std::max(q1, q2), std::max(q3, q4)));
}

inline Ival operator+(const Ival& a, double b) { return a + Ival::point(b); }
inline Ival operator+(double a, const Ival& b) { return Ival::point(a) + b; }
inline Ival operator-(const Ival& a, double b) { return a - Ival::point(b); }
inline Ival operator-(double a, const Ival& b) { return Ival::point(a) - b; }
inline Ival operator*(const Ival& a, double b) { return a * Ival::point(b); }
inline Ival operator*(double a, const Ival& b) { return Ival::point(a) * b; }
inline Ival operator/(const Ival& a, double b) { return a / Ival::point(b); }

// Hull of two intervals.
inline Ival join(const Ival& a, const Ival& b) {
  return Ival(std::min(a.lo, b.lo), std::max(a.hi, b.hi));
}

}  // namespace tentlim
