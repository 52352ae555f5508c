#include "tentlim/core_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tentlim {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// ---------------------------------------------------------------------------
// Exact arithmetic in Z[(1+sqrt(d))/2]-style representations: elements are
// (p + q*sqrt(d))/2 with integer p, q.  Closed under the tent branches for
// the built-in algebraic slopes.  Used only to certify critical orbits.

struct QElem {
  std::int64_t p = 0;
  std::int64_t q = 0;
};

constexpr std::int64_t kCoeffLimit = std::int64_t(1) << 45;

bool coeff_ok(const QElem& x) {
  return std::llabs(x.p) < kCoeffLimit && std::llabs(x.q) < kCoeffLimit;
}

// sign of (p + q*sqrt(d)) / 2; exact.
int qsign(const QElem& x, std::int64_t d) {
  if (x.p == 0 && x.q == 0) return 0;
  if (x.p >= 0 && x.q >= 0) return +1;
  if (x.p <= 0 && x.q <= 0) return -1;
  // Mixed signs: compare p^2 against q^2 d.
  const __int128 lhs = static_cast<__int128>(x.p) * x.p;
  const __int128 rhs = static_cast<__int128>(x.q) * x.q * d;
  if (lhs == rhs) return 0;  // happens when sqrt(d) is rational (d = 4)
  const bool p_pos = x.p > 0;
  if (lhs > rhs) return p_pos ? +1 : -1;
  return p_pos ? -1 : +1;
}

QElem qsub(const QElem& a, const QElem& b) { return {a.p - b.p, a.q - b.q}; }

bool qequal(const QElem& a, const QElem& b, std::int64_t d) {
  return qsign(qsub(a, b), d) == 0;
}

// x * s where s = (sp + sq*sqrt(d))/2.  Returns nullopt on overflow risk or
// if the representation would leave the half-integer lattice.
std::optional<QElem> qmul_s(const QElem& x, const QuadSlope& sl) {
  if (!coeff_ok(x)) return std::nullopt;
  const std::int64_t np = x.p * sl.sp + x.q * sl.sq * sl.d;
  const std::int64_t nq = x.p * sl.sq + x.q * sl.sp;
  if ((np & 1) || (nq & 1)) return std::nullopt;
  return QElem{np / 2, nq / 2};
}

// Branch maps: f_left(x) = s x + (2 - s), f_right(x) = s - s x.
std::optional<QElem> qstep(const QElem& x, const QuadSlope& sl, bool left) {
  auto sx = qmul_s(x, sl);
  if (!sx) return std::nullopt;
  if (left) return QElem{sx->p + 4 - sl.sp, sx->q - sl.sq};
  return QElem{sl.sp - sx->p, sl.sq - sx->q};
}

double qvalue(const QElem& x, std::int64_t d) {
  return 0.5 * (static_cast<double>(x.p) + static_cast<double>(x.q) * std::sqrt(static_cast<double>(d)));
}

}  // namespace

// ---------------------------------------------------------------------------
// TentParams

TentParams::TentParams(double s, Mode mode, std::optional<QuadSlope> alg)
    : s_(s), mode_(mode), alg_(std::move(alg)) {
  if (!(s >= kSqrt2 && s <= 2.0)) {
    throw std::invalid_argument("TentParams: slope must lie in [sqrt(2), 2]");
  }
  c_ = 1.0 - 1.0 / s_;
  s_iv_ = Ival::point(s_);
  c_iv_ = Ival::point(1.0) - Ival::point(1.0) / s_iv_;
}

TentParams TentParams::from_slope(double s, Mode mode) {
  return TentParams(s, mode, std::nullopt);
}

TentParams TentParams::golden(Mode mode) {
  // s^2 = s + 1; s = (1 + sqrt(5))/2, c = 2 - s = (3 - sqrt(5))/2.
  return TentParams(kGolden, mode, QuadSlope{5, 1, 1, 3, -1});
}

TentParams TentParams::sqrt2(Mode mode) {
  // s = sqrt(2) = (0 + 2 sqrt(2))/2, c = 1 - sqrt(2)/2 = (2 - sqrt(2))/2.
  return TentParams(kSqrt2, mode, QuadSlope{2, 0, 2, 2, -1});
}

TentParams TentParams::full_tent(Mode mode) {
  // s = 2 = (0 + 2 sqrt(4))/2, c = 1/2 = (1 + 0)/2.
  return TentParams(2.0, mode, QuadSlope{4, 0, 2, 1, 0});
}

TentParams TentParams::snapped(double s, Mode mode, double snap_tol) {
  if (std::abs(s - kGolden) <= snap_tol) return golden(mode);
  if (std::abs(s - kSqrt2) <= snap_tol) return sqrt2(mode);
  if (std::abs(s - 2.0) <= snap_tol) return full_tent(mode);
  return from_slope(s, mode);
}

// ---------------------------------------------------------------------------
// Intervals

Interval make_interval(double lo, double hi) {
  if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) {
    throw std::invalid_argument("Interval: need 0 <= lo < hi <= 1");
  }
  return Interval{lo, hi};
}

// ---------------------------------------------------------------------------
// Map evaluation and preimages

double eval(const TentParams& p, double x) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw std::domain_error("eval: point outside [0,1]");
  }
  const double s = p.slope();
  double y = (x <= p.crit()) ? s * x + (2.0 - s) : s * (1.0 - x);
  return std::clamp(y, 0.0, 1.0);
}

Ival eval(const TentParams& p, const Ival& x) {
  if (x.hi < -1e-12 || x.lo > 1.0 + 1e-12) {
    throw std::domain_error("eval: enclosure outside [0,1]");
  }
  const Ival s = p.slope_iv();
  const Ival c = p.crit_iv();
  auto left = [&](const Ival& z) { return s * z + (2.0 - s); };
  auto right = [&](const Ival& z) { return s * (1.0 - z); };
  Ival r;
  if (x.certainly_lt(c)) {
    r = left(x);
  } else if (x.certainly_gt(c)) {
    r = right(x);
  } else {
    // Straddles the critical point: the true value lies between the smaller
    // branch value at the endpoints and the maximum f(c) = 1.
    Ival a = left(Ival::point(x.lo));
    Ival b = right(Ival::point(x.hi));
    r = Ival(std::min(a.lo, b.lo), 1.0);
  }
  return Ival(std::clamp(r.lo, 0.0, 1.0), std::clamp(r.hi, 0.0, 1.0));
}

bool has_left_preimage(const TentParams& p, double y) {
  return y >= 2.0 - p.slope();
}

double left_preimage(const TentParams& p, double y) {
  if (!has_left_preimage(p, y)) {
    throw std::domain_error("left_preimage: y below 2 - s");
  }
  return std::clamp((y - (2.0 - p.slope())) / p.slope(), 0.0, p.crit());
}

double right_preimage(const TentParams& p, double y) {
  if (!(y >= 0.0 && y <= 1.0)) {
    throw std::domain_error("right_preimage: point outside [0,1]");
  }
  return std::clamp(1.0 - y / p.slope(), p.crit(), 1.0);
}

std::vector<Preimage> preimages(const TentParams& p, double y) {
  if (!(y >= 0.0 && y <= 1.0)) {
    throw std::domain_error("preimages: point outside [0,1]");
  }
  std::vector<Preimage> out;
  out.push_back({right_preimage(p, y), Branch::right});
  if (has_left_preimage(p, y)) {
    out.push_back({left_preimage(p, y), Branch::left});
  }
  return out;
}

Interval image_interval(const TentParams& p, const Interval& J) {
  const double a = eval(p, J.lo);
  const double b = eval(p, J.hi);
  if (J.contains_interior(p.crit())) {
    return Interval{std::min(a, b), 1.0};
  }
  return Interval{std::min(a, b), std::max(a, b)};
}

std::optional<Interval> monotone_pullback(const TentParams& p, const Interval& J, Branch b) {
  const double lower = 2.0 - p.slope();
  if (b == Branch::left) {
    if (J.lo < lower - 4.0 * kEps) return std::nullopt;
    double lo = left_preimage(p, std::max(J.lo, lower));
    double hi = left_preimage(p, J.hi);
    if (!(lo < hi)) return std::nullopt;
    return Interval{lo, hi};
  }
  double lo = right_preimage(p, J.hi);
  double hi = right_preimage(p, J.lo);
  if (!(lo < hi)) return std::nullopt;
  return Interval{lo, hi};
}

Interval pullback_component(const TentParams& p, const Interval& J, double through) {
  const double fy = eval(p, through);
  if (!(J.lo - 1e-12 < fy && fy < J.hi + 1e-12)) {
    throw std::invalid_argument("pullback_component: point is not in f^{-1}(J)");
  }
  const double c = p.crit();
  const double lower = 2.0 - p.slope();
  if (through < c) {
    double lo = (J.lo <= lower) ? 0.0 : left_preimage(p, J.lo);
    double hi = left_preimage(p, std::min(J.hi, 1.0));
    return Interval{lo, hi};
  }
  // Right-branch component; at through == c the image is 1, which is never
  // interior to an open J, so the guard above has already rejected it.
  double lo = right_preimage(p, J.hi);
  double hi = right_preimage(p, J.lo);
  return Interval{lo, hi};
}

// ---------------------------------------------------------------------------
// Critical orbit, Markov detection, partitions

std::vector<double> critical_orbit(const TentParams& p, int n) {
  if (n < 0) throw std::invalid_argument("critical_orbit: n must be >= 0");
  std::vector<double> orbit;
  orbit.reserve(n + 1);
  orbit.push_back(p.crit());
  if (n >= 1) orbit.push_back(1.0);
  if (n >= 2) orbit.push_back(0.0);
  for (int k = 3; k <= n; ++k) {
    orbit.push_back(eval(p, orbit.back()));
  }
  return orbit;
}

std::vector<double> critical_orbit_stable(const TentParams& p, int n) {
  if (auto ms = detect_markov(p, std::min(n, 64)); ms && ms->certified) {
    std::vector<double> orbit;
    orbit.reserve(n + 1);
    const int cycle = ms->preperiod + ms->period;
    for (int k = 0; k <= n; ++k) {
      const int idx = k < cycle ? k : ms->preperiod + (k - ms->preperiod) % ms->period;
      orbit.push_back(ms->orbit_points[static_cast<std::size_t>(idx)]);
    }
    return orbit;
  }
  return critical_orbit(p, n);
}

std::optional<MarkovStructure> detect_markov(const TentParams& p, int n, double tol) {
  if (n < 1) throw std::invalid_argument("detect_markov: n must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("detect_markov: tol must be positive");

  if (p.algebraic()) {
    // Incremental scan so that short cycles are certified before the aliased
    // integer coordinates can grow toward the overflow guard.
    const QuadSlope& sl = *p.algebraic();
    const QElem c{sl.cp, sl.cq};
    std::vector<QElem> orbit{c};
    bool overflow = false;
    for (int k = 1; k <= n && !overflow; ++k) {
      const QElem& x = orbit.back();
      const int side = qsign(qsub(x, c), sl.d);
      std::optional<QElem> next =
          (side == 0) ? std::optional<QElem>(QElem{2, 0}) : qstep(x, sl, side < 0);
      if (!next || !coeff_ok(*next)) {
        overflow = true;
        break;
      }
      for (int j = 0; j < k; ++j) {
        if (qequal(*next, orbit[static_cast<std::size_t>(j)], sl.d)) {
          MarkovStructure ms;
          ms.preperiod = j;
          ms.period = k - j;
          for (int i = 0; i < k; ++i) {
            ms.orbit_points.push_back(qvalue(orbit[static_cast<std::size_t>(i)], sl.d));
          }
          // Pin the normalized entries exactly.
          ms.orbit_points[0] = p.crit();
          if (k > 1) ms.orbit_points[1] = 1.0;
          if (k > 2) ms.orbit_points[2] = 0.0;
          ms.certified = true;
          return ms;
        }
      }
      orbit.push_back(*next);
    }
    if (!overflow) return std::nullopt;
    // Overflow in the exact engine: fall through to the scalar scan.
  }

  const std::vector<double> orbit = critical_orbit(p, n);
  for (int k = 1; k <= n; ++k) {
    for (int j = 0; j < k; ++j) {
      if (std::abs(orbit[k] - orbit[j]) <= tol) {
        MarkovStructure ms;
        ms.preperiod = j;
        ms.period = k - j;
        ms.orbit_points.assign(orbit.begin(), orbit.begin() + k);
        ms.certified = false;
        return ms;
      }
    }
  }
  return std::nullopt;
}

std::vector<Interval> complement_components(const TentParams& p, int n, double cluster_tol) {
  const std::vector<double> orbit = critical_orbit_stable(p, n);
  std::vector<double> cuts;
  for (double x : orbit) {
    if (x > cluster_tol && x < 1.0 - cluster_tol) cuts.push_back(x);
  }
  std::sort(cuts.begin(), cuts.end());
  // Merge near-duplicates (e.g. c and 2-s at the golden slope differ by ulps).
  std::vector<double> merged;
  for (double x : cuts) {
    if (merged.empty() || x - merged.back() > cluster_tol) merged.push_back(x);
  }
  std::vector<Interval> out;
  double prev = 0.0;
  for (double x : merged) {
    out.push_back(Interval{prev, x});
    prev = x;
  }
  out.push_back(Interval{prev, 1.0});
  return out;
}

int covering_time_bound(const TentParams& p, double length) {
  if (!(length > 0.0 && length <= 1.0)) {
    throw std::invalid_argument("covering_time_bound: length must be in (0,1]");
  }
  const double denom = std::log(p.slope() * p.slope() / 2.0);
  if (!(denom > 0.0)) {
    throw std::invalid_argument("covering_time_bound: degenerate at s = sqrt(2)");
  }
  if (length == 1.0) return 0;
  return static_cast<int>(std::ceil(-2.0 * std::log(length) / denom));
}

int covering_time(const TentParams& p, const Interval& J) {
  if (p.is_sqrt2()) {
    throw std::invalid_argument("covering_time: covering bound degenerates at s = sqrt(2)");
  }
  const int bound = covering_time_bound(p, J.length());
  Interval cur = J;
  int n = 0;
  while (!(cur.lo == 0.0 && cur.hi == 1.0)) {
    if (n > bound + 8) {
      throw ConvergenceError("covering_time: iteration exceeded the a-priori bound",
                             static_cast<double>(n));
    }
    cur = image_interval(p, cur);
    ++n;
  }
  return n;
}

}  // namespace tentlim
