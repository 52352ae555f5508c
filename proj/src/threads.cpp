#include "tentlim/threads.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tentlim {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

Branch side_of(const TentParams& p, const Interval& J) {
  return J.midpoint() <= p.crit() ? Branch::left : Branch::right;
}

bool folds_at(const Interval& J, double c) {
  return J.lo + kFlatTol < c && c < J.hi - kFlatTol;
}

double clamp_into(double x, const Interval& J) { return std::clamp(x, J.lo, J.hi); }

}  // namespace

FiniteThread make_thread(const TentParams& p, std::vector<double> coords, double tol) {
  if (coords.empty()) throw std::invalid_argument("make_thread: empty coordinate list");
  for (std::size_t i = 0; i + 1 < coords.size(); ++i) {
    if (std::abs(eval(p, coords[i + 1]) - coords[i]) > tol) {
      throw std::invalid_argument("make_thread: coordinates violate f(x_{i+1}) = x_i");
    }
  }
  return FiniteThread{std::move(coords)};
}

IntervalThread make_interval_thread(const TentParams& p, std::vector<Interval> levels,
                                    double tol) {
  if (levels.empty()) throw std::invalid_argument("make_interval_thread: empty level list");
  for (const Interval& J : levels) {
    if (!(J.lo >= 0.0 && J.lo < J.hi && J.hi <= 1.0)) {
      throw std::invalid_argument("make_interval_thread: degenerate level interval");
    }
    if (J.length() < 16.0 * kEps) {
      throw std::invalid_argument("make_interval_thread: level below enclosure width");
    }
  }
  for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
    const Interval img = image_interval(p, levels[i + 1]);
    if (std::abs(img.lo - levels[i].lo) > tol || std::abs(img.hi - levels[i].hi) > tol) {
      throw std::invalid_argument("make_interval_thread: levels violate f(J_{i+1}) = J_i");
    }
  }
  return IntervalThread{std::move(levels)};
}

FiniteThread shift_forward(const TentParams& p, const FiniteThread& t, bool keep_depth) {
  std::vector<double> coords;
  coords.reserve(t.coords.size() + 1);
  coords.push_back(eval(p, t.coords.front()));
  coords.insert(coords.end(), t.coords.begin(), t.coords.end());
  if (keep_depth) coords.pop_back();
  return FiniteThread{std::move(coords)};
}

IntervalThread shift_forward(const TentParams& p, const IntervalThread& t) {
  std::vector<Interval> levels;
  levels.reserve(t.levels.size() + 1);
  levels.push_back(image_interval(p, t.levels.front()));
  levels.insert(levels.end(), t.levels.begin(), t.levels.end());
  return IntervalThread{std::move(levels)};
}

FiniteThread shift_backward(const TentParams& p, const FiniteThread& t, Branch b) {
  const double tail = t.coords.back();
  double appended;
  if (b == Branch::left) {
    if (!has_left_preimage(p, tail)) {
      throw std::invalid_argument("shift_backward: left branch unavailable below 2-s");
    }
    appended = left_preimage(p, tail);
  } else {
    appended = right_preimage(p, tail);
  }
  std::vector<double> coords(t.coords.begin() + 1, t.coords.end());
  coords.push_back(appended);
  return FiniteThread{std::move(coords)};
}

bool is_m_flat(const TentParams& p, const IntervalThread& t, int m) {
  if (m < 0 || m > t.depth()) throw std::invalid_argument("is_m_flat: level out of range");
  const double c = p.crit();
  for (int i = m + 1; i <= t.depth(); ++i) {
    if (folds_at(t.levels[i], c)) return false;
  }
  return true;
}

std::optional<int> flat_level(const TentParams& p, const IntervalThread& t) {
  // Smallest m with c outside the interior of every deeper level.  A finite
  // truncation is always flat at its own depth, vacuously.
  const double c = p.crit();
  int last_bad = -1;
  for (int i = 0; i <= t.depth(); ++i) {
    if (folds_at(t.levels[i], c)) last_bad = i;
  }
  return std::max(0, last_bad);
}

std::vector<double> crit_preimages(const TentParams& p, int max_order, double merge_tol) {
  if (max_order < 0) throw std::invalid_argument("crit_preimages: negative order");
  if (max_order > 24) throw std::invalid_argument("crit_preimages: preimage tree too deep");
  std::vector<double> all{p.crit()};
  std::vector<double> level{p.crit()};
  std::vector<double> next;
  for (int k = 0; k < max_order; ++k) {
    next.clear();
    for (double y : level) {
      for (const Preimage& pre : preimages(p, y)) {
        if (!next.empty() && next.back() == pre.point) continue;
        next.push_back(pre.point);
      }
    }
    level = next;
    all.insert(all.end(), level.begin(), level.end());
  }
  std::sort(all.begin(), all.end());
  std::vector<double> merged;
  for (double z : all) {
    if (merged.empty() || z - merged.back() > merge_tol) merged.push_back(z);
  }
  return merged;
}

Decomposition flat_decompose(const TentParams& p, const IntervalThread& t, int m) {
  if (!is_m_flat(p, t, m)) {
    throw std::invalid_argument("flat_decompose: thread is not flat at the requested level");
  }
  const int depth = t.depth();
  Decomposition out;

  // Monotonicity splits of f^m on level m: interior points whose orbit hits c
  // within m-1 steps (plus c itself).
  std::vector<double> splits;
  if (m > 0) {
    for (double z : crit_preimages(p, m - 1)) {
      if (z > t.levels[m].lo + kFlatTol && z < t.levels[m].hi - kFlatTol) splits.push_back(z);
    }
  }

  std::vector<double> bounds;
  bounds.push_back(t.levels[m].lo);
  bounds.insert(bounds.end(), splits.begin(), splits.end());
  bounds.push_back(t.levels[m].hi);

  // Branch of each deeper level, fixed by which side of c it sits on.
  std::vector<Branch> deep_branch(static_cast<std::size_t>(depth) + 1, Branch::right);
  for (int i = m + 1; i <= depth; ++i) deep_branch[i] = side_of(p, t.levels[i]);

  for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
    std::vector<Interval> levels(static_cast<std::size_t>(depth) + 1);
    levels[m] = Interval{bounds[k], bounds[k + 1]};
    for (int i = m + 1; i <= depth; ++i) {
      auto pb = monotone_pullback(p, levels[i - 1], deep_branch[i]);
      if (!pb) {
        throw std::invalid_argument("flat_decompose: flatness violation past the level");
      }
      levels[i] = Interval{clamp_into(pb->lo, t.levels[i]), clamp_into(pb->hi, t.levels[i])};
    }
    for (int i = m - 1; i >= 0; --i) {
      levels[i] = image_interval(p, levels[i + 1]);
    }
    out.pieces.push_back(IntervalThread{std::move(levels)});
  }

  for (double z : splits) {
    std::vector<double> coords(static_cast<std::size_t>(depth) + 1);
    coords[m] = z;
    for (int i = m + 1; i <= depth; ++i) {
      coords[i] = deep_branch[i] == Branch::left ? left_preimage(p, coords[i - 1])
                                                 : right_preimage(p, coords[i - 1]);
    }
    for (int i = m - 1; i >= 0; --i) coords[i] = eval(p, coords[i + 1]);
    out.nodes.push_back(FiniteThread{std::move(coords)});
  }
  return out;
}

Ival rho(const TentParams& p, const IntervalThread& t, int m) {
  double sum = 0.0;
  std::size_t npieces = 1;
  if (m == 0) {
    if (!is_m_flat(p, t, 0)) throw std::invalid_argument("rho: thread is not 0-flat");
    sum = t.levels[0].length();
  } else {
    Decomposition dec = flat_decompose(p, t, m);
    npieces = dec.pieces.size();
    for (const IntervalThread& piece : dec.pieces) sum += piece.levels[0].length();
  }
  // First-order rounding allowance for the affine chain arithmetic.
  const double pad =
      8.0 * kEps * static_cast<double>(npieces) * (std::pow(p.slope(), m) * (m + 1) + 1.0);
  return Ival(std::max(0.0, sum - pad), sum + pad);
}

Ival dhat(const FiniteThread& a, const FiniteThread& b) {
  if (a.depth() != b.depth()) throw std::invalid_argument("dhat: depth mismatch");
  const int n = a.depth();
  double lower = 0.0;
  double scale = 1.0;
  for (int i = 0; i <= n; ++i) {
    lower += std::abs(a.coords[i] - b.coords[i]) * scale;
    scale *= 0.5;
  }
  const double tail = std::ldexp(1.0, 1 - n);  // diameter bound 1 beyond depth n
  const double pad = 8.0 * kEps * (n + 1);
  return Ival(std::max(0.0, lower - pad), lower + tail + pad);
}

std::optional<DensityRadius> epsilon_density_radius(const TentParams& p,
                                                    const IntervalThread& t) {
  const auto m = flat_level(p, t);
  if (!m) return std::nullopt;
  int best = -1;
  for (int l = 0; l <= t.depth(); ++l) {
    if (t.levels[l].lo <= 4.0 * kEps && t.levels[l].hi >= 1.0 - 4.0 * kEps) best = l;
  }
  if (best < 0) return std::nullopt;
  const Ival r = rho(p, t, *m);
  const double needed = std::pow(p.slope(), best);
  if (r.hi < needed * (1.0 - 1e-9)) {
    throw std::logic_error("epsilon_density_radius: rho < s^l; length lemma violated");
  }
  return DensityRadius{best, std::ldexp(1.0, -best)};
}

FiniteThread thread_through(const TentParams& p, const IntervalThread& t, double x0) {
  if (!(t.levels[0].lo <= x0 && x0 <= t.levels[0].hi)) {
    throw std::invalid_argument("thread_through: base point outside level 0");
  }
  if (!is_m_flat(p, t, 0)) throw std::invalid_argument("thread_through: thread is not 0-flat");
  std::vector<double> coords(t.levels.size());
  coords[0] = x0;
  for (std::size_t i = 1; i < t.levels.size(); ++i) {
    const Branch b = side_of(p, t.levels[i]);
    double y = b == Branch::left ? left_preimage(p, coords[i - 1])
                                 : right_preimage(p, coords[i - 1]);
    coords[i] = clamp_into(y, t.levels[i]);
  }
  return FiniteThread{std::move(coords)};
}

}  // namespace tentlim
