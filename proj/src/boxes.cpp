#include "tentlim/boxes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tentlim {

namespace {

constexpr double kBreakpointGuard = 1e-12;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

PointCylinder make_point_cylinder(const TentParams& p, double base, std::vector<double> coords,
                                  double tol) {
  double prev = base;
  for (double y : coords) {
    if (std::abs(eval(p, y) - prev) > tol) {
      throw std::invalid_argument("make_point_cylinder: coordinates are not a preimage chain");
    }
    prev = y;
  }
  return PointCylinder{base, std::move(coords)};
}

double alpha_cylinder(const StepDensity& phi, const PointCylinder& cyl, double slope) {
  const double deepest = cyl.coords.empty() ? cyl.base : cyl.coords.back();
  if (min_breakpoint_distance(phi, deepest) < kBreakpointGuard) {
    throw std::invalid_argument("alpha_cylinder: deepest coordinate collides with a breakpoint");
  }
  return eval_density(phi, deepest).value / std::pow(slope, cyl.depth());
}

// ---------------------------------------------------------------------------
// Box construction

Box build_box(const TentParams& p, const StepDensity& phi, const Interval& J,
              const BoxConfig& cfg) {
  if (p.is_sqrt2() && !cfg.allow_sqrt2) {
    throw std::invalid_argument(
        "build_box: s = sqrt(2) refused by default (core map is only just expanding); "
        "set allow_sqrt2 to override");
  }
  if (cfg.flat_prefix < 0 || cfg.depth < 1) {
    throw std::invalid_argument("build_box: need flat_prefix >= 0 and depth >= 1");
  }
  const int max_depth = cfg.flat_prefix + cfg.depth;
  const std::vector<double> orbit = critical_orbit_stable(p, max_depth);

  // Orbit points within a guard radius of the base endpoints are treated as
  // boundary: exact coincidences (the golden slope has f^3(c) = c) land there
  // up to rounding, and a genuine interior entry that close to the boundary
  // is below the resolution the tail bound is stated at.
  constexpr double kEdgeGuard = 1e-12;
  auto strictly_inside = [&J](double x) {
    return J.lo + kEdgeGuard < x && x < J.hi - kEdgeGuard;
  };

  // Flat-prefix precondition: a pullback component of depth k has c in its
  // interior exactly when f^k(c) lies in open J.
  for (int k = 1; k <= cfg.flat_prefix; ++k) {
    if (strictly_inside(orbit[k])) {
      throw std::invalid_argument("build_box: critical orbit enters J within the flat prefix");
    }
  }
  if (J.lo + 1e-12 < p.crit() && p.crit() < J.hi - 1e-12) {
    // Allowed for a 0-box, but then the depth-0 "component" is J itself and
    // every thread over J already folds; reject as a box base.
    throw std::invalid_argument("build_box: base interval contains the critical point");
  }

  Box box;
  box.base = J;
  box.flat_prefix = cfg.flat_prefix;
  box.tail_depth = cfg.depth;
  box.density = phi;
  box.slope = p.slope();
  box.sup_phi = density_diagnostics(phi).sup;

  struct Node {
    Interval hull;
    int depth;
    int parent;   // index into nodes, -1 for the root
    char branch;  // 'L', 'R', or '*' for the folding step
  };
  std::vector<Node> nodes;
  nodes.push_back(Node{J, 0, -1, '-'});
  std::vector<int> frontier{0};

  const double s = p.slope();
  const double c = p.crit();
  const double lower_rng = 2.0 - s;

  auto record_exclusion = [&](int node_idx) {
    const Node& n = nodes[node_idx];
    ExcludedCylinder ex;
    ex.m = n.depth - cfg.flat_prefix;
    ex.component = n.hull;
    ex.chain.resize(static_cast<std::size_t>(n.depth) + 1);
    std::string word;
    int cur = node_idx;
    while (cur >= 0) {
      ex.chain[static_cast<std::size_t>(nodes[cur].depth)] = nodes[cur].hull;
      if (nodes[cur].parent >= 0) word.push_back(nodes[cur].branch);
      cur = nodes[cur].parent;
    }
    std::reverse(word.begin(), word.end());
    ex.branch_word = std::move(word);
    box.excluded.push_back(std::move(ex));
  };

  // A component at depth k can produce an exclusion at depth k + j only if
  // its (relatively open) set contains f^j(c); expand only such components.
  // Interior containment covers all cases except half-open components at the
  // domain boundary, where 0 or 1 belongs to the set exactly when its image
  // at level 0 lands in open J.
  auto worth_expanding = [&](const Interval& hull, int depth) {
    for (int j = 1; j <= max_depth - depth; ++j) {
      const double o = orbit[j];
      if (hull.contains_interior(o)) return true;
      if (o == 1.0 && hull.hi == 1.0 && strictly_inside(orbit[depth + j])) return true;
      if (o == 0.0 && hull.lo == 0.0 && strictly_inside(orbit[depth + j])) return true;
    }
    return false;
  };

  for (int k = 1; k <= max_depth && !frontier.empty(); ++k) {
    std::vector<int> next;
    for (int idx : frontier) {
      const Interval hull = nodes[idx].hull;
      // 1 belongs to this component's set iff f^{k-1}(1) = f^k(c) is in J, in
      // which case the two branch preimages merge into a single component
      // whose interior contains c.
      const bool merges = hull.hi == 1.0 && strictly_inside(orbit[k]);
      auto push = [&](const Interval& child, char br) {
        if (static_cast<int>(nodes.size()) >= cfg.budget) {
          throw ConvergenceError("build_box: pullback budget exceeded",
                                 static_cast<double>(nodes.size()));
        }
        nodes.push_back(Node{child, k, idx, br});
        const int child_idx = static_cast<int>(nodes.size()) - 1;
        if (child.contains_interior(c)) {
          record_exclusion(child_idx);  // subtree is absorbed by this cylinder
        } else if (worth_expanding(child, k)) {
          next.push_back(child_idx);
        }
      };
      if (merges) {
        const double lo = hull.lo >= lower_rng ? left_preimage(p, hull.lo) : 0.0;
        const double hi = right_preimage(p, hull.lo);
        push(Interval{lo, hi}, '*');
        continue;
      }
      // Right branch always lifts; left branch only above 2 - s.
      {
        const double lo = right_preimage(p, hull.hi);
        const double hi = right_preimage(p, hull.lo);
        if (hi - lo > 0.0) push(Interval{lo, hi}, 'R');
      }
      if (hull.hi > lower_rng) {
        const double lo = hull.lo >= lower_rng ? left_preimage(p, hull.lo) : 0.0;
        const double hi = left_preimage(p, hull.hi);
        if (hi - lo > 0.0) push(Interval{lo, hi}, 'L');
      }
    }
    frontier = std::move(next);
  }

  // Completeness: a certified finite critical orbit that never meets open J
  // rules out exclusions at every depth.
  if (auto ms = detect_markov(p, std::max(64, max_depth)); ms && ms->certified) {
    bool hits = false;
    for (double x : ms->orbit_points) {
      if (strictly_inside(x)) hits = true;
    }
    box.exclusions_complete = !hits;
  }

  // Per level at most one component contains c, and the fiber carries at most
  // two lifts into it (the chain folds once, at its deepest step).
  box.geometric_tail =
      2.0 * box.sup_phi * std::pow(s, -static_cast<double>(max_depth)) / (s - 1.0);
  box.tail_bound = box.exclusions_complete ? 0.0 : box.geometric_tail;
  return box;
}

// ---------------------------------------------------------------------------
// Fiber measure of a box

namespace {

// Preimages of x of order `depth(chain)-...` lying inside the cylinder chain.
// The chain is injective except at its deepest step, so at most two lifts
// survive.
std::vector<double> lifts_into(const TentParams& p, const ExcludedCylinder& ex, double x) {
  std::vector<double> cur{x};
  std::vector<double> next;
  for (std::size_t i = 1; i < ex.chain.size(); ++i) {
    next.clear();
    const Interval& win = ex.chain[i];
    for (double y : cur) {
      for (const Preimage& pre : preimages(p, y)) {
        if (win.lo < pre.point && pre.point < win.hi) {
          if (!next.empty() && next.back() == pre.point) continue;
          next.push_back(pre.point);
        }
      }
    }
    if (next.empty()) return {};
    cur = next;
  }
  return cur;
}

}  // namespace

MeasureEnclosure alpha_box(const Box& box, double x) {
  if (!box.base.contains_interior(x)) {
    throw std::invalid_argument("alpha_box: probe outside the base interval");
  }
  if (min_breakpoint_distance(box.density, x) < kBreakpointGuard) {
    throw std::invalid_argument("alpha_box: probe collides with a density breakpoint");
  }
  TentParams p = TentParams::from_slope(box.slope);
  double excluded_mass = 0.0;
  for (const ExcludedCylinder& ex : box.excluded) {
    const int total_depth = box.flat_prefix + ex.m;
    const double sn = std::pow(box.slope, total_depth);
    for (double y : lifts_into(p, ex, x)) {
      excluded_mass += eval_density(box.density, y).value / sn;
    }
  }
  const double upper = eval_density(box.density, x).value - excluded_mass;
  const double lower = std::max(0.0, upper - box.tail_bound);
  return MeasureEnclosure{lower, upper};
}

BoxVerdict box_membership(const Box& box, const FiniteThread& t) {
  if (!box.base.contains_interior(t.coords[0])) return BoxVerdict::out;
  for (const ExcludedCylinder& ex : box.excluded) {
    const int d = box.flat_prefix + ex.m;
    if (d <= t.depth()) {
      const double y = t.coords[static_cast<std::size_t>(d)];
      if (ex.component.lo < y && y < ex.component.hi) return BoxVerdict::out;
    }
  }
  if (box.exclusions_complete) return BoxVerdict::in;
  // Checked to the truncation depth only; residual fiber mass at most the
  // tail bound.
  return BoxVerdict::unknown;
}

FiniteThread holonomy_transport(const Box& box, const FiniteThread& t, double b) {
  if (!box.base.contains_interior(b)) {
    throw std::invalid_argument("holonomy_transport: target point outside the base");
  }
  if (box_membership(box, t) == BoxVerdict::out) {
    throw std::invalid_argument("holonomy_transport: thread is not in the box");
  }
  TentParams p = TentParams::from_slope(box.slope);
  const double c = p.crit();
  std::vector<double> coords(t.coords.size());
  coords[0] = b;
  for (std::size_t i = 1; i < t.coords.size(); ++i) {
    const bool left = t.coords[i] <= c;
    coords[i] = left ? left_preimage(p, coords[i - 1]) : right_preimage(p, coords[i - 1]);
  }
  return FiniteThread{std::move(coords)};
}

// ---------------------------------------------------------------------------
// Sampler

MuHatSampler::MuHatSampler(const TentParams& p, const StepDensity* phi, SamplerConfig cfg)
    : params_(p), phi_(phi), cfg_(cfg), rng_(cfg.seed) {
  if (cfg_.window_depth < 1) throw std::invalid_argument("MuHatSampler: window depth >= 1");
  // Forward binary64 orbits collapse onto exact dyadics at the endpoint
  // slopes (the derivative is an exact bit shift per step or step pair), so
  // windows are generated from a density-weighted backward chain there; the
  // weights phi(y)/(s phi(x)) are exactly the fiber law of the invariant
  // measure.
  scheme_ = (p.is_full() || p.is_sqrt2()) ? Scheme::backward_chain : Scheme::forward_orbit;
  if (scheme_ == Scheme::backward_chain && phi_ == nullptr && !p.is_full()) {
    throw std::invalid_argument("MuHatSampler: backward sampling needs a density");
  }
  prime();
}

double MuHatSampler::backward_step(double x) {
  const bool left_ok = has_left_preimage(params_, x);
  if (!left_ok) return right_preimage(params_, x);
  const double yl = left_preimage(params_, x);
  const double yr = right_preimage(params_, x);
  double wl = 1.0, wr = 1.0;
  if (phi_ != nullptr) {
    wl = eval_density(*phi_, yl).value;
    wr = eval_density(*phi_, yr).value;
  }
  return uniform01(rng_) * (wl + wr) < wl ? yl : yr;
}

void MuHatSampler::prime() {
  const std::vector<double> pc = critical_orbit(params_, 64);
  auto away = [&](double x) {
    for (double o : pc) {
      if (std::abs(x - o) < 1e-9) return false;
    }
    return true;
  };
  double x = uniform01(rng_);
  while (!(x > 0.0 && x < 1.0) || !away(x)) x = uniform01(rng_);

  const std::size_t cap = static_cast<std::size_t>(cfg_.window_depth) + 1;
  ring_.assign(cap, 0.0);
  if (scheme_ == Scheme::forward_orbit) {
    for (int k = 0; k < cfg_.burn_in; ++k) x = eval(params_, x);
    for (std::size_t k = 0; k < cap; ++k) {
      ring_[k] = x;
      x = eval(params_, x);
    }
    head_ = cap - 1;  // ring_[head_] is the newest orbit point
  } else {
    for (int k = 0; k < cfg_.burn_in; ++k) x = backward_step(x);
    for (std::size_t k = 0; k < cap; ++k) {
      ring_[k] = x;
      x = backward_step(x);
    }
    head_ = 0;  // ring_[head_] is the shallowest chain point
  }
  staged_ = x;
}

FiniteThread MuHatSampler::next() {
  const std::size_t cap = ring_.size();
  std::vector<double> coords(cap);
  if (scheme_ == Scheme::forward_orbit) {
    // coords[i] = orbit[k - i]; ring_[head_] is orbit[k].
    for (std::size_t i = 0; i < cap; ++i) {
      coords[i] = ring_[(head_ + cap - i) % cap];
    }
    head_ = (head_ + 1) % cap;
    ring_[head_] = staged_;
    staged_ = eval(params_, staged_);
  } else {
    // coords[i] = chain[j + i]; ring_[head_] is chain[j].
    for (std::size_t i = 0; i < cap; ++i) {
      coords[i] = ring_[(head_ + i) % cap];
    }
    ring_[head_] = staged_;
    head_ = (head_ + 1) % cap;
    staged_ = backward_step(staged_);
  }
  return FiniteThread{std::move(coords)};
}

// ---------------------------------------------------------------------------
// Monte Carlo box measure

BoxMeasureReport muhat_box_measure(const Box& box, MuHatSampler& sampler,
                                   std::size_t n_samples, double unknown_limit) {
  if (n_samples < 100) throw std::invalid_argument("muhat_box_measure: too few samples");
  const int need_depth = box.flat_prefix + box.tail_depth;
  // The window depth is fixed per sampler, so verdicts are either all
  // depth-checked or all unknown.
  if (sampler.window_depth() < need_depth && !box.exclusions_complete) {
    if (unknown_limit < 1.0) {
      throw Inconclusive("muhat_box_measure: sampler window shallower than the box depth");
    }
  }

  const int nbatch = 100;
  const std::size_t batch_len = n_samples / nbatch;
  std::vector<double> batch_frac(nbatch, 0.0);
  std::size_t total = 0, passes = 0;
  for (int b = 0; b < nbatch; ++b) {
    std::size_t hits = 0;
    for (std::size_t k = 0; k < batch_len; ++k) {
      FiniteThread t = sampler.next();
      ++total;
      if (box_membership(box, t) != BoxVerdict::out) {
        ++hits;  // `in` or pass-to-depth
        ++passes;
      }
    }
    batch_frac[b] = static_cast<double>(hits) / static_cast<double>(batch_len);
  }

  BoxMeasureReport rep;
  rep.samples = total;
  rep.seed = sampler.seed();
  rep.unknown_fraction = 0.0;
  rep.estimate = static_cast<double>(passes) / static_cast<double>(total);
  double mean = 0.0;
  for (double f : batch_frac) mean += f;
  mean /= nbatch;
  double var = 0.0;
  for (double f : batch_frac) var += (f - mean) * (f - mean);
  var /= (nbatch - 1);
  rep.std_error = std::sqrt(var / nbatch);
  // Deep exclusions can only remove mass from pass-to-depth verdicts.
  rep.systematic_high = rep.estimate;
  rep.systematic_low = rep.estimate - box.base.length() * box.tail_bound;
  return rep;
}

// ---------------------------------------------------------------------------
// Holonomy

std::vector<double> holonomy_probes(const Box& box, int n_probes) {
  if (n_probes < 2) throw std::invalid_argument("holonomy_probes: need at least 2 probes");
  std::vector<double> probes;
  const double len = box.base.length();
  const double guard = std::max(kBreakpointGuard, 1e-9 * len);
  int k = 1;
  int attempts = 0;
  while (static_cast<int>(probes.size()) < n_probes) {
    if (++attempts > 100 * n_probes) {
      throw std::runtime_error("holonomy_probes: could not place probes off breakpoints");
    }
    double u = std::fmod(0.5 + k * (kGolden - 1.0), 1.0);
    ++k;
    double x = box.base.lo + u * len;
    if (x - box.base.lo < guard || box.base.hi - x < guard) continue;
    if (min_breakpoint_distance(box.density, x) < guard) continue;
    probes.push_back(x);
  }
  std::sort(probes.begin(), probes.end());
  return probes;
}

double representation_defect(const TentParams& p, const StepDensity& phi,
                             const std::vector<double>& probes) {
  // One-step self-consistency defect, accumulated over the geometric series
  // of deeper lifts.  Zero (to solver accuracy) for exact Markov densities.
  double worst = 0.0;
  for (double x : probes) {
    worst = std::max(worst, phipropn_residual(p, phi, x, 1));
  }
  return worst / (1.0 - 1.0 / p.slope());
}

HolonomyReport holonomy_check(const Box& box, const std::vector<double>& probes) {
  if (probes.size() < 2) throw std::invalid_argument("holonomy_check: need at least 2 probes");
  HolonomyReport rep;
  rep.probes = probes;
  for (double x : probes) rep.alphas.push_back(alpha_box(box, x));
  double widths = 0.0;
  for (const MeasureEnclosure& a : rep.alphas) widths += a.width();
  TentParams p = TentParams::from_slope(box.slope);
  const double defect = representation_defect(p, box.density, probes);
  rep.tolerance = widths + defect + 64.0 * std::numeric_limits<double>::epsilon();
  rep.max_pairwise_diff = 0.0;
  for (std::size_t i = 0; i < rep.alphas.size(); ++i) {
    for (std::size_t j = i + 1; j < rep.alphas.size(); ++j) {
      rep.max_pairwise_diff =
          std::max(rep.max_pairwise_diff, std::abs(rep.alphas[i].mid() - rep.alphas[j].mid()));
    }
  }
  rep.pass = rep.max_pairwise_diff <= rep.tolerance;
  return rep;
}

HolonomyReport holonomy_check(const Box& box, int n_probes) {
  return holonomy_check(box, holonomy_probes(box, n_probes));
}

}  // namespace tentlim
