#include "tentlim/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tentlim {

namespace {

bool is_canonical_primitive(const std::string& w) {
  const std::size_t n = w.size();
  // Reject powers of a shorter word.
  for (std::size_t d = 1; d < n; ++d) {
    if (n % d != 0) continue;
    bool power = true;
    for (std::size_t i = d; i < n && power; ++i) power = (w[i] == w[i - d]);
    if (power) return false;
  }
  // Keep only the lexicographically minimal rotation.
  std::string rot = w;
  for (std::size_t k = 1; k < n; ++k) {
    std::rotate(rot.begin(), rot.begin() + 1, rot.end());
    if (rot < w) return false;
  }
  return true;
}

}  // namespace

std::optional<GRCertificate> certify_periodic_gr(const TentParams& p, std::string_view word) {
  if (word.empty()) throw std::invalid_argument("certify_periodic_gr: empty branch word");
  for (char ch : word) {
    if (ch != 'L' && ch != 'R') {
      throw std::invalid_argument("certify_periodic_gr: word must consist of L and R");
    }
  }
  const double s = p.slope();
  const double c = p.crit();

  // Compose the affine branch maps along the word: x -> A x + B.
  double A = 1.0, B = 0.0;
  for (char ch : word) {
    if (ch == 'L') {
      A = s * A;
      B = s * B + (2.0 - s);
    } else {
      A = -s * A;
      B = s - s * B;
    }
  }
  // |A| = s^q > 1, so the fixed point is unique.
  const double x0 = B / (1.0 - A);
  if (!(x0 > 0.0 && x0 < 1.0)) return std::nullopt;

  // Realizability and the avoidance gap.
  std::vector<double> orbit;
  orbit.reserve(word.size());
  double x = x0;
  double delta = std::numeric_limits<double>::infinity();
  for (char ch : word) {
    if (!(x >= 0.0 && x <= 1.0)) return std::nullopt;
    if (ch == 'L' && x > c) return std::nullopt;
    if (ch == 'R' && x < c) return std::nullopt;
    if (x == c) return std::nullopt;  // grazing orbits carry no avoidance gap
    delta = std::min(delta, std::abs(x - c));
    orbit.push_back(x);
    x = eval(p, x);
  }
  if (std::abs(x - x0) > 1e-9) return std::nullopt;

  GRCertificate cert;
  cert.kind = GRCertificate::Kind::periodic_invariant_set;
  cert.word = std::string(word);
  cert.orbit = std::move(orbit);
  cert.delta = delta;
  cert.depth = static_cast<int>(word.size());

  // Certification: the inverse composite is a contraction, so an interval X
  // with G(X) strictly inside X encloses the true fixed point; the orbit
  // enclosures must then realize the word with room to spare.
  const Ival si = p.slope_iv();
  const Ival ci = p.crit_iv();
  Ival Ai = Ival::point(1.0), Bi = Ival::point(0.0);
  for (char ch : word) {
    if (ch == 'L') {
      Ai = si * Ai;
      Bi = si * Bi + (2.0 - si);
    } else {
      Ai = -(si * Ai);
      Bi = si - si * Bi;
    }
  }
  const double pad = std::max(1e-12, 1e3 * std::abs(x0) * std::numeric_limits<double>::epsilon());
  Ival X(x0 - pad, x0 + pad);
  const Ival G = (X - Bi) / Ai;  // inverse composite applied to X
  bool exact = X.lo < G.lo && G.hi < X.hi;
  if (exact) {
    Ival xi = Ival(G.lo, G.hi);
    for (char ch : word) {
      if (ch == 'L') {
        if (!xi.certainly_lt(ci)) exact = false;
        xi = si * xi + (2.0 - si);
      } else {
        if (!xi.certainly_gt(ci)) exact = false;
        xi = si * (1.0 - xi);
      }
      if (!exact) break;
    }
  }
  cert.exact = exact;
  return cert;
}

std::vector<GRCertificate> search_periodic_certificates(const TentParams& p, int max_period) {
  if (max_period < 1 || max_period > 20) {
    throw std::invalid_argument("search_periodic_certificates: period bound must be in [1, 20]");
  }
  std::vector<GRCertificate> found;
  std::string w;
  for (int q = 1; q <= max_period; ++q) {
    const std::uint32_t count = 1u << q;
    for (std::uint32_t bits = 0; bits < count; ++bits) {
      w.clear();
      for (int i = q - 1; i >= 0; --i) w.push_back((bits >> i) & 1u ? 'R' : 'L');
      if (!is_canonical_primitive(w)) continue;
      if (auto cert = certify_periodic_gr(p, w)) {
        found.push_back(std::move(*cert));
      }
    }
  }
  return found;
}

double gap_statistic(const TentParams& p, int n) {
  if (n < 2) throw std::invalid_argument("gap_statistic: n must be >= 2");
  double best = 0.0;
  for (const Interval& comp : complement_components(p, n)) {
    best = std::max(best, comp.length());
  }
  return best;
}

Interval shrink_quarter(const Interval& J) {
  const double eps = J.length() / 4.0;
  return make_interval(J.lo + eps, J.hi - eps);
}

VisitFractionReport backward_visit_fraction(const TentParams& p, const Box& box,
                                            const Interval& shrunk_base, MuHatSampler& sampler,
                                            int max_depth, std::size_t n_samples) {
  if (max_depth < 0) throw std::invalid_argument("backward_visit_fraction: negative depth");
  const int box_depth = box.flat_prefix + box.tail_depth;
  if (sampler.window_depth() < max_depth + box_depth) {
    throw std::invalid_argument(
        "backward_visit_fraction: sampler window shallower than visit depth plus box depth");
  }
  if (!box.base.contains(shrunk_base)) {
    throw std::invalid_argument("backward_visit_fraction: shrunken interval must lie in the base");
  }
  (void)p;

  // Membership of the n-fold backward shift of t in B' = pi_0^{-1}(J') cap B:
  // coordinate n lands in J' and no recorded exclusion captures the shifted
  // thread.
  auto shifted_in = [&](const FiniteThread& t, int n) {
    const double xn = t.coords[static_cast<std::size_t>(n)];
    if (!shrunk_base.contains_interior(xn)) return false;
    for (const ExcludedCylinder& ex : box.excluded) {
      const std::size_t d = static_cast<std::size_t>(n + box.flat_prefix + ex.m);
      const double y = t.coords[d];
      if (ex.component.lo < y && y < ex.component.hi) return false;
    }
    return true;
  };

  std::vector<std::size_t> visited_by(static_cast<std::size_t>(max_depth) + 1, 0);
  for (std::size_t k = 0; k < n_samples; ++k) {
    FiniteThread t = sampler.next();
    int first = -1;
    for (int n = 0; n <= max_depth; ++n) {
      if (shifted_in(t, n)) {
        first = n;
        break;
      }
    }
    if (first >= 0) {
      for (int n = first; n <= max_depth; ++n) ++visited_by[static_cast<std::size_t>(n)];
    }
  }

  VisitFractionReport rep;
  rep.samples = n_samples;
  rep.seed = sampler.seed();
  rep.fraction_by_depth.resize(visited_by.size());
  for (std::size_t i = 0; i < visited_by.size(); ++i) {
    rep.fraction_by_depth[i] =
        static_cast<double>(visited_by[i]) / static_cast<double>(n_samples);
  }
  rep.depth0_fraction = rep.fraction_by_depth.front();
  return rep;
}

Box build_positive_measure_box(const TentParams& p, const StepDensity& phi, int orbit_prefix,
                               int depth, bool allow_sqrt2) {
  const std::vector<Interval> comps = complement_components(p, orbit_prefix);
  // Pick the component with the largest density sup over its interior cells.
  double best_sup = -1.0;
  const Interval* best = nullptr;
  for (const Interval& comp : comps) {
    double sup = 0.0;
    for (std::size_t i = 0; i < phi.values.size(); ++i) {
      const double lo = phi.breakpoints[i], hi = phi.breakpoints[i + 1];
      if (hi > comp.lo && lo < comp.hi) sup = std::max(sup, phi.values[i]);
    }
    if (sup > best_sup) {
      best_sup = sup;
      best = &comp;
    }
  }
  BoxConfig cfg;
  cfg.flat_prefix = orbit_prefix;
  cfg.depth = depth;
  cfg.allow_sqrt2 = allow_sqrt2;
  return build_box(p, phi, *best, cfg);
}

double best_probe(const Box& box) {
  // Midpoint of the maximizing density cell clipped to the base.
  const StepDensity& phi = box.density;
  double best_val = -1.0, probe = box.base.midpoint();
  for (std::size_t i = 0; i < phi.values.size(); ++i) {
    const double lo = std::max(phi.breakpoints[i], box.base.lo);
    const double hi = std::min(phi.breakpoints[i + 1], box.base.hi);
    if (hi - lo < 1e-9) continue;
    if (phi.values[i] > best_val) {
      best_val = phi.values[i];
      probe = 0.5 * (lo + hi);
    }
  }
  return probe;
}

TypicalityReport typicality_report(const TentParams& p, const StepDensity& phi,
                                   const TypicalityConfig& cfg) {
  TypicalityReport rep;
  rep.slope = p.slope();
  rep.seed = cfg.seed;

  for (int n : {10, 100, 1000}) rep.gaps.push_back(GapPoint{n, gap_statistic(p, n)});

  rep.box = build_positive_measure_box(p, phi, cfg.orbit_prefix, cfg.box_depth, cfg.allow_sqrt2);
  rep.best_probe = best_probe(rep.box);
  rep.alpha_at_probe = alpha_box(rep.box, rep.best_probe);
  rep.pccomp_target =
      rep.box.sup_phi * (1.0 - std::pow(p.slope(), -static_cast<double>(cfg.orbit_prefix)));

  rep.shrunk_base = shrink_quarter(rep.box.base);
  Box shrunk = rep.box;
  shrunk.base = rep.shrunk_base;

  const int box_depth = rep.box.flat_prefix + rep.box.tail_depth;
  {
    SamplerConfig sc;
    sc.seed = cfg.seed;
    sc.window_depth = box_depth;
    MuHatSampler sampler(p, &phi, sc);
    rep.product_mc = muhat_box_measure(shrunk, sampler, cfg.mc_samples);
    MeasureEnclosure a = alpha_box(shrunk, best_probe(shrunk));
    rep.product_reference = rep.shrunk_base.length() * a.mid();
  }
  {
    SamplerConfig sc;
    sc.seed = cfg.seed + 1;
    sc.window_depth = cfg.visit_depth + box_depth;
    MuHatSampler sampler(p, &phi, sc);
    rep.visits =
        backward_visit_fraction(p, shrunk, rep.shrunk_base, sampler, cfg.visit_depth,
                                cfg.visit_samples);
  }

  std::vector<GRCertificate> certs = search_periodic_certificates(p, cfg.period_bound);
  rep.certificates_found = certs.size();
  rep.certificate_min_delta = std::numeric_limits<double>::infinity();
  for (const GRCertificate& cert : certs) {
    rep.certificate_min_delta = std::min(rep.certificate_min_delta, cert.delta);
  }
  if (certs.empty()) rep.certificate_min_delta = 0.0;
  for (std::size_t i = 0; i < certs.size() && i < 5; ++i) {
    rep.sample_certificates.push_back(certs[i]);
  }
  return rep;
}

}  // namespace tentlim
