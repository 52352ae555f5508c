#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "support.hpp"
#include "tentlim/boxes.hpp"
#include "tentlim/regularity.hpp"

using namespace tentlim;
namespace tt = tentlim::testing;

namespace {

StepDensity exact_density(const TentParams& p) {
  auto ms = detect_markov(p, 16);
  REQUIRE(ms.has_value());
  return markov_density(p, *ms);
}

// Lift x through the recorded cylinder chain, if a lift exists.
std::vector<double> lift_chain(const TentParams& p, const ExcludedCylinder& ex, double x) {
  std::vector<double> coords{x};
  for (std::size_t i = 1; i < ex.chain.size(); ++i) {
    bool found = false;
    for (const Preimage& pre : preimages(p, coords.back())) {
      if (ex.chain[i].lo < pre.point && pre.point < ex.chain[i].hi) {
        coords.push_back(pre.point);
        found = true;
        break;
      }
    }
    if (!found) return {};
  }
  return coords;
}

}  // namespace

TEST_CASE("alpha of point cylinders") {
  const TentParams p2 = TentParams::full_tent();
  const StepDensity d2 = exact_density(p2);
  const PointCylinder cyl = make_point_cylinder(p2, 0.3, {0.85, 0.575, 0.2875});
  CHECK(alpha_cylinder(d2, cyl, 2.0) == doctest::Approx(1.0 / 8.0).epsilon(1e-12));

  const TentParams pg = TentParams::golden();
  const StepDensity dg = exact_density(pg);
  const double a = 1.0 / (3.0 - kGolden);
  // Depth-3 cylinder whose deepest coordinate lies left of c.
  double x = 0.55;
  std::vector<double> coords;
  double cur = x;
  for (int k = 0; k < 3; ++k) {
    cur = (k == 2) ? left_preimage(pg, cur) : right_preimage(pg, cur);
    coords.push_back(cur);
  }
  REQUIRE(coords.back() < pg.crit());
  const PointCylinder cg = make_point_cylinder(pg, x, coords);
  const double s3 = 2.0 * kGolden + 1.0;  // s^3 = 2s + 1 since s^2 = s + 1
  CHECK(alpha_cylinder(dg, cg, kGolden) == doctest::Approx(a / s3).epsilon(1e-12));
  CHECK(a / s3 == doctest::Approx(0.1708203932499369).epsilon(1e-9));

  CHECK_THROWS_AS(alpha_cylinder(dg, make_point_cylinder(pg, pg.crit(), {}), kGolden),
                  std::invalid_argument);
}

TEST_CASE("cylinder additivity: parent alpha equals the sum over children") {
  std::mt19937_64 rng(21);
  for (const TentParams& p : {TentParams::full_tent(), TentParams::golden()}) {
    const StepDensity d = exact_density(p);
    for (int k = 0; k < 200; ++k) {
      double x = tt::uniform01(rng);
      if (min_breakpoint_distance(d, x) < 1e-6) continue;
      std::vector<double> coords;
      for (int depth = 0; depth < 4; ++depth) {
        const double deepest = coords.empty() ? x : coords.back();
        const PointCylinder parent{x, coords};
        double child_sum = 0.0;
        bool skip = false;
        for (const Preimage& pre : preimages(p, deepest)) {
          if (min_breakpoint_distance(d, pre.point) < 1e-9) skip = true;
          auto ext = coords;
          ext.push_back(pre.point);
          child_sum += alpha_cylinder(d, PointCylinder{x, ext}, p.slope());
        }
        if (skip) break;
        CHECK(child_sum ==
              doctest::Approx(alpha_cylinder(d, parent, p.slope())).epsilon(1e-11));
        // Descend along a random available branch.
        auto pres = preimages(p, deepest);
        coords.push_back(pres[rng() % pres.size()].point);
        if (min_breakpoint_distance(d, coords.back()) < 1e-9) break;
      }
    }
  }
}

TEST_CASE("box over (0, 1/2) at s=2: no exclusions, whole fiber") {
  const TentParams p = TentParams::full_tent();
  const StepDensity d = exact_density(p);
  BoxConfig cfg;
  cfg.flat_prefix = 4;
  cfg.depth = 30;
  const Box box = build_box(p, d, make_interval(0.0, 0.5), cfg);
  CHECK(box.excluded.empty());
  CHECK(box.exclusions_complete);
  CHECK(box.tail_bound == 0.0);
  const MeasureEnclosure a = alpha_box(box, 0.3);
  CHECK(a.lower == 1.0);
  CHECK(a.upper == 1.0);
  CHECK(a.lower >= box.sup_phi * (1.0 - std::pow(2.0, -4.0)));  // 1 >= 0.9375
}

TEST_CASE("box over (0, c) at the golden slope: whole fiber, exact alpha") {
  const TentParams p = TentParams::golden();
  const StepDensity d = exact_density(p);
  BoxConfig cfg;
  cfg.flat_prefix = 4;
  cfg.depth = 30;
  const Box box = build_box(p, d, make_interval(0.0, p.crit()), cfg);
  CHECK(box.excluded.empty());
  CHECK(box.exclusions_complete);
  const MeasureEnclosure a = alpha_box(box, 0.2);
  CHECK(a.width() == 0.0);
  CHECK(a.mid() == doctest::Approx(1.0 / (3.0 - kGolden)).epsilon(1e-12));
}

TEST_CASE("box preconditions") {
  const TentParams p = TentParams::from_slope(1.7);
  const StepDensity d = ulam_density(p, 512).density;
  BoxConfig cfg;
  cfg.flat_prefix = 4;
  cfg.depth = 10;
  // f^3(c) = 0.3 is interior to (0.2, 0.5), so the flat prefix fails.
  CHECK_THROWS_AS(build_box(p, d, make_interval(0.2, 0.5), cfg), std::invalid_argument);
  // Base containing c is not a box base.
  CHECK_THROWS_AS(build_box(p, d, make_interval(0.35, 0.6), cfg), std::invalid_argument);
  CHECK_THROWS_AS(build_box(TentParams::sqrt2(), exact_density(TentParams::sqrt2()),
                            make_interval(0.7, 0.9), cfg),
                  std::invalid_argument);
}

TEST_CASE("non-Markov box records exclusions with the geometric tail bound") {
  const TentParams p = TentParams::from_slope(1.7);
  const StepDensity d = ulam_density(p, 4096).density;
  const Box box = build_positive_measure_box(p, d, 4, 30);
  CHECK(!box.exclusions_complete);
  const double s = p.slope();
  const double expect_tail = 2.0 * box.sup_phi * std::pow(s, -34.0) / (s - 1.0);
  CHECK(box.tail_bound == doctest::Approx(expect_tail).epsilon(1e-12));

  // Exclusion depths match re-entry times of the critical orbit into J.
  const auto orbit = critical_orbit(p, 34);
  std::size_t expected = 0;
  for (int k = 5; k <= 34; ++k) {
    if (box.base.contains_interior(orbit[static_cast<std::size_t>(k)])) ++expected;
  }
  // Some re-entries may be absorbed by an earlier exclusion's subtree.
  CHECK(box.excluded.size() <= expected);
  CHECK(!box.excluded.empty());
  for (const ExcludedCylinder& ex : box.excluded) {
    CHECK(ex.m >= 1);
    CHECK(ex.component.contains_interior(p.crit()));
    CHECK(static_cast<int>(ex.chain.size()) == box.flat_prefix + ex.m + 1);
    CHECK(ex.branch_word.back() == '*');
  }
}

TEST_CASE("enclosure width shrinks as the truncation depth grows") {
  const TentParams p = TentParams::from_slope(1.7);
  const StepDensity d = ulam_density(p, 1024).density;
  double prev_width = std::numeric_limits<double>::infinity();
  for (int depth : {5, 10, 20, 30}) {
    const Box box = build_positive_measure_box(p, d, 4, depth);
    const MeasureEnclosure a = alpha_box(box, best_probe(box));
    CHECK(a.width() <= prev_width + 1e-15);
    CHECK(a.width() <=
          2.0 * box.sup_phi * std::pow(p.slope(), -(4.0 + depth)) / (p.slope() - 1.0) + 1e-15);
    prev_width = a.width();
  }
}

TEST_CASE("membership verdicts") {
  const TentParams pg = TentParams::golden();
  const StepDensity dg = exact_density(pg);
  BoxConfig cfg;
  cfg.flat_prefix = 4;
  cfg.depth = 20;
  const Box golden_box = build_box(pg, dg, make_interval(0.0, pg.crit()), cfg);
  std::mt19937_64 rng(33);
  SamplerConfig sc;
  sc.seed = 77;
  sc.window_depth = 30;
  MuHatSampler sampler(pg, &dg, sc);
  int in_count = 0;
  for (int k = 0; k < 200; ++k) {
    const FiniteThread t = sampler.next();
    const BoxVerdict v = box_membership(golden_box, t);
    if (golden_box.base.contains_interior(t.coords[0])) {
      CHECK(v == BoxVerdict::in);
      ++in_count;
    } else {
      CHECK(v == BoxVerdict::out);
    }
  }
  CHECK(in_count > 0);

  // A thread lifted into a recorded exclusion is out.
  const TentParams p17 = TentParams::from_slope(1.7);
  const StepDensity d17 = ulam_density(p17, 1024).density;
  const Box box17 = build_positive_measure_box(p17, d17, 4, 30);
  REQUIRE(!box17.excluded.empty());
  const ExcludedCylinder& ex = box17.excluded.front();
  bool exercised = false;
  for (int k = 0; k < 200 && !exercised; ++k) {
    const double x = tt::uniform(rng, box17.base.lo, box17.base.hi);
    auto coords = lift_chain(p17, ex, x);
    if (coords.empty()) continue;
    while (static_cast<int>(coords.size()) <= box17.flat_prefix + box17.tail_depth) {
      coords.push_back(right_preimage(p17, coords.back()));
    }
    const FiniteThread t = make_thread(p17, coords);
    CHECK(box_membership(box17, t) == BoxVerdict::out);
    exercised = true;
  }
  CHECK(exercised);
}

TEST_CASE("holonomy transport follows the branch path") {
  const TentParams p = TentParams::full_tent();
  const StepDensity d = exact_density(p);
  BoxConfig cfg;
  cfg.flat_prefix = 4;
  cfg.depth = 20;
  const Box box = build_box(p, d, make_interval(0.0, 0.5), cfg);

  // Thread over 0.3 with branch string RRL.
  std::vector<double> coords{0.3};
  coords.push_back(right_preimage(p, coords.back()));
  coords.push_back(right_preimage(p, coords.back()));
  coords.push_back(left_preimage(p, coords.back()));
  const FiniteThread t = make_thread(p, coords);

  const FiniteThread u = holonomy_transport(box, t, 0.4);
  CHECK(u.coords[0] == 0.4);
  for (int i = 0; i <= t.depth(); ++i) {
    CHECK(std::abs(u.coords[i] - t.coords[i]) <=
          std::abs(0.4 - 0.3) / std::pow(2.0, i) + 1e-12);
    if (i > 0) {
      CHECK((u.coords[i] <= p.crit()) == (t.coords[i] <= p.crit()));  // same branches
    }
  }

  const FiniteThread same = holonomy_transport(box, t, 0.3);
  for (int i = 0; i <= t.depth(); ++i) CHECK(same.coords[i] == t.coords[i]);

  const FiniteThread back = holonomy_transport(box, u, 0.3);
  for (int i = 0; i <= t.depth(); ++i) {
    CHECK(back.coords[i] == doctest::Approx(t.coords[i]).epsilon(1e-12));
  }
}

TEST_CASE("sampler windows are compatible backward orbits") {
  SamplerConfig sc;
  sc.seed = 5;
  sc.window_depth = 40;
  {
    const TentParams p = TentParams::golden();
    MuHatSampler sampler(p, nullptr, sc);
    CHECK(sampler.scheme() == MuHatSampler::Scheme::forward_orbit);
    for (int k = 0; k < 50; ++k) {
      const FiniteThread t = sampler.next();
      for (int i = 0; i < t.depth(); ++i) {
        CHECK(eval(p, t.coords[static_cast<std::size_t>(i) + 1]) == t.coords[i]);
      }
    }
  }
  {
    const TentParams p = TentParams::full_tent();
    MuHatSampler sampler(p, nullptr, sc);
    CHECK(sampler.scheme() == MuHatSampler::Scheme::backward_chain);
    for (int k = 0; k < 50; ++k) {
      const FiniteThread t = sampler.next();
      for (int i = 0; i < t.depth(); ++i) {
        CHECK(std::abs(eval(p, t.coords[static_cast<std::size_t>(i) + 1]) - t.coords[i]) <=
              1e-12);
      }
    }
  }
}

TEST_CASE("sampler marginal matches the invariant measure") {
  // Fraction of windows with x_0 in (0, c) at the golden slope is mu((0,c)).
  const TentParams p = TentParams::golden();
  const StepDensity d = exact_density(p);
  SamplerConfig sc;
  sc.seed = 31;
  sc.window_depth = 8;
  MuHatSampler sampler(p, &d, sc);
  const int n = 200000;
  int hits = 0;
  for (int k = 0; k < n; ++k) {
    if (sampler.next().coords[0] < p.crit()) ++hits;
  }
  const double frac = static_cast<double>(hits) / n;
  const double expect = (1.0 / (3.0 - kGolden)) * p.crit();
  CHECK(expect == doctest::Approx(0.2763932022500210).epsilon(1e-9));
  CHECK(std::abs(frac - expect) < 0.005);
}

TEST_CASE("monte carlo box measure matches the product formula") {
  BoxConfig cfg;
  cfg.flat_prefix = 4;
  cfg.depth = 30;
  SamplerConfig sc;
  sc.window_depth = 34;

  {
    const TentParams p = TentParams::full_tent();
    const StepDensity d = exact_density(p);
    const Box box = build_box(p, d, make_interval(0.0, 0.5), cfg);
    sc.seed = 41;
    MuHatSampler sampler(p, &d, sc);
    const BoxMeasureReport rep = muhat_box_measure(box, sampler, 200000);
    CHECK(std::abs(rep.estimate - 0.5) <= 4.0 * rep.std_error);
  }
  {
    const TentParams p = TentParams::golden();
    const StepDensity d = exact_density(p);
    const Box box = build_box(p, d, make_interval(0.0, p.crit()), cfg);
    sc.seed = 42;
    MuHatSampler sampler(p, &d, sc);
    const BoxMeasureReport rep = muhat_box_measure(box, sampler, 200000);
    const double expect = box.base.length() * alpha_box(box, 0.2).mid();
    CHECK(std::abs(rep.estimate - expect) <= 4.0 * rep.std_error);
  }
  {
    const TentParams p = TentParams::from_slope(1.7);
    const StepDensity d = ulam_density(p, 4096).density;
    const Box box = build_positive_measure_box(p, d, 4, 30);
    sc.seed = 43;
    MuHatSampler sampler(p, &d, sc);
    const BoxMeasureReport rep = muhat_box_measure(box, sampler, 200000);
    const MeasureEnclosure a = alpha_box(box, best_probe(box));
    const double expect = box.base.length() * a.mid();
    CHECK(std::abs(rep.estimate - expect) <=
          4.0 * rep.std_error + box.base.length() * a.width() + 0.01);
  }
}

TEST_CASE("sampler too shallow for the box is inconclusive") {
  const TentParams p = TentParams::from_slope(1.7);
  const StepDensity d = ulam_density(p, 512).density;
  const Box box = build_positive_measure_box(p, d, 4, 30);
  SamplerConfig sc;
  sc.window_depth = 10;  // < 34
  MuHatSampler sampler(p, &d, sc);
  CHECK_THROWS_AS(muhat_box_measure(box, sampler, 1000), Inconclusive);
}

TEST_CASE("holonomy of alpha across probes") {
  BoxConfig cfg;
  cfg.flat_prefix = 4;
  cfg.depth = 30;
  {
    const TentParams p = TentParams::full_tent();
    const StepDensity d = exact_density(p);
    const Box box = build_box(p, d, make_interval(0.0, 0.5), cfg);
    const HolonomyReport rep = holonomy_check(box, std::vector<double>{0.1, 0.3, 0.45});
    CHECK(rep.pass);
    CHECK(rep.max_pairwise_diff == 0.0);
  }
  {
    const TentParams p = TentParams::golden();
    const StepDensity d = exact_density(p);
    const Box box = build_box(p, d, make_interval(0.0, p.crit()), cfg);
    const HolonomyReport rep = holonomy_check(box, 5);
    CHECK(rep.pass);
    CHECK(rep.max_pairwise_diff == 0.0);
  }
  {
    const TentParams p = TentParams::from_slope(1.7);
    const StepDensity d = ulam_density(p, 4096).density;
    const Box box = build_positive_measure_box(p, d, 4, 30);
    const HolonomyReport rep = holonomy_check(box, 5);
    CHECK(rep.pass);
    for (double probe : rep.probes) {
      CHECK(min_breakpoint_distance(box.density, probe) >= 1e-12);
    }
  }
}

TEST_CASE("alpha probe at a breakpoint is rejected") {
  const TentParams p = TentParams::golden();
  const StepDensity d = exact_density(p);
  BoxConfig cfg;
  cfg.flat_prefix = 4;
  cfg.depth = 10;
  const Box box = build_box(p, d, make_interval(p.crit(), 1.0), cfg);
  CHECK_THROWS_AS(alpha_box(box, 1.0 - 1e-16), std::invalid_argument);  // outside guard
  CHECK_NOTHROW(alpha_box(box, 0.7));
}
