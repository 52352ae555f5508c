#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "support.hpp"
#include "tentlim/density.hpp"

using namespace tentlim;
namespace tt = tentlim::testing;

namespace {

// Independent oracle: integral of a step density over [a, b].
double step_integral(const StepDensity& d, double a, double b) {
  double total = 0.0;
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    const double lo = std::max(a, d.breakpoints[i]);
    const double hi = std::min(b, d.breakpoints[i + 1]);
    if (hi > lo) total += d.values[i] * (hi - lo);
  }
  return total;
}

StepDensity golden_exact() {
  const TentParams p = TentParams::golden();
  auto ms = detect_markov(p, 10);
  REQUIRE(ms.has_value());
  return markov_density(p, *ms);
}

}  // namespace

TEST_CASE("ulam at s=2 returns the constant density exactly") {
  UlamResult r = ulam_density(TentParams::full_tent(), 1024);
  for (double v : r.density.values) {
    CHECK(std::abs(v - 1.0) <= 1e-9);
  }
  CHECK(r.density.normalization_residual <= 1e-9);
}

TEST_CASE("markov density at the golden slope matches the independent 2x2 solve") {
  // Oracle: on cells (0,c), (c,1) the fixed point solves a = b/s, b = (a+b)/s;
  // normalizing against the cell lengths gives a = 1/(3-s), b = s/(3-s).
  const double s = kGolden;
  const double a_expect = 1.0 / (3.0 - s);
  const double b_expect = s / (3.0 - s);
  CHECK(a_expect == doctest::Approx(0.7236067977499789).epsilon(1e-12));
  CHECK(b_expect == doctest::Approx(1.1708203932499368).epsilon(1e-12));

  const StepDensity d = golden_exact();
  REQUIRE(d.values.size() == 2);
  REQUIRE(d.breakpoints.size() == 3);
  CHECK(d.breakpoints[1] == doctest::Approx(TentParams::golden().crit()).epsilon(1e-15));
  CHECK(std::abs(d.values[0] - a_expect) <= 1e-9);
  CHECK(std::abs(d.values[1] - b_expect) <= 1e-9);
  CHECK(d.normalization_residual <= 1e-12);
}

TEST_CASE("markov density at s=2 is Lebesgue") {
  const TentParams p = TentParams::full_tent();
  auto ms = detect_markov(p, 10);
  REQUIRE(ms.has_value());
  const StepDensity d = markov_density(p, *ms);
  for (double v : d.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("markov density at sqrt(2) matches algebra and the histogram oracle") {
  // Cells (0,c), (c,p), (p,1) with p = 2-sqrt(2); the fixed point is
  // (t, t, sqrt(2) t) with t = 1/(4-2 sqrt(2)).
  const double t = 1.0 / (4.0 - 2.0 * kSqrt2);
  const TentParams p = TentParams::sqrt2();
  auto ms = detect_markov(p, 10);
  REQUIRE(ms.has_value());
  const StepDensity d = markov_density(p, *ms);
  REQUIRE(d.values.size() == 3);
  CHECK(std::abs(d.values[0] - t) <= 1e-12);
  CHECK(std::abs(d.values[1] - t) <= 1e-12);
  CHECK(std::abs(d.values[2] - kSqrt2 * t) <= 1e-12);

  const StepDensity h = orbit_histogram(p, 42, 2000000, 32);
  for (std::size_t j = 0; j < h.values.size(); ++j) {
    const double expect = step_integral(d, h.breakpoints[j], h.breakpoints[j + 1]) /
                          (h.breakpoints[j + 1] - h.breakpoints[j]);
    CHECK(std::abs(h.values[j] - expect) <= 4.0 * h.std_errors[j] + 1e-3);
  }
}

TEST_CASE("histogram at s=2 is uniform despite dyadic orbit collapse") {
  const StepDensity h = orbit_histogram(TentParams::full_tent(), 7, 1000000, 64);
  for (std::size_t j = 0; j < h.values.size(); ++j) {
    CHECK(std::abs(h.values[j] - 1.0) <= 4.0 * h.std_errors[j]);
    CHECK(h.std_errors[j] < 0.05);
  }
}

TEST_CASE("histogram at the golden slope matches the exact density per bin") {
  const StepDensity d = golden_exact();
  const StepDensity h = orbit_histogram(TentParams::golden(), 3, 2000000, 64);
  for (std::size_t j = 0; j < h.values.size(); ++j) {
    const double expect = step_integral(d, h.breakpoints[j], h.breakpoints[j + 1]) /
                          (h.breakpoints[j + 1] - h.breakpoints[j]);
    CHECK(std::abs(h.values[j] - expect) <= 4.0 * h.std_errors[j] + 1e-3);
  }
}

TEST_CASE("histogram is reproducible bit for bit under the same seed") {
  const TentParams p = TentParams::from_slope(1.7);
  const StepDensity a = orbit_histogram(p, 99, 200000, 32);
  const StepDensity b = orbit_histogram(p, 99, 200000, 32);
  CHECK(a.values == b.values);
  CHECK(a.std_errors == b.std_errors);
  const StepDensity other = orbit_histogram(p, 100, 200000, 32);
  CHECK(a.values != other.values);
}

TEST_CASE("ulam at the golden slope approximates the exact density away from breakpoints") {
  const StepDensity exact = golden_exact();
  const UlamResult r = ulam_density(TentParams::golden(), 4096);
  const double c = TentParams::golden().crit();
  double worst = 0.0;
  for (std::size_t i = 0; i < r.density.values.size(); ++i) {
    const double lo = r.density.breakpoints[i], hi = r.density.breakpoints[i + 1];
    if (lo <= c && c <= hi) continue;  // skip the breakpoint cell
    const double mid = 0.5 * (lo + hi);
    worst = std::max(worst, std::abs(r.density.values[i] - eval_density(exact, mid).value));
  }
  CHECK(worst <= 5e-3);
}

TEST_CASE("ulam at a non-Markov slope agrees with the histogram oracle") {
  const TentParams p = TentParams::from_slope(1.7);
  const StepDensity u = ulam_density(p, 4096).density;
  const StepDensity h = orbit_histogram(p, 5, 2000000, 64);
  for (std::size_t j = 0; j < h.values.size(); ++j) {
    const double expect = step_integral(u, h.breakpoints[j], h.breakpoints[j + 1]) /
                          (h.breakpoints[j + 1] - h.breakpoints[j]);
    CHECK(std::abs(h.values[j] - expect) <= 4.0 * h.std_errors[j] + 5e-3);
  }
}

TEST_CASE("eval_density examples and the breakpoint flag") {
  const StepDensity d2 = markov_density(TentParams::full_tent(),
                                        *detect_markov(TentParams::full_tent(), 10));
  CHECK(eval_density(d2, 0.37).value == doctest::Approx(1.0).epsilon(1e-12));

  const StepDensity dg = golden_exact();
  const double a = 1.0 / (3.0 - kGolden);
  const double b = kGolden / (3.0 - kGolden);
  auto at02 = eval_density(dg, 0.2);
  CHECK(at02.value == doctest::Approx(a).epsilon(1e-9));
  CHECK(!at02.at_breakpoint);
  auto atc = eval_density(dg, dg.breakpoints[1]);
  CHECK(atc.value == doctest::Approx(b).epsilon(1e-9));  // right-cell convention
  CHECK(atc.at_breakpoint);
}

TEST_CASE("self-consistency residual") {
  const TentParams p2 = TentParams::full_tent();
  const StepDensity d2 = markov_density(p2, *detect_markov(p2, 10));
  std::mt19937_64 rng(31);
  for (int k = 0; k < 50; ++k) {
    const double x = 0.01 + 0.98 * tt::uniform01(rng);
    if (std::abs(x - 0.5) < 1e-6) continue;
    CHECK(phipropn_residual(p2, d2, x, 5) <= 1e-13);
  }

  const TentParams pg = TentParams::golden();
  const StepDensity dg = golden_exact();
  CHECK(phipropn_residual(pg, dg, 0.2, 3) <= 1e-12);

  CHECK_THROWS_AS(phipropn_residual(pg, dg, pg.crit(), 3), std::invalid_argument);
}

TEST_CASE("ulam residuals shrink with bin count at a non-Markov slope") {
  // Note: 0.3 itself is f^3(c) = 2 - s at s = 1.7 and is rejected by the
  // critical-orbit guard, so probe just off it.
  const TentParams p = TentParams::from_slope(1.7);
  CHECK_THROWS_AS(phipropn_residual(p, ulam_density(p, 1024).density, 0.3, 3),
                  std::invalid_argument);
  const double r1024 = phipropn_residual(p, ulam_density(p, 1024).density, 0.31, 3);
  const double r4096 = phipropn_residual(p, ulam_density(p, 4096).density, 0.31, 3);
  CHECK(r1024 <= 0.05);
  CHECK(r4096 <= 0.05);
  CHECK(r4096 <= r1024 + 1e-4);
}

TEST_CASE("density diagnostics invariants") {
  for (const StepDensity& d :
       {golden_exact(), ulam_density(TentParams::from_slope(1.7), 1024).density,
        orbit_histogram(TentParams::from_slope(1.9), 8, 200000, 32)}) {
    const DensityDiagnostics diag = density_diagnostics(d);
    CHECK(diag.total_variation >= diag.sup - diag.inf - 1e-12);
    CHECK(diag.sup >= 1.0 - 1e-9);
    CHECK(diag.inf <= 1.0 + 1e-9);
    CHECK(diag.inf > 0.0);
    double mass = 0.0;
    for (std::size_t i = 0; i < d.values.size(); ++i) {
      mass += d.values[i] * (d.breakpoints[i + 1] - d.breakpoints[i]);
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("ulam rejects tiny budgets with a residual report") {
  try {
    ulam_density(TentParams::from_slope(1.7), 256, 2);
    FAIL("expected non-convergence");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual > 1e-12);
  }
}
