#pragma once

// Fiber measures on point cylinders, maximal 0-boxes over an interval with an
// explicitly truncated exclusion list, holonomy transport between fibers, and
// Monte Carlo estimation of the induced measure on the inverse limit.
//
// A 0-box over an open interval J is the union of all arcs that project
// homeomorphically onto J at level 0.  A thread over J fails to lie in the
// box exactly when some pullback component of J containing the critical
// point captures it; the box records those components up to a truncation
// depth together with a bound on the fiber mass of everything deeper.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tentlim/core_map.hpp"
#include "tentlim/density.hpp"
#include "tentlim/threads.hpp"

namespace tentlim {

struct PointCylinder {
  double base = 0.0;           // x_0
  std::vector<double> coords;  // x_1 ... x_n, each a preimage of its predecessor

  int depth() const { return static_cast<int>(coords.size()); }
};

PointCylinder make_point_cylinder(const TentParams& p, double base, std::vector<double> coords,
                                  double tol = 1e-9);

struct MeasureEnclosure {
  double lower = 0.0;
  double upper = 0.0;

  double width() const { return upper - lower; }
  double mid() const { return 0.5 * (lower + upper); }
};

struct ExcludedCylinder {
  int m = 0;                    // exclusion at total depth flat_prefix + m
  Interval component;           // pullback component whose interior contains c
  std::vector<Interval> chain;  // level-i interval of the cylinder, i = 0 .. flat_prefix+m
  std::string branch_word;      // pullback branches; the folding step is '*'
};

struct BoxConfig {
  int flat_prefix = 4;  // N': pullbacks to this depth avoid c by precondition
  int depth = 30;       // D: exclusions enumerated to total depth flat_prefix + depth
  int budget = 4096;    // node budget for the pullback search
  bool allow_sqrt2 = false;
};

struct Box {
  Interval base;
  int flat_prefix = 0;
  int tail_depth = 0;
  std::vector<ExcludedCylinder> excluded;
  // True when a certified finite critical orbit never meets the open base, so
  // the recorded (empty) exclusion list is provably complete at every depth.
  bool exclusions_complete = false;
  double sup_phi = 0.0;
  // Bound on the fiber mass of exclusions deeper than the truncation; zero
  // when the list is complete.  geometric_tail keeps the raw geometric-series
  // value for reporting.
  double tail_bound = 0.0;
  double geometric_tail = 0.0;
  StepDensity density;
  double slope = 0.0;
};

// phi(x_n) / s^n, the fiber measure of a depth-n point cylinder.
double alpha_cylinder(const StepDensity& phi, const PointCylinder& cyl, double slope);

// Builds the maximal 0-box over open J: breadth-first search over pullback
// components, recording every component whose interior contains c and
// pruning components that can no longer reach c within the depth budget.
Box build_box(const TentParams& p, const StepDensity& phi, const Interval& J,
              const BoxConfig& cfg);

// Fiber measure of the box over base point x: upper bound subtracts the
// recorded exclusions, lower bound additionally subtracts the tail bound.
MeasureEnclosure alpha_box(const Box& box, double x);

enum class BoxVerdict { in, out, unknown };

// Membership of a finite thread: `out` on a recorded exclusion hit, `in` when
// the exclusion list is provably complete, otherwise `unknown` with residual
// fiber mass at most the tail bound.
BoxVerdict box_membership(const Box& box, const FiniteThread& t);

// The thread over b in the same box following the same branch path.
FiniteThread holonomy_transport(const Box& box, const FiniteThread& t, double b);

// ---------------------------------------------------------------------------
// Sampling the induced invariant measure on the inverse limit.

struct SamplerConfig {
  std::uint64_t seed = 1;
  int window_depth = 64;
  int burn_in = 1024;
};

// Emits finite threads distributed by the invariant measure of the shift:
// sliding windows over a seeded typical orbit, reversed so that
// x_i = f^{k-i}(z).  At s = 2 a forward binary64 orbit collapses onto exact
// dyadics, so the windows are generated from a density-weighted backward
// preimage chain, which realizes the same law fiber by fiber.
class MuHatSampler {
 public:
  enum class Scheme { forward_orbit, backward_chain };

  MuHatSampler(const TentParams& p, const StepDensity* phi, SamplerConfig cfg);

  FiniteThread next();

  Scheme scheme() const { return scheme_; }
  int window_depth() const { return cfg_.window_depth; }
  std::uint64_t seed() const { return cfg_.seed; }

 private:
  double backward_step(double x);
  void prime();

  TentParams params_;
  const StepDensity* phi_;
  SamplerConfig cfg_;
  Scheme scheme_;
  std::mt19937_64 rng_;
  std::vector<double> ring_;
  std::size_t head_ = 0;
  double staged_ = 0.0;  // next point entering the window
};

struct BoxMeasureReport {
  std::size_t samples = 0;
  double estimate = 0.0;  // fraction of windows passing membership to depth
  double std_error = 0.0;
  // Two-sided systematic bracket: deep exclusions can only remove mass.
  double systematic_low = 0.0;
  double systematic_high = 0.0;
  double unknown_fraction = 0.0;
  std::uint64_t seed = 0;
};

BoxMeasureReport muhat_box_measure(const Box& box, MuHatSampler& sampler,
                                   std::size_t n_samples, double unknown_limit = 0.05);

struct HolonomyReport {
  std::vector<double> probes;
  std::vector<MeasureEnclosure> alphas;
  double max_pairwise_diff = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Compares alpha across the probes; the tolerance is the summed enclosure
// widths plus a density-representation allowance derived from the one-step
// self-consistency defect of the step density.
HolonomyReport holonomy_check(const Box& box, const std::vector<double>& probes);
HolonomyReport holonomy_check(const Box& box, int n_probes);

// Low-discrepancy probes in J, kept a guard radius away from density
// breakpoints.
std::vector<double> holonomy_probes(const Box& box, int n_probes);

double representation_defect(const TentParams& p, const StepDensity& phi,
                             const std::vector<double>& probes);

}  // namespace tentlim
