#pragma once

// The absolutely continuous invariant density of the core tent map, in three
// flavors: Ulam discretization, exact solve on a Markov partition, and a
// long-orbit histogram used as an independent oracle.  Densities are carried
// as right-continuous step functions.

#include <cstdint>
#include <optional>
#include <vector>

#include "tentlim/core_map.hpp"

namespace tentlim {

enum class DensitySource { ulam, markov_exact, histogram };

struct StepDensity {
  // breakpoints.front() == 0, breakpoints.back() == 1, strictly increasing;
  // values[i] is the density on (breakpoints[i], breakpoints[i+1]).
  std::vector<double> breakpoints;
  std::vector<double> values;
  double normalization_residual = 0.0;
  DensitySource source = DensitySource::ulam;
  // Per-cell standard errors; only populated for histogram densities.
  std::vector<double> std_errors;

  std::size_t cells() const { return values.size(); }
};

struct DensityEval {
  double value;
  bool at_breakpoint;  // x collided with a cell boundary; right cell was used
};

// Step value of the cell containing x.  At a breakpoint the right cell is
// used and flagged.
DensityEval eval_density(const StepDensity& d, double x);

double min_breakpoint_distance(const StepDensity& d, double x);

struct DensityDiagnostics {
  double total_variation = 0.0;
  double sup = 0.0;
  double inf = 0.0;
  std::vector<double> residuals;  // self-consistency residuals, if computed
};

DensityDiagnostics density_diagnostics(const StepDensity& d);

struct UlamResult {
  StepDensity density;
  int iterations = 0;
  double residual = 0.0;
};

// Ulam discretization on a uniform partition, solved by power iteration
// (deterministic uniform start).  Throws ConvergenceError if the sup-norm
// density residual stays above tol for max_iterations steps.
UlamResult ulam_density(const TentParams& p, int bins, int max_iterations = 100000,
                        double tol = 1e-12);

// Exact piecewise-constant density on the partition cut at the critical
// orbit points of a detected Markov structure.  Solves the transfer-operator
// fixed point restricted to step functions on that partition.
StepDensity markov_density(const TentParams& p, const MarkovStructure& ms);

// Normalized occupation histogram of one seeded orbit, with batch-means
// standard errors per cell.  At s = 2 a forward orbit collapses onto exact
// dyadics in binary64, so the orbit is generated as a uniformly weighted
// backward (preimage) chain instead, which has the same invariant law.
StepDensity orbit_histogram(const TentParams& p, std::uint64_t seed, std::int64_t length,
                            int bins);

// |phi(x) - sum_{f^n(y)=x} phi(y)/s^n|, the n-step self-consistency residual.
// Throws if x collides with the critical orbit prefix to depth n.
double phipropn_residual(const TentParams& p, const StepDensity& d, double x, int n);

}  // namespace tentlim
