#include "tentlim/density.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tentlim {

namespace {

double uniform01(std::mt19937_64& rng) {
  // 53 random bits; fixed mapping so results do not depend on the standard
  // library's distribution implementation.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double cell_mass(const StepDensity& d) {
  double total = 0.0;
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    total += d.values[i] * (d.breakpoints[i + 1] - d.breakpoints[i]);
  }
  return total;
}

void normalize(StepDensity& d) {
  const double total = cell_mass(d);
  for (double& v : d.values) v /= total;
  d.normalization_residual = std::abs(cell_mass(d) - 1.0);
}

}  // namespace

DensityEval eval_density(const StepDensity& d, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("eval_density: x outside [0,1]");
  const auto& b = d.breakpoints;
  auto it = std::upper_bound(b.begin(), b.end(), x);
  std::size_t cell = (it == b.begin()) ? 0 : static_cast<std::size_t>(it - b.begin()) - 1;
  if (cell >= d.values.size()) cell = d.values.size() - 1;  // x == 1
  const bool at_bp = std::binary_search(b.begin(), b.end(), x);
  return DensityEval{d.values[cell], at_bp};
}

double min_breakpoint_distance(const StepDensity& d, double x) {
  double best = std::numeric_limits<double>::infinity();
  for (double b : d.breakpoints) best = std::min(best, std::abs(x - b));
  return best;
}

DensityDiagnostics density_diagnostics(const StepDensity& d) {
  DensityDiagnostics out;
  out.sup = *std::max_element(d.values.begin(), d.values.end());
  out.inf = *std::min_element(d.values.begin(), d.values.end());
  out.total_variation = 0.0;
  for (std::size_t i = 0; i + 1 < d.values.size(); ++i) {
    out.total_variation += std::abs(d.values[i + 1] - d.values[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ulam

UlamResult ulam_density(const TentParams& p, int bins, int max_iterations, double tol) {
  if (bins < 16) throw std::invalid_argument("ulam_density: need at least 16 bins");
  if (max_iterations < 1) throw std::invalid_argument("ulam_density: need iterations >= 1");

  const double h = 1.0 / bins;
  const double c = p.crit();

  // Row-stochastic transition matrix: row i spreads the mass of bin i
  // uniformly over the image of each monotone piece of the bin.
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(bins) * 4);
  for (int i = 0; i < bins; ++i) {
    const double u = i * h;
    const double v = (i + 1) * h;
    double splits[3] = {u, v, v};
    int npieces = 1;
    if (u < c && c < v) {
      splits[1] = c;
      splits[2] = v;
      npieces = 2;
    }
    for (int k = 0; k < npieces; ++k) {
      const double a = splits[k], b = splits[k + 1];
      if (!(b > a)) continue;
      const double fa = eval(p, a), fb = eval(p, b);
      const double lo = std::min(fa, fb), hi = std::max(fa, fb);
      const double weight = (b - a) / (v - u);
      const int j0 = std::clamp(static_cast<int>(lo / h), 0, bins - 1);
      const int j1 = std::clamp(static_cast<int>(hi / h), 0, bins - 1);
      for (int j = j0; j <= j1; ++j) {
        const double ov = std::min(hi, (j + 1) * h) - std::max(lo, j * h);
        if (ov > 0.0) trips.emplace_back(i, j, weight * ov / (hi - lo));
      }
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> P(bins, bins);
  P.setFromTriplets(trips.begin(), trips.end());

  Eigen::VectorXd v = Eigen::VectorXd::Constant(bins, 1.0 / bins);
  double residual = std::numeric_limits<double>::infinity();
  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    Eigen::VectorXd w = P.transpose() * v;
    w /= w.sum();
    residual = (w - v).lpNorm<Eigen::Infinity>() / h;  // sup-norm in density units
    v = std::move(w);
    if (residual <= tol) break;
  }
  if (residual > tol) {
    throw ConvergenceError("ulam_density: power iteration did not converge", residual);
  }

  UlamResult out;
  out.iterations = iter + 1;
  out.residual = residual;
  out.density.source = DensitySource::ulam;
  out.density.breakpoints.resize(bins + 1);
  for (int i = 0; i <= bins; ++i) out.density.breakpoints[i] = i * h;
  out.density.breakpoints.back() = 1.0;
  out.density.values.resize(bins);
  for (int i = 0; i < bins; ++i) out.density.values[i] = v[i] / h;
  normalize(out.density);
  for (double val : out.density.values) {
    if (!(val > 0.0)) {
      throw ConvergenceError("ulam_density: non-positive fixed vector entry", residual);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact Markov solve

StepDensity markov_density(const TentParams& p, const MarkovStructure& ms) {
  if (ms.orbit_points.empty()) {
    throw std::invalid_argument("markov_density: empty Markov structure");
  }

  // Partition cut at the distinct interior orbit points.
  std::vector<double> cuts;
  for (double x : ms.orbit_points) {
    if (x > 1e-12 && x < 1.0 - 1e-12) cuts.push_back(x);
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> bps;
  bps.push_back(0.0);
  for (double x : cuts) {
    if (x - bps.back() > 1e-12) bps.push_back(x);
  }
  bps.push_back(1.0);
  const int n = static_cast<int>(bps.size()) - 1;

  // Transfer operator on step functions: (L phi)_i = sum over cells j whose
  // image covers cell i of phi_j / s.  The partition is Markov, so each cell
  // image is a union of cells and containment can be tested at midpoints.
  const double s = p.slope();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    const Interval cell{bps[j], bps[j + 1]};
    const Interval img = image_interval(p, cell);
    for (int i = 0; i < n; ++i) {
      const double mid = 0.5 * (bps[i] + bps[i + 1]);
      if (img.lo - 1e-9 <= mid && mid <= img.hi + 1e-9) {
        M(i, j) = 1.0 / s;
      }
    }
  }

  // Solve (M - I) phi = 0 with the normalization row sum phi_j |cell_j| = 1
  // replacing the first balance equation.
  Eigen::MatrixXd A = M - Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) A(0, j) = bps[j + 1] - bps[j];
  rhs(0) = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) {
    throw ConvergenceError("markov_density: singular transfer system", 0.0);
  }
  Eigen::VectorXd phi = lu.solve(rhs);
  for (int j = 0; j < n; ++j) {
    if (!(phi(j) > 0.0)) {
      throw ConvergenceError("markov_density: non-positive density value", phi(j));
    }
  }
  const double residual = (M * phi - phi).lpNorm<Eigen::Infinity>();
  if (residual > 1e-9) {
    throw ConvergenceError("markov_density: fixed-point residual too large", residual);
  }

  StepDensity d;
  d.source = DensitySource::markov_exact;
  d.breakpoints = bps;
  d.values.assign(phi.data(), phi.data() + n);
  normalize(d);
  return d;
}

// ---------------------------------------------------------------------------
// Orbit histogram

StepDensity orbit_histogram(const TentParams& p, std::uint64_t seed, std::int64_t length,
                            int bins) {
  if (length < 100000) throw std::invalid_argument("orbit_histogram: length must be >= 1e5");
  if (bins < 2) throw std::invalid_argument("orbit_histogram: need at least 2 bins");

  std::mt19937_64 rng(seed);
  const std::vector<double> pc = critical_orbit(p, 64);
  auto away_from_pc = [&](double x) {
    for (double o : pc) {
      if (std::abs(x - o) < 1e-9) return false;
    }
    return true;
  };
  double x = uniform01(rng);
  while (!(x > 0.0 && x < 1.0) || !away_from_pc(x)) x = uniform01(rng);

  // Forward binary64 orbits degenerate when the derivative is an exact power
  // of two per step pair: at s = 2 each step is a bit shift, and at
  // s = sqrt(2) the second iterate is a full slope-2 tent on [2-s, 1]; either
  // way the mantissa drains and the orbit collapses onto exact dyadics.  At
  // s = 2 a uniformly weighted backward (preimage) chain realizes the exact
  // invariant law; at s = sqrt(2) a seeded dither far below the Monte Carlo
  // resolution keeps the forward orbit typical.
  const bool backward = p.is_full();
  const bool dither = p.is_sqrt2();
  auto step = [&](double z) {
    if (backward) return (rng() & 1u) ? 0.5 * z : 1.0 - 0.5 * z;
    double y = eval(p, z);
    if (dither) {
      y += (uniform01(rng) - 0.5) * 0x1.0p-40;
      y = std::clamp(y, 0.0, 1.0);
    }
    return y;
  };
  for (int k = 0; k < 1000; ++k) x = step(x);

  const int nbatch = 100;
  const std::int64_t batch_len = length / nbatch;
  const double h = 1.0 / bins;
  std::vector<std::int64_t> counts(bins, 0);
  std::vector<std::vector<std::int64_t>> batch_counts(nbatch, std::vector<std::int64_t>(bins, 0));
  std::int64_t emitted = 0;
  for (int b = 0; b < nbatch; ++b) {
    for (std::int64_t k = 0; k < batch_len; ++k) {
      int j = std::clamp(static_cast<int>(x / h), 0, bins - 1);
      ++counts[j];
      ++batch_counts[b][j];
      ++emitted;
      x = step(x);
    }
  }

  StepDensity d;
  d.source = DensitySource::histogram;
  d.breakpoints.resize(bins + 1);
  for (int i = 0; i <= bins; ++i) d.breakpoints[i] = i * h;
  d.breakpoints.back() = 1.0;
  d.values.resize(bins);
  d.std_errors.resize(bins);
  for (int j = 0; j < bins; ++j) {
    d.values[j] = static_cast<double>(counts[j]) / (static_cast<double>(emitted) * h);
    double mean = 0.0, var = 0.0;
    for (int b = 0; b < nbatch; ++b) {
      mean += static_cast<double>(batch_counts[b][j]) / (static_cast<double>(batch_len) * h);
    }
    mean /= nbatch;
    for (int b = 0; b < nbatch; ++b) {
      const double dev =
          static_cast<double>(batch_counts[b][j]) / (static_cast<double>(batch_len) * h) - mean;
      var += dev * dev;
    }
    var /= (nbatch - 1);
    d.std_errors[j] = std::sqrt(var / nbatch);
  }
  d.normalization_residual = std::abs(cell_mass(d) - 1.0);
  return d;
}

// ---------------------------------------------------------------------------
// Self-consistency residual

double phipropn_residual(const TentParams& p, const StepDensity& d, double x, int n) {
  if (n < 1) throw std::invalid_argument("phipropn_residual: n must be >= 1");
  if (n > 24) throw std::invalid_argument("phipropn_residual: preimage tree too deep");
  const std::vector<double> pc = critical_orbit(p, n);
  for (double o : pc) {
    if (std::abs(x - o) < 1e-12) {
      throw std::invalid_argument("phipropn_residual: x collides with the critical orbit");
    }
  }
  std::vector<double> level{x};
  std::vector<double> next;
  for (int k = 0; k < n; ++k) {
    next.clear();
    for (double y : level) {
      for (const Preimage& pre : preimages(p, y)) {
        // At y = 1 the two branches coincide at c; count the point once.
        if (!next.empty() && next.back() == pre.point) continue;
        next.push_back(pre.point);
      }
    }
    level = next;
  }
  const double sn = std::pow(p.slope(), n);
  double total = 0.0;
  for (double y : level) total += eval_density(d, y).value / sn;
  return std::abs(eval_density(d, x).value - total);
}

}  // namespace tentlim
