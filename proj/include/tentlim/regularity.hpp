#pragma once

// Certificates of global leaf regularity and the typicality statistics that
// go with them: exact periodic threads avoiding the critical point, the
// backward-visit statistic into a positive-measure box, and the critical
// orbit gap statistic.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tentlim/boxes.hpp"
#include "tentlim/core_map.hpp"
#include "tentlim/density.hpp"

namespace tentlim {

struct GRCertificate {
  enum class Kind { delta_avoidance, periodic_invariant_set, backward_visit };

  Kind kind = Kind::periodic_invariant_set;
  std::string word;           // forward branch itinerary of the periodic orbit
  std::vector<double> orbit;  // orbit points, word.size() of them
  double delta = 0.0;         // min over the orbit of |x - c|
  int depth = 0;              // verification depth (the period, for periodic kind)
  bool exact = false;         // enclosure-verified fixed point and separations
};

// Solves the affine fixed-point equation of the branch word, checks that the
// orbit realizes the word and stays away from c, and certifies the result
// with an interval contraction check.  Returns nullopt when the word is not
// realizable.
std::optional<GRCertificate> certify_periodic_gr(const TentParams& p, std::string_view word);

// All certified periodic words up to max_period (primitive words in their
// lexicographically minimal rotation), in lexicographic order.
std::vector<GRCertificate> search_periodic_certificates(const TentParams& p, int max_period);

// Largest complement-component length of the first n+1 critical orbit points.
double gap_statistic(const TentParams& p, int n);

struct VisitFractionReport {
  std::vector<double> fraction_by_depth;  // index d: some backward shift <= d lands in B'
  double depth0_fraction = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

// Fraction of sampled threads whose backward shifts visit the shrunken box
// B' = pi_0^{-1}(J') intersected with `box`, by depth.  Monotone in depth by
// construction.
VisitFractionReport backward_visit_fraction(const TentParams& p, const Box& box,
                                            const Interval& shrunk_base, MuHatSampler& sampler,
                                            int max_depth, std::size_t n_samples);

// The quarter-shrunk interval (a + l/4, b - l/4) used to separate visits from
// the box boundary.
Interval shrink_quarter(const Interval& J);

struct TypicalityConfig {
  int orbit_prefix = 4;  // N for the positive-measure box construction
  int box_depth = 30;
  int visit_depth = 200;
  std::size_t visit_samples = 10000;
  std::size_t mc_samples = 200000;
  int period_bound = 10;
  int bins = 4096;  // Ulam resolution when no exact density exists
  std::uint64_t seed = 1;
  bool allow_sqrt2 = false;
};

struct GapPoint {
  int n = 0;
  double gap = 0.0;
};

struct TypicalityReport {
  double slope = 0.0;
  std::uint64_t seed = 0;
  std::vector<GapPoint> gaps;
  Box box;
  double best_probe = 0.0;
  MeasureEnclosure alpha_at_probe;
  double pccomp_target = 0.0;  // sup_phi * (1 - s^-N)
  Interval shrunk_base;
  BoxMeasureReport product_mc;     // muhat(B') vs m(J') * alpha
  double product_reference = 0.0;  // m(J') * alpha midpoint
  VisitFractionReport visits;
  std::size_t certificates_found = 0;
  double certificate_min_delta = 0.0;
  std::vector<GRCertificate> sample_certificates;  // first few, for the report
  // Sampling cannot see Baire category; reports never claim the
  // dense-G-delta statements.
  std::string untested = "topological (Baire category) typicality is not assessed";
};

// Chooses the complement component of the orbit prefix maximizing the cell
// sup of phi, builds the box over it, and bundles the statistics.
TypicalityReport typicality_report(const TentParams& p, const StepDensity& phi,
                                   const TypicalityConfig& cfg);

// The box-construction half of typicality_report, usable on its own.
Box build_positive_measure_box(const TentParams& p, const StepDensity& phi, int orbit_prefix,
                               int depth, bool allow_sqrt2 = false);

// A probe in the box base maximizing phi (midpoint of the maximizing density
// cell, nudged off breakpoints).
double best_probe(const Box& box);

}  // namespace tentlim
