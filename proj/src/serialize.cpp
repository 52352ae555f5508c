#include "tentlim/serialize.hpp"

#include <cstdio>

#include "tentlim/version.hpp"

namespace tentlim {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

json to_json(const Interval& v) { return json{{"lo", v.lo}, {"hi", v.hi}}; }

json to_json(const MarkovStructure& v) {
  return json{{"preperiod", v.preperiod},
              {"period", v.period},
              {"orbit_points", v.orbit_points},
              {"certified", v.certified}};
}

json to_json(const StepDensity& v) {
  json j{{"breakpoints", v.breakpoints},
         {"values", v.values},
         {"normalization_residual", v.normalization_residual}};
  switch (v.source) {
    case DensitySource::ulam: j["source"] = "ulam"; break;
    case DensitySource::markov_exact: j["source"] = "markov-exact"; break;
    case DensitySource::histogram: j["source"] = "histogram"; break;
  }
  if (!v.std_errors.empty()) j["std_errors"] = v.std_errors;
  return j;
}

json to_json(const DensityDiagnostics& v) {
  return json{{"total_variation", v.total_variation},
              {"sup", v.sup},
              {"inf", v.inf},
              {"residuals", v.residuals}};
}

json to_json(const FiniteThread& v) { return json{{"coords", v.coords}}; }

json to_json(const IntervalThread& v) {
  json levels = json::array();
  for (const Interval& J : v.levels) levels.push_back(to_json(J));
  return json{{"levels", levels}};
}

json to_json(const Decomposition& v) {
  json pieces = json::array();
  for (const IntervalThread& piece : v.pieces) pieces.push_back(to_json(piece));
  json nodes = json::array();
  for (const FiniteThread& node : v.nodes) nodes.push_back(to_json(node));
  return json{{"pieces", pieces}, {"nodes", nodes}};
}

json to_json(const MeasureEnclosure& v) {
  return json{{"lower", v.lower}, {"upper", v.upper}, {"width", v.width()}};
}

json to_json(const ExcludedCylinder& v) {
  return json{{"m", v.m},
              {"component", to_json(v.component)},
              {"branch_word", v.branch_word}};
}

json to_json(const Box& v) {
  json excluded = json::array();
  for (const ExcludedCylinder& ex : v.excluded) excluded.push_back(to_json(ex));
  return json{{"base", to_json(v.base)},
              {"level", 0},
              {"flat_prefix", v.flat_prefix},
              {"tail_depth", v.tail_depth},
              {"excluded", excluded},
              {"exclusions_complete", v.exclusions_complete},
              {"sup_phi", v.sup_phi},
              {"tail_bound", v.tail_bound},
              {"geometric_tail", v.geometric_tail},
              {"slope", v.slope},
              {"density_source", to_json(v.density)["source"]}};
}

json to_json(const BoxMeasureReport& v) {
  return json{{"samples", v.samples},
              {"estimate", v.estimate},
              {"std_error", v.std_error},
              {"systematic_low", v.systematic_low},
              {"systematic_high", v.systematic_high},
              {"unknown_fraction", v.unknown_fraction},
              {"seed", v.seed}};
}

json to_json(const HolonomyReport& v) {
  json alphas = json::array();
  for (const MeasureEnclosure& a : v.alphas) alphas.push_back(to_json(a));
  return json{{"probes", v.probes},
              {"alphas", alphas},
              {"max_pairwise_diff", v.max_pairwise_diff},
              {"tolerance", v.tolerance},
              {"pass", v.pass}};
}

json to_json(const GRCertificate& v) {
  const char* kind = "periodic-invariant-set";
  if (v.kind == GRCertificate::Kind::delta_avoidance) kind = "delta-avoidance";
  if (v.kind == GRCertificate::Kind::backward_visit) kind = "backward-visit";
  return json{{"kind", kind},
              {"word", v.word},
              {"orbit", v.orbit},
              {"delta", v.delta},
              {"depth", v.depth},
              {"exact", v.exact}};
}

json to_json(const VisitFractionReport& v) {
  return json{{"fraction_by_depth", v.fraction_by_depth},
              {"depth0_fraction", v.depth0_fraction},
              {"samples", v.samples},
              {"seed", v.seed}};
}

json to_json(const TypicalityReport& v) {
  json gaps = json::array();
  for (const GapPoint& g : v.gaps) gaps.push_back(json{{"n", g.n}, {"gap", g.gap}});
  json certs = json::array();
  for (const GRCertificate& cert : v.sample_certificates) certs.push_back(to_json(cert));
  return json{{"slope", v.slope},
              {"seed", v.seed},
              {"gaps", gaps},
              {"box", to_json(v.box)},
              {"best_probe", v.best_probe},
              {"alpha_at_probe", to_json(v.alpha_at_probe)},
              {"pccomp_target", v.pccomp_target},
              {"shrunk_base", to_json(v.shrunk_base)},
              {"product_mc", to_json(v.product_mc)},
              {"product_reference", v.product_reference},
              {"visits", to_json(v.visits)},
              {"certificates_found", v.certificates_found},
              {"certificate_min_delta", v.certificate_min_delta},
              {"untested", v.untested}};
}

std::string density_csv(const StepDensity& d) {
  std::string out;
  const bool with_se = !d.std_errors.empty();
  out += with_se ? "cell_lo,cell_hi,value,std_error\n" : "cell_lo,cell_hi,value\n";
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    out += format_double(d.breakpoints[i]);
    out += ',';
    out += format_double(d.breakpoints[i + 1]);
    out += ',';
    out += format_double(d.values[i]);
    if (with_se) {
      out += ',';
      out += format_double(d.std_errors[i]);
    }
    out += '\n';
  }
  return out;
}

std::string decomposition_csv(const Decomposition& d) {
  std::string out = "kind,index,level0_lo,level0_hi\n";
  for (std::size_t i = 0; i < d.pieces.size(); ++i) {
    out += "piece,";
    out += std::to_string(i);
    out += ',';
    out += format_double(d.pieces[i].levels[0].lo);
    out += ',';
    out += format_double(d.pieces[i].levels[0].hi);
    out += '\n';
  }
  for (std::size_t i = 0; i < d.nodes.size(); ++i) {
    out += "node,";
    out += std::to_string(i);
    out += ',';
    out += format_double(d.nodes[i].coords[0]);
    out += ',';
    out += format_double(d.nodes[i].coords[0]);
    out += '\n';
  }
  return out;
}

json make_envelope(const std::string& command, const json& config, const json& payload) {
  return json{{"tool", "tentlim"},
              {"version", kVersion},
              {"command", command},
              {"config", config},
              {"payload", payload}};
}

}  // namespace tentlim
