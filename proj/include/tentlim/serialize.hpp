#pragma once

// JSON and CSV adapters for the library types.  JSON uses nlohmann::json;
// CSV writers emit a header row and shortest-roundtrip doubles so output is
// byte-stable for identical inputs.

#include <string>

#include <json.hpp>

#include "tentlim/boxes.hpp"
#include "tentlim/core_map.hpp"
#include "tentlim/density.hpp"
#include "tentlim/regularity.hpp"
#include "tentlim/threads.hpp"

namespace tentlim {

using json = nlohmann::json;

json to_json(const Interval& v);
json to_json(const MarkovStructure& v);
json to_json(const StepDensity& v);
json to_json(const DensityDiagnostics& v);
json to_json(const FiniteThread& v);
json to_json(const IntervalThread& v);
json to_json(const Decomposition& v);
json to_json(const MeasureEnclosure& v);
json to_json(const ExcludedCylinder& v);
json to_json(const Box& v);  // descriptor only; the density is summarized
json to_json(const BoxMeasureReport& v);
json to_json(const HolonomyReport& v);
json to_json(const GRCertificate& v);
json to_json(const VisitFractionReport& v);
json to_json(const TypicalityReport& v);

// rows: cell-lo, cell-hi, value (plus std-error for histograms)
std::string density_csv(const StepDensity& d);

// level-0 projections of pieces and nodes of a decomposition
std::string decomposition_csv(const Decomposition& d);

// Result envelope: tool version, command, config echo, payload.  Timing is
// deliberately excluded so identical configs give identical bytes.
json make_envelope(const std::string& command, const json& config, const json& payload);

std::string format_double(double x);

}  // namespace tentlim
