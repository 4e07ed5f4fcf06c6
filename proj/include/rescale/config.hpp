#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "rescale/chain.hpp"
#include "rescale/grid.hpp"
#include "rescale/lattice.hpp"
#include "rescale/laws.hpp"
#include "rescale/pantograph.hpp"
#include "rescale/solver.hpp"
#include "rescale/supercritical.hpp"

namespace rescale {

using json = nlohmann::json;

// Schema: a law is {"atoms": [{"a", "p", "shift": {"kind", ...}}, ...]} with
// an optional {"q_lattice": {"q", "m": [...]}}. Shift kinds: "point" (b),
// "exponential_from" (c), "uniform" (lo, hi), "point_plus_hypoexp" (c,
// kappas). Malformed documents throw std::invalid_argument or a json error.
ShiftLaw shift_from_json(const json& j);
json shift_to_json(const ShiftLaw& shift);
CoefficientLaw law_from_json(const json& j);
json law_to_json(const CoefficientLaw& law);

// {"kappas": [...], "atoms": [{"a", "c", "p"}, ...]}
PantographSpec pantograph_from_json(const json& j);
json pantograph_to_json(const PantographSpec& spec);

// {"kind": "hit_zero" | "hit_one" | "hit_positive" | "lattice_return"} or
// {"kind": "small_modulus", "M": ...} or {"kind": "fixed_horizon", "n": ...}
StoppingRule rule_from_json(const json& j);
json rule_to_json(const StoppingRule& rule);

// missing keys keep the documented defaults
QuadratureSettings quadrature_from_json(const json& j);

json regime_report_to_json(const RegimeReport& rep);
json span_report_to_json(const SpanReport& rep);
json unit_modulus_report_to_json(const UnitModulusReport& rep);
json q_lattice_report_to_json(const QLatticeReport& rep);

// fnv-1a over the canonical (key-sorted) dump, as 16 hex digits
std::string config_hash(const json& config);

// {"config_hash", "seed", "generated_at"}; generated_at is the one field
// excluded when comparing reruns byte for byte
json report_envelope(const json& config, std::uint64_t seed);

// comment line opening every csv artifact; carries no timestamp so reruns
// with the same config and seed reproduce files exactly
std::string csv_stamp(const json& config, std::uint64_t seed);

// {"x_min", "dx", "n", "extension": "clamp"}
json grid_header(const GridFunction& y);

void write_grid_csv(std::ostream& os, const GridFunction& y, const std::string& stamp);
GridFunction read_grid_csv(std::istream& is);
void write_trace_csv(std::ostream& os, const IterationTrace& trace, const std::string& stamp);
void write_paths_csv(std::ostream& os, const std::vector<PathRecord>& paths,
                     const std::string& stamp);
void write_samples_csv(std::ostream& os, const std::vector<double>& values,
                       const std::string& column, const std::string& stamp);
void write_cdf_csv(std::ostream& os, const EmpiricalCDF& cdf, const std::string& stamp);

}  // namespace rescale
