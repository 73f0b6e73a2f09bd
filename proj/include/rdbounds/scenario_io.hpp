#ifndef RDBOUNDS_SCENARIO_IO_HPP
#define RDBOUNDS_SCENARIO_IO_HPP

#include <map>
#include <string>
#include <vector>

#include "rdbounds/scenario.hpp"

namespace rdb {

/// Flat key/value form of a scenario file. Keys:
///   n | mesh, a0, rho0, alpha0, f, F, G, delta1..3,
///   beta_lower1..3, beta_upper1..3, c1..3, sigma_convention.
/// Values are the verbatim right-hand sides ("1.0", "2 0.5 1", "file:path").
using RawScenario = std::map<std::string, std::string>;

/// Parse the sectioned scenario text ([domain], [coefficients], [loads],
/// [uncertainty], [bounds], [embedding]) into the flat form. Unknown sections
/// or keys are errors with line numbers.
RawScenario parse_scenario_text(const std::string& text);

/// Apply "key=value" overrides; unknown keys are rejected. "delta" fans out
/// to all three magnitudes.
void apply_override(RawScenario& raw, const std::string& key, const std::string& value);

/// Materialize a validated Scenario. Relative mesh / data paths resolve
/// against base_dir. Missing ellipticity bounds default to the exact
/// coefficient ranges; missing embedding constants default to the
/// unit-square values.
Scenario build_scenario(const RawScenario& raw, const std::string& base_dir);

/// Convenience: read file, parse, apply overrides, build.
Scenario load_scenario_file(const std::string& path,
                            const std::vector<std::pair<std::string, std::string>>& overrides = {});

} // namespace rdb

#endif
