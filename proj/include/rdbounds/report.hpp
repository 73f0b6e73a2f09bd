#ifndef RDBOUNDS_REPORT_HPP
#define RDBOUNDS_REPORT_HPP

#include <optional>

#include <json.hpp>

#include "rdbounds/majorant.hpp"
#include "rdbounds/minorant.hpp"

namespace rdb {

using Json = nlohmann::ordered_json;

struct OrderingResult {
  double ratio = 1.0; // +inf when only the lower bound vanishes
  bool defined = true; // false for the 0/0 convention (empty budget)
  bool pass = false;
  bool strengthened_applicable = false; // first index attains every extremum
  double strengthened_bound = 0.0;
  bool strengthened_pass = true;
};

/// Ratio of the normalized upper to the normalized lower closed-form bound.
/// At least 1 for every admissible budget; when the first coefficient index
/// attains all the extrema the ratio also dominates
/// (beta_upper1/beta_lower1) (beta_upper1+delta1)/(beta_lower1-delta1).
OrderingResult verify_ordering(const Scenario& s);

struct OracleResult {
  int samples = 0;
  int skipped = 0; // samples whose solve failed
  double empirical_sq = 0.0;
  double empirical_normalized = 0.0;
  std::string worst_id;
  double slack = 0.0;          // recorded discretization term (normalized)
  double slack_u0_sq = 0.0;    // refinement discrepancy of the mean solution
  double slack_worst_sq = 0.0; // refinement discrepancy of the worst sample
};

/// Brute-force sampling of the solution set: the 8 extreme perturbations, the
/// flux-aligned softening candidate, and num_random random admissible draws.
/// The empirical radius is the max of |u0 - u_sample|_0^2 over the discrete
/// solutions; the slack terms quantify the discretization gap by one uniform
/// refinement of the mean problem and of the worst sample.
OracleResult sample_radius(const Scenario& s, int num_random, uint64_t seed, int threads = 1);

struct BoundsReport {
  Json scenario_echo;
  double c_upper_value = 0.0;
  double c_lower_value = 0.0;
  double theta_value = 0.0;
  std::array<double, 3> sigma{};
  std::array<double, 3> sigma_other{};
  std::string sigma_convention;
  double mean_energy_norm = 0.0;
  double h = 0.0;
  double lower_analytic = 0.0;
  double lower_optimized = 0.0;
  double lower_normalized = 0.0;
  double upper_value = 0.0;
  double upper_normalized = 0.0;
  std::optional<OracleResult> oracle;
  OrderingResult ordering;
  ScalarField u0;
  MinorantValue minorant; // best minorant found; its witness maximizes the lower bound
};

struct ReportOptions {
  uint64_t seed = 1;
  int threads = 1;
  MinorantSearchOptions minorant;
};

/// Full two-sided pipeline without the oracle: solve the mean problem and
/// populate every bound field. Deterministic for a fixed scenario and seed.
BoundsReport compute_bounds(const Scenario& s, const ReportOptions& opts = {});

/// JSON with the stable schema
/// {"scenario", "constants", "mean", "lower", "upper", "oracle"?, "ordering"}.
/// "lower" carries the part breakdown of the best minorant value found.
Json report_to_json(const BoundsReport& report);

/// Part breakdown of a minorant evaluation.
Json minorant_to_json(const MinorantValue& value);

/// Part breakdown, multipliers, kappa and the flux file path of a majorant
/// evaluation (infinite multipliers of absent terms serialize as "inf").
Json majorant_to_json(const MajorantValue& value, const std::string& flux_path);

/// Human-readable rendering of a report JSON (9 significant digits, the same
/// formatting the CLI prints).
std::string render_report(const Json& report);

/// CSV table of a delta sweep: delta, lower_norm, upper_norm, empirical_norm,
/// ratio. Applies each value to all three uncertainty magnitudes.
std::string sweep_table(const Scenario& base, const std::vector<double>& deltas, int num_random,
                        uint64_t seed, int threads = 1);

/// Shared float formatting: 9 significant digits.
std::string fmt9(double x);

} // namespace rdb

#endif
