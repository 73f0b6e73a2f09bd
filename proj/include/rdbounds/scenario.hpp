#ifndef RDBOUNDS_SCENARIO_HPP
#define RDBOUNDS_SCENARIO_HPP

#include <array>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "rdbounds/mesh.hpp"
#include "rdbounds/types.hpp"

namespace rdb {

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A concrete admissible coefficient triple: diffusion matrix per cell,
/// reaction coefficient per cell, Robin coefficient per tag-3 edge.
struct Coefficients {
  std::vector<Mat2> a;
  VecX rho;
  VecX alpha;
};

enum class SigmaConvention { derived, paper };

/// Friedrichs / trace constants for ||w||^2 <= C ||grad w||^2 bounds on V0.
/// Defaults are valid for the unit-square layout produced by unit_square_mesh
/// (Dirichlet left, Neumann top+bottom, Robin right); for other geometries
/// supply constants that are at least the true ones or the upper bound
/// machinery loses its guarantee.
struct Embedding {
  double c1 = 0.40529;  // Friedrichs, one Dirichlet side of the unit square (4/pi^2 rounded up)
  double c2 = 0.9709;   // trace on top+bottom, Rayleigh-quotient estimate rounded up
  double c3 = 1.0;      // trace on the right edge (sharp: attained by w = x)
  SigmaConvention convention = SigmaConvention::derived;
};

/// Magnitudes of the admissible coefficient variations.
struct UncertaintyBudget {
  std::array<double, 3> delta{0.0, 0.0, 0.0};
};

/// Unit-size perturbation directions: |Psi| <= 1 in spectral norm per cell,
/// |psi_rho| <= 1 per cell, |psi_alpha| <= 1 per tag-3 edge.
struct Perturbation {
  std::vector<Mat2> psi_a;
  VecX psi_rho;
  VecX psi_alpha;
  std::string id;
};

/// Full problem data: mesh, mean coefficients, loads, uncertainty budget,
/// ellipticity bounds and embedding constants. Immutable once validated.
struct Scenario {
  MeshPtr mesh;
  Coefficients mean;          // a0 per cell, rho0 per cell, alpha0 per tag-3 edge
  VecX f;                     // source, per cell
  VecX neumann;               // F, per tag-2 edge
  VecX robin;                 // G, per tag-3 edge
  UncertaintyBudget budget;
  std::array<double, 3> beta_lower{1.0, 1.0, 1.0};
  std::array<double, 3> beta_upper{1.0, 1.0, 1.0};
  Embedding embedding;

  /// Key/value echo of how the scenario was specified (for reports).
  std::map<std::string, std::string> spec_echo;

  /// Check every invariant: coefficient ranges against the beta bounds,
  /// 0 <= delta_i < beta_lower_i, positive embedding constants, f not
  /// identically zero. Throws ScenarioError on violation.
  void validate() const;
};

/// Scenario with spatially constant data on the given mesh.
Scenario make_uniform_scenario(MeshPtr mesh, const Mat2& a0, double rho0, double alpha0,
                               double f, double F, double G,
                               const std::array<double, 3>& delta,
                               const std::array<double, 3>& beta_lower,
                               const std::array<double, 3>& beta_upper,
                               const Embedding& embedding = {});

/// max_i beta_upper_i / (beta_lower_i - delta_i); >= 1, equality only without
/// uncertainty and with coinciding bounds.
double c_upper(const Scenario& s);

/// min_i beta_lower_i / (beta_upper_i + delta_i); <= 1.
double c_lower(const Scenario& s);

/// min_i delta_i / beta_upper_i; in [0, 1).
double theta(const Scenario& s);

/// Multipliers pairing the embedding constants with the ellipticity floor of
/// the diffusion matrix: (sqrt(C1/b1), sqrt(C2/b1), sqrt(C3/b1)) in the
/// "derived" convention; the "paper" convention keeps an extra C1 factor
/// under the square roots of sigma_2 and sigma_3 (kept for comparison, the
/// derived form is what the trace inequalities support).
std::array<double, 3> sigma_constants(const Scenario& s);
std::array<double, 3> sigma_constants(const Scenario& s, SigmaConvention convention);

/// Apply a perturbation: A = A0 + delta_1 Psi, rho = rho0 + delta_2 psi_rho,
/// alpha = alpha0 + delta_3 psi_alpha. Validates the perturbation first.
Coefficients perturb(const Scenario& s, const Perturbation& p);

/// Throws ScenarioError if any pointwise unit bound is violated.
void validate_perturbation(const Scenario& s, const Perturbation& p);

/// The 8 constant sign combinations (Psi = +-I, psi_rho = +-1, psi_alpha = +-1).
std::vector<Perturbation> extreme_perturbations(const Scenario& s);

/// Softening aligned with the given per-cell gradient field:
/// Psi = -g g^T / |g|^2 (and -I where the gradient vanishes), psi = -1.
Perturbation flux_aligned_perturbation(const Scenario& s, const std::vector<Vec2>& cell_gradients);

/// Random admissible perturbation: per-cell symmetric Psi with spectral norm
/// drawn uniformly in [0,1], per-cell and per-edge psi uniform in [-1,1].
Perturbation random_perturbation(const Scenario& s, std::mt19937_64& rng);

/// Same data expressed on the uniformly refined mesh (cell and edge data are
/// inherited from the parent entities).
Scenario refine(const Scenario& s, const RefinedMesh& refined);

} // namespace rdb

#endif
