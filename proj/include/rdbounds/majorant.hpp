#ifndef RDBOUNDS_MAJORANT_HPP
#define RDBOUNDS_MAJORANT_HPP

#include <optional>

#include "rdbounds/fem.hpp"

namespace rdb {

/// Residuals of the strong form for a candidate pair (v, y):
/// r1 = f - rho v + div y per cell (affine; stored at the cell vertices),
/// r2 = G - alpha v - y.nu per tag-3 edge (endpoint values),
/// rN = F - y.nu per tag-2 edge (endpoint values).
struct Residuals {
  Eigen::Matrix<double, Eigen::Dynamic, 3> r1;
  NodalVectors r2;
  NodalVectors rN;
};

Residuals residuals(const Scenario& s, const Coefficients& coeffs, const ScalarField& v,
                    const FluxField& y);

/// Squared L2 norms of the residual fields (exact quadrature: midpoint rule
/// on cells, Simpson on edges).
double r1_norm_sq(const Mesh& mesh, const Residuals& r);
double r2_norm_sq(const Mesh& mesh, const Residuals& r);
double rN_norm_sq(const Mesh& mesh, const Residuals& r);

/// Mixed-energy distance between y and the exact flux of v:
/// int (A grad v - y) . A^{-1} (A grad v - y) dx >= 0.
double d_term(const Coefficients& coeffs, const ScalarField& v, const FluxField& y);

/// Multipliers of the quadratic majorant form; +infinity marks a term that is
/// absent because its residual norm vanishes (handled by algebraic removal).
struct MajorantGamma {
  double g1 = 1.0, g2 = 1.0, g3 = 1.0, g4 = 1.0;
};

/// kappa = 1/g1 + sigma1^2/g2 + sigma3^2/g3 + sigma2^2/g4, skipping absent
/// terms. sigma3 rides with the tag-3 residual and sigma2 with the tag-2
/// residual, matching the term-by-term Cauchy-Schwarz pairing.
double kappa_of(const MajorantGamma& gamma, const std::array<double, 3>& sigma);

struct MajorantValue {
  double total = 0.0;
  double d_part = 0.0;        // D(grad v, y)
  double r1_part = 0.0;       // ||(1-mu1) r1||^2
  double r2_part = 0.0;       // ||(1-mu2) r2||^2 on tag 3
  double neumann_part = 0.0;  // ||F - y.nu||^2 on tag 2
  double mu1_part = 0.0;      // ||mu1 r1 / sqrt(rho)||^2
  double mu2_part = 0.0;      // ||mu2 r2 / sqrt(alpha)||^2
  MajorantGamma gamma;
  double kappa = 0.0;
  VecX mu1, mu2;
  FluxField flux;
};

/// Squared-sum form of the guaranteed upper bound:
/// (D^1/2 + sigma1 ||(1-mu1) r1|| + sigma3 ||(1-mu2) r2|| + sigma2 ||rN||)^2
/// plus the two weighted lower-order terms. Requires mu in [0,1] and positive
/// rho / alpha wherever the corresponding mu is positive.
double majorant_sum_form(const Scenario& s, const Coefficients& coeffs, const ScalarField& v,
                         const FluxField& y, const VecX& mu1, const VecX& mu2);

/// Quadratic form with free multipliers gamma: kappa * (g1 D + g2 ||(1-mu1)r1||^2
/// + g3 ||(1-mu2)r2||^2 + g4 ||rN||^2) + lower-order terms. Never below the
/// squared-sum form, and equal to it at gamma = optimal_gamma.
MajorantValue majorant_gamma_form(const Scenario& s, const Coefficients& coeffs,
                                  const ScalarField& v, const FluxField& y,
                                  const MajorantGamma& gamma, const VecX& mu1, const VecX& mu2);

/// g1 = D^-1/2, g2 = sigma1/||(1-mu1)r1||, g3 = sigma3/||(1-mu2)r2||,
/// g4 = sigma2/||rN||; vanishing denominators give +infinity (term absent).
MajorantGamma optimal_gamma(double d, double n1, double n2, double nN,
                            const std::array<double, 3>& sigma);

/// Pointwise minimizers of kg (1-mu)^2 + mu^2 / c: mu = kg c / (kg c + 1),
/// zero where the coefficient vanishes.
std::pair<VecX, VecX> optimal_mu(const Coefficients& coeffs, double kappa, double g2, double g3);

struct MajorantMinimizeOptions {
  int max_sweeps = 10;
  double cg_rtol = 1e-10;
  double stagnation_rtol = 1e-10;
};

struct MajorantMinimizeResult {
  MajorantValue value;
  std::vector<double> sweep_totals; // non-increasing; entry 0 is the initial value
  bool solver_warning = false;
};

/// Iterative minimization over the P1 flux space: (1) with gamma and mu fixed
/// the form is quadratic in the nodal flux values and is minimized by one SPD
/// solve; (2) gamma is set to its optimum; (3) mu is set to its optimum;
/// repeat. The initial flux is the nodal interpolant of A grad v. Every sweep
/// value is itself a guaranteed upper bound.
MajorantMinimizeResult minimize_majorant(const Scenario& s, const Coefficients& coeffs,
                                         const ScalarField& v,
                                         const MajorantMinimizeOptions& opts = {});

/// Closed-form upper bound for the squared radius:
/// sum_i delta_i^2/(beta_lower_i - delta_i) * (matching squared norm of u0).
/// Route: bound the majorant of u0 for the worst admissible coefficients with
/// the candidate flux y = A0 grad u0 and both lower-order weights at one; the
/// mean residuals then vanish, the worst-case additions are the delta^2 terms
/// above, and sending the three residual multipliers to their limits removes
/// kappa. The closed form is coded directly instead of taking numeric limits.
double radius_upper_sq(const Scenario& s, const ScalarField& u0);

/// max_i delta_i^2 / (beta_lower_i (beta_lower_i - delta_i)).
double normalized_radius_upper_sq(const Scenario& s);

/// Computable upper bounds for the worst admissible coefficients of the three
/// majorant ingredients at candidate flux y, written in terms of the mean
/// residual quantities; every admissible perturbation satisfies them pointwise.
struct ExtremalBounds {
  double d_bound = 0.0;
  double r1_bound = 0.0;
  double r2_bound = 0.0;
};
ExtremalBounds extremal_residual_bounds(const Scenario& s, const ScalarField& u0,
                                        const FluxField& y);

} // namespace rdb

#endif
