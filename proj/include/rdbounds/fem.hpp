#ifndef RDBOUNDS_FEM_HPP
#define RDBOUNDS_FEM_HPP

#include <string>
#include <vector>

#include "rdbounds/scenario.hpp"

namespace rdb {

struct FemError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Piecewise-linear scalar function given by one value per mesh node.
struct ScalarField {
  MeshPtr mesh;
  VecX values;

  ScalarField() = default;
  ScalarField(MeshPtr m, VecX v) : mesh(std::move(m)), values(std::move(v)) {}
  static ScalarField zero(MeshPtr m)
  {
    const int n = m->node_count();
    return ScalarField(std::move(m), VecX::Zero(n));
  }

  /// Constant gradient on triangle t.
  Vec2 gradient(int t) const;
  /// Value at an edge endpoint / arbitrary convex combination is linear; the
  /// per-cell midpoint evaluations used by the quadratures live in fem.cpp.
  bool in_v0() const;
};

/// Piecewise-linear vector field (each component P1), one (x,y) row per node.
struct FluxField {
  MeshPtr mesh;
  NodalVectors values;

  FluxField() = default;
  FluxField(MeshPtr m, NodalVectors v) : mesh(std::move(m)), values(std::move(v)) {}
  static FluxField zero(MeshPtr m)
  {
    const int n = m->node_count();
    return FluxField(std::move(m), NodalVectors::Zero(n, 2));
  }

  Vec2 at(int node) const { return values.row(node).transpose(); }
};

/// Exact divergence of the linear interpolant, constant per cell.
VecX flux_divergence(const FluxField& y);

/// y . nu sampled at the endpoints of every edge with the given tag (2 or 3),
/// one row (value at a, value at b) per edge in tag-list order.
NodalVectors normal_trace(const FluxField& y, int tag);

/// Nodal interpolant of a per-cell constant vector field (area-weighted
/// average over incident cells).
FluxField interpolate_cell_vectors(MeshPtr mesh, const std::vector<Vec2>& cell_values);

/// Symmetric positive definite system on the free (non-Dirichlet) nodes;
/// constrained rows carry an identity diagonal and zero load.
struct LinearSystem {
  MeshPtr mesh;
  SpMat matrix;
  VecX rhs;
  std::vector<uint8_t> constrained;
};

/// Stiffness + reaction mass + Robin boundary mass against the load
/// f dx + F ds(tag 2) + G ds(tag 3), with homogeneous Dirichlet rows on tag 1.
/// Requires per-cell SPD diffusion and nonnegative rho / alpha.
LinearSystem assemble(const Scenario& s, const Coefficients& coeffs);

struct SolveOptions {
  double rtol = 1e-10;
  int max_iterations_per_node = 10;
};

/// Diagonal-preconditioned conjugate gradients; throws FemError with the last
/// residual if it fails to converge.
ScalarField solve(const LinearSystem& system, const SolveOptions& opts = {});

/// Scales of the residual left after solve, |K u - b|_inf and |b|_2.
double residual_inf(const LinearSystem& system, const ScalarField& u);

/// a(u,w) = int A grad u . grad w + int rho u w + int_G3 alpha u w,
/// integrated exactly for P1 arguments.
double bilinear(const Coefficients& coeffs, const ScalarField& u, const ScalarField& w);

/// l(w) = int f w + int_G2 F w + int_G3 G w, exact for P1 w.
double load(const Scenario& s, const ScalarField& w);

/// sqrt(a(v,v)) for the given coefficient triple.
double energy_norm(const Coefficients& coeffs, const ScalarField& v);

/// delta_1 |grad v|^2 + delta_2 |v|^2 + delta_3 |v|^2 on tag 3 (all squared
/// L2 norms, exact quadrature).
double delta_norm_squared(const Scenario& s, const ScalarField& v);

/// Plain squared seminorms used by the closed-form bounds.
double grad_norm_squared(const ScalarField& v);
double l2_norm_squared(const ScalarField& v);
double boundary_norm_squared(const ScalarField& v, int tag);

/// Exact transfer of a coarse P1 field onto the refined mesh.
VecX prolong(const RefinedMesh& refined, const VecX& coarse_values);

// --- field / flux file formats -------------------------------------------

/// "field N" header followed by N nodal values, one per line.
std::string field_to_text(const ScalarField& f);
VecX field_from_text(const std::string& text);

/// "flux N" header followed by N lines "yx yy".
std::string flux_to_text(const FluxField& y);
NodalVectors flux_from_text(const std::string& text);

} // namespace rdb

#endif
