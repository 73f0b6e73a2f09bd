#include "rdbounds/embedding.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <random>

namespace rdb {

namespace {

// Stiffness of the Laplacian on the free nodes, identity on constrained ones.
SpMat free_stiffness(const Mesh& mesh)
{
  const int n = mesh.node_count();
  std::vector<Triplet> triplets;
  triplets.reserve(9 * mesh.triangle_count() + n);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    for (int i = 0; i < 3; ++i) {
      if (mesh.is_dirichlet(tri[i])) continue;
      for (int j = 0; j < 3; ++j) {
        if (mesh.is_dirichlet(tri[j])) continue;
        triplets.emplace_back(tri[i], tri[j],
                              mesh.area(t) *
                                  mesh.basis_gradient(t, i).dot(mesh.basis_gradient(t, j)));
      }
    }
  }
  for (int i : mesh.dirichlet_nodes()) triplets.emplace_back(i, i, 1.0);
  SpMat k(n, n);
  k.setFromTriplets(triplets.begin(), triplets.end());
  return k;
}

double power_iteration(const Mesh& mesh, const SpMat& b_matrix, const RayleighOptions& opts)
{
  const int n = mesh.node_count();
  const SpMat k = free_stiffness(mesh);

  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(opts.cg_rtol);
  cg.setMaxIterations(20l * n);
  cg.compute(k);

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  VecX v(n);
  for (int i = 0; i < n; ++i) v[i] = mesh.is_dirichlet(i) ? 0.0 : uni(rng);

  double lambda = 0.0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    VecX bv = b_matrix * v;
    for (int i : mesh.dirichlet_nodes()) bv[i] = 0.0;
    VecX w = cg.solve(bv);
    for (int i : mesh.dirichlet_nodes()) w[i] = 0.0;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    w /= norm;
    const double num = w.dot(b_matrix * w);
    const double den = w.dot(k * w);
    const double next = num / den;
    const bool settled = std::abs(next - lambda) <= opts.rtol * std::abs(next);
    lambda = next;
    v = std::move(w);
    if (settled) break;
  }
  return lambda;
}

} // namespace

double estimate_friedrichs_constant(const MeshPtr& mesh, const RayleighOptions& opts)
{
  const Mesh& m = *mesh;
  const int n = m.node_count();
  std::vector<Triplet> triplets;
  triplets.reserve(9 * m.triangle_count());
  for (int t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangles()[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        triplets.emplace_back(tri[i], tri[j], m.area(t) / 12.0 * (i == j ? 2.0 : 1.0));
  }
  SpMat mass(n, n);
  mass.setFromTriplets(triplets.begin(), triplets.end());
  return power_iteration(m, mass, opts);
}

double estimate_trace_constant(const MeshPtr& mesh, int tag, const RayleighOptions& opts)
{
  if (tag != 2 && tag != 3) throw FemError("trace constants are estimated on tags 2 and 3");
  const Mesh& m = *mesh;
  const int n = m.node_count();
  std::vector<Triplet> triplets;
  for (int e : m.edges_with_tag(tag)) {
    const auto& be = m.boundary_edges()[e];
    const double len = m.edge_length(e);
    const int nodes[2] = {be.a, be.b};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        triplets.emplace_back(nodes[i], nodes[j], len / 6.0 * (i == j ? 2.0 : 1.0));
  }
  SpMat mass(n, n);
  mass.setFromTriplets(triplets.begin(), triplets.end());
  return power_iteration(m, mass, opts);
}

} // namespace rdb
