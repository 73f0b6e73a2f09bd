#include "rdbounds/fem.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <sstream>

namespace rdb {

namespace {

void require_same_mesh(const MeshPtr& a, const MeshPtr& b)
{
  if (!a || !b || a.get() != b.get()) throw FemError("fields live on different meshes");
}

void check_coefficients(const Mesh& mesh, const Coefficients& coeffs)
{
  const int t = mesh.triangle_count();
  const int n3 = static_cast<int>(mesh.edges_with_tag(3).size());
  if (static_cast<int>(coeffs.a.size()) != t || coeffs.rho.size() != t)
    throw FemError("coefficient sizes do not match triangle count");
  if (coeffs.alpha.size() != n3)
    throw FemError("Robin coefficient size does not match tag-3 edge count");
  for (int c = 0; c < t; ++c) {
    const Mat2& m = coeffs.a[c];
    if (!(m(0, 0) > 0.0) || !(m.determinant() > 0.0))
      throw FemError("diffusion matrix on cell " + std::to_string(c) + " is not SPD");
    if (coeffs.rho[c] < 0.0)
      throw FemError("negative reaction coefficient on cell " + std::to_string(c));
  }
  for (int e = 0; e < n3; ++e)
    if (coeffs.alpha[e] < 0.0)
      throw FemError("negative Robin coefficient on tag-3 edge " + std::to_string(e));
}

} // namespace

Vec2 ScalarField::gradient(int t) const
{
  const auto& tri = mesh->triangles()[t];
  Vec2 g = Vec2::Zero();
  for (int k = 0; k < 3; ++k) g += values[tri[k]] * mesh->basis_gradient(t, k);
  return g;
}

bool ScalarField::in_v0() const
{
  for (int i : mesh->dirichlet_nodes())
    if (values[i] != 0.0) return false;
  return true;
}

VecX flux_divergence(const FluxField& y)
{
  const Mesh& mesh = *y.mesh;
  VecX div(mesh.triangle_count());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    double d = 0.0;
    for (int k = 0; k < 3; ++k) d += mesh.basis_gradient(t, k).dot(y.at(tri[k]));
    div[t] = d;
  }
  return div;
}

NodalVectors normal_trace(const FluxField& y, int tag)
{
  if (tag != 2 && tag != 3) throw FemError("normal trace is defined on tags 2 and 3");
  const Mesh& mesh = *y.mesh;
  const auto& edges = mesh.edges_with_tag(tag);
  NodalVectors out(static_cast<int>(edges.size()), 2);
  for (size_t k = 0; k < edges.size(); ++k) {
    const auto& e = mesh.boundary_edges()[edges[k]];
    const Vec2& nu = mesh.edge_normal(edges[k]);
    out(static_cast<int>(k), 0) = nu.dot(y.at(e.a));
    out(static_cast<int>(k), 1) = nu.dot(y.at(e.b));
  }
  return out;
}

FluxField interpolate_cell_vectors(MeshPtr mesh, const std::vector<Vec2>& cell_values)
{
  const Mesh& m = *mesh;
  if (static_cast<int>(cell_values.size()) != m.triangle_count())
    throw FemError("cell vector field size does not match triangle count");
  NodalVectors acc = NodalVectors::Zero(m.node_count(), 2);
  VecX weight = VecX::Zero(m.node_count());
  for (int t = 0; t < m.triangle_count(); ++t) {
    for (int k = 0; k < 3; ++k) {
      const int i = m.triangles()[t][k];
      acc.row(i) += m.area(t) * cell_values[t].transpose();
      weight[i] += m.area(t);
    }
  }
  for (int i = 0; i < m.node_count(); ++i) acc.row(i) /= weight[i];
  return FluxField(std::move(mesh), std::move(acc));
}

LinearSystem assemble(const Scenario& s, const Coefficients& coeffs)
{
  const Mesh& mesh = *s.mesh;
  check_coefficients(mesh, coeffs);
  const int n = mesh.node_count();

  std::vector<uint8_t> constrained(n, 0);
  for (int i : mesh.dirichlet_nodes()) constrained[i] = 1;

  std::vector<Triplet> triplets;
  triplets.reserve(9 * mesh.triangle_count() + 4 * mesh.boundary_edge_count() + n);
  VecX rhs = VecX::Zero(n);

  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const double area = mesh.area(t);
    const Mat2& a = coeffs.a[t];
    const double rho = coeffs.rho[t];
    for (int i = 0; i < 3; ++i) {
      if (!constrained[tri[i]]) rhs[tri[i]] += s.f[t] * area / 3.0;
      for (int j = 0; j < 3; ++j) {
        if (constrained[tri[i]] || constrained[tri[j]]) continue;
        const double k = area * mesh.basis_gradient(t, i).dot(a * mesh.basis_gradient(t, j)) +
                         rho * area / 12.0 * (i == j ? 2.0 : 1.0);
        triplets.emplace_back(tri[i], tri[j], k);
      }
    }
  }

  const auto& robin_edges = mesh.edges_with_tag(3);
  for (size_t k = 0; k < robin_edges.size(); ++k) {
    const auto& e = mesh.boundary_edges()[robin_edges[k]];
    const double len = mesh.edge_length(robin_edges[k]);
    const double alpha = coeffs.alpha[static_cast<int>(k)];
    const int nodes[2] = {e.a, e.b};
    for (int i = 0; i < 2; ++i) {
      if (!constrained[nodes[i]]) rhs[nodes[i]] += s.robin[static_cast<int>(k)] * len / 2.0;
      for (int j = 0; j < 2; ++j) {
        if (constrained[nodes[i]] || constrained[nodes[j]]) continue;
        triplets.emplace_back(nodes[i], nodes[j], alpha * len / 6.0 * (i == j ? 2.0 : 1.0));
      }
    }
  }

  const auto& neumann_edges = mesh.edges_with_tag(2);
  for (size_t k = 0; k < neumann_edges.size(); ++k) {
    const auto& e = mesh.boundary_edges()[neumann_edges[k]];
    const double len = mesh.edge_length(neumann_edges[k]);
    if (!constrained[e.a]) rhs[e.a] += s.neumann[static_cast<int>(k)] * len / 2.0;
    if (!constrained[e.b]) rhs[e.b] += s.neumann[static_cast<int>(k)] * len / 2.0;
  }

  for (int i = 0; i < n; ++i)
    if (constrained[i]) triplets.emplace_back(i, i, 1.0);

  LinearSystem sys;
  sys.mesh = s.mesh;
  sys.matrix.resize(n, n);
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  sys.rhs = std::move(rhs);
  sys.constrained = std::move(constrained);
  return sys;
}

ScalarField solve(const LinearSystem& system, const SolveOptions& opts)
{
  const int n = static_cast<int>(system.rhs.size());
  if (system.rhs.norm() == 0.0) return ScalarField(system.mesh, VecX::Zero(n));

  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(opts.rtol);
  cg.setMaxIterations(static_cast<Eigen::Index>(opts.max_iterations_per_node) * n);
  cg.compute(system.matrix);
  VecX x = cg.solve(system.rhs);
  if (cg.info() != Eigen::Success)
    throw FemError("conjugate gradients did not converge, residual " + std::to_string(cg.error()));
  for (int i = 0; i < n; ++i)
    if (system.constrained[i]) x[i] = 0.0;
  return ScalarField(system.mesh, std::move(x));
}

double residual_inf(const LinearSystem& system, const ScalarField& u)
{
  return (system.matrix * u.values - system.rhs).lpNorm<Eigen::Infinity>();
}

double bilinear(const Coefficients& coeffs, const ScalarField& u, const ScalarField& w)
{
  require_same_mesh(u.mesh, w.mesh);
  const Mesh& mesh = *u.mesh;
  check_coefficients(mesh, coeffs);

  double total = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const double area = mesh.area(t);
    total += area * u.gradient(t).dot(coeffs.a[t] * w.gradient(t));
    // exact P1 mass: area/12 (2 on the diagonal, 1 off)
    double mass = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        mass += (i == j ? 2.0 : 1.0) * u.values[tri[i]] * w.values[tri[j]];
    total += coeffs.rho[t] * area / 12.0 * mass;
  }
  const auto& robin_edges = mesh.edges_with_tag(3);
  for (size_t k = 0; k < robin_edges.size(); ++k) {
    const auto& e = mesh.boundary_edges()[robin_edges[k]];
    const double len = mesh.edge_length(robin_edges[k]);
    const double ua = u.values[e.a], ub = u.values[e.b];
    const double wa = w.values[e.a], wb = w.values[e.b];
    total += coeffs.alpha[static_cast<int>(k)] * len / 6.0 *
             (2.0 * ua * wa + ua * wb + ub * wa + 2.0 * ub * wb);
  }
  return total;
}

double load(const Scenario& s, const ScalarField& w)
{
  require_same_mesh(s.mesh, w.mesh);
  const Mesh& mesh = *s.mesh;
  double total = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    total += s.f[t] * mesh.area(t) / 3.0 *
             (w.values[tri[0]] + w.values[tri[1]] + w.values[tri[2]]);
  }
  const auto& neumann_edges = mesh.edges_with_tag(2);
  for (size_t k = 0; k < neumann_edges.size(); ++k) {
    const auto& e = mesh.boundary_edges()[neumann_edges[k]];
    total += s.neumann[static_cast<int>(k)] * mesh.edge_length(neumann_edges[k]) / 2.0 *
             (w.values[e.a] + w.values[e.b]);
  }
  const auto& robin_edges = mesh.edges_with_tag(3);
  for (size_t k = 0; k < robin_edges.size(); ++k) {
    const auto& e = mesh.boundary_edges()[robin_edges[k]];
    total += s.robin[static_cast<int>(k)] * mesh.edge_length(robin_edges[k]) / 2.0 *
             (w.values[e.a] + w.values[e.b]);
  }
  return total;
}

double energy_norm(const Coefficients& coeffs, const ScalarField& v)
{
  return std::sqrt(std::max(0.0, bilinear(coeffs, v, v)));
}

double grad_norm_squared(const ScalarField& v)
{
  const Mesh& mesh = *v.mesh;
  double total = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t) total += mesh.area(t) * v.gradient(t).squaredNorm();
  return total;
}

double l2_norm_squared(const ScalarField& v)
{
  const Mesh& mesh = *v.mesh;
  double total = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const double v0 = v.values[tri[0]], v1 = v.values[tri[1]], v2 = v.values[tri[2]];
    total += mesh.area(t) / 6.0 * (v0 * v0 + v1 * v1 + v2 * v2 + v0 * v1 + v0 * v2 + v1 * v2);
  }
  return total;
}

double boundary_norm_squared(const ScalarField& v, int tag)
{
  const Mesh& mesh = *v.mesh;
  double total = 0.0;
  for (int e : mesh.edges_with_tag(tag)) {
    const auto& be = mesh.boundary_edges()[e];
    const double va = v.values[be.a], vb = v.values[be.b];
    total += mesh.edge_length(e) / 3.0 * (va * va + va * vb + vb * vb);
  }
  return total;
}

double delta_norm_squared(const Scenario& s, const ScalarField& v)
{
  require_same_mesh(s.mesh, v.mesh);
  const auto& d = s.budget.delta;
  return d[0] * grad_norm_squared(v) + d[1] * l2_norm_squared(v) +
         d[2] * boundary_norm_squared(v, 3);
}

VecX prolong(const RefinedMesh& refined, const VecX& coarse_values)
{
  const int n = refined.mesh->node_count();
  VecX fine(n);
  for (int i = 0; i < n; ++i) {
    const auto& [p, q] = refined.parent_nodes[i];
    fine[i] = 0.5 * (coarse_values[p] + coarse_values[q]);
  }
  return fine;
}

// --- file formats ----------------------------------------------------------

std::string field_to_text(const ScalarField& f)
{
  std::ostringstream out;
  out.precision(17);
  out << "field " << f.values.size() << "\n";
  for (Eigen::Index i = 0; i < f.values.size(); ++i) out << f.values[i] << "\n";
  return out.str();
}

VecX field_from_text(const std::string& text)
{
  std::istringstream in(text);
  std::string word;
  Eigen::Index n = -1;
  if (!(in >> word >> n) || word != "field" || n < 0)
    throw FemError("expected 'field <count>' header");
  VecX values(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(in >> values[i])) throw FemError("field file truncated at value " + std::to_string(i));
  return values;
}

std::string flux_to_text(const FluxField& y)
{
  std::ostringstream out;
  out.precision(17);
  out << "flux " << y.values.rows() << "\n";
  for (Eigen::Index i = 0; i < y.values.rows(); ++i)
    out << y.values(i, 0) << " " << y.values(i, 1) << "\n";
  return out.str();
}

NodalVectors flux_from_text(const std::string& text)
{
  std::istringstream in(text);
  std::string word;
  Eigen::Index n = -1;
  if (!(in >> word >> n) || word != "flux" || n < 0)
    throw FemError("expected 'flux <count>' header");
  NodalVectors values(n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(in >> values(i, 0) >> values(i, 1)))
      throw FemError("flux file truncated at row " + std::to_string(i));
  return values;
}

} // namespace rdb
