#include "rdbounds/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rdb {

namespace {

constexpr double kRangeTol = 1e-12;

void check_budget(const Scenario& s)
{
  for (int i = 0; i < 3; ++i) {
    const double d = s.budget.delta[i];
    if (!(d >= 0.0))
      throw ScenarioError("delta" + std::to_string(i + 1) + " must be >= 0");
    if (!(d < s.beta_lower[i]))
      throw ScenarioError("delta" + std::to_string(i + 1) +
                          " must be strictly below beta_lower" + std::to_string(i + 1) +
                          " to keep the perturbed problem elliptic");
  }
}

} // namespace

void Scenario::validate() const
{
  if (!mesh) throw ScenarioError("scenario has no mesh");
  const int t = mesh->triangle_count();
  const int n2 = static_cast<int>(mesh->edges_with_tag(2).size());
  const int n3 = static_cast<int>(mesh->edges_with_tag(3).size());
  if (static_cast<int>(mean.a.size()) != t || mean.rho.size() != t || f.size() != t)
    throw ScenarioError("per-cell data size does not match triangle count");
  if (mean.alpha.size() != n3 || robin.size() != n3)
    throw ScenarioError("per-edge Robin data size does not match tag-3 edge count");
  if (neumann.size() != n2)
    throw ScenarioError("per-edge Neumann data size does not match tag-2 edge count");

  for (int i = 0; i < 3; ++i) {
    if (!(beta_lower[i] > 0.0))
      throw ScenarioError("beta_lower" + std::to_string(i + 1) + " must be positive");
    if (beta_upper[i] < beta_lower[i])
      throw ScenarioError("beta_upper" + std::to_string(i + 1) + " below beta_lower");
  }
  check_budget(*this);

  for (int c = 0; c < t; ++c) {
    const Mat2& m = mean.a[c];
    if (std::abs(m(0, 1) - m(1, 0)) > kRangeTol * (1.0 + spectral_norm_sym(m)))
      throw ScenarioError("a0 on cell " + std::to_string(c) + " is not symmetric");
    const auto [lo, hi] = eig_range_sym(m);
    if (lo < beta_lower[0] - kRangeTol || hi > beta_upper[0] + kRangeTol)
      throw ScenarioError("a0 eigenvalues on cell " + std::to_string(c) +
                          " outside [beta_lower1, beta_upper1]");
    if (mean.rho[c] < beta_lower[1] - kRangeTol || mean.rho[c] > beta_upper[1] + kRangeTol)
      throw ScenarioError("rho0 on cell " + std::to_string(c) + " outside bounds");
  }
  for (int e = 0; e < n3; ++e)
    if (mean.alpha[e] < beta_lower[2] - kRangeTol || mean.alpha[e] > beta_upper[2] + kRangeTol)
      throw ScenarioError("alpha0 on tag-3 edge " + std::to_string(e) + " outside bounds");

  if (f.lpNorm<Eigen::Infinity>() == 0.0)
    throw ScenarioError("f is identically zero");
  if (!(embedding.c1 > 0.0) || !(embedding.c2 > 0.0) || !(embedding.c3 > 0.0))
    throw ScenarioError("embedding constants must be positive");
}

Scenario make_uniform_scenario(MeshPtr mesh, const Mat2& a0, double rho0, double alpha0,
                               double f, double F, double G,
                               const std::array<double, 3>& delta,
                               const std::array<double, 3>& beta_lower,
                               const std::array<double, 3>& beta_upper,
                               const Embedding& embedding)
{
  Scenario s;
  s.mesh = std::move(mesh);
  const int t = s.mesh->triangle_count();
  const int n2 = static_cast<int>(s.mesh->edges_with_tag(2).size());
  const int n3 = static_cast<int>(s.mesh->edges_with_tag(3).size());
  s.mean.a.assign(t, a0);
  s.mean.rho = VecX::Constant(t, rho0);
  s.mean.alpha = VecX::Constant(n3, alpha0);
  s.f = VecX::Constant(t, f);
  s.neumann = VecX::Constant(n2, F);
  s.robin = VecX::Constant(n3, G);
  s.budget.delta = delta;
  s.beta_lower = beta_lower;
  s.beta_upper = beta_upper;
  s.embedding = embedding;
  return s;
}

double c_upper(const Scenario& s)
{
  check_budget(s);
  double worst = 0.0;
  for (int i = 0; i < 3; ++i)
    worst = std::max(worst, s.beta_upper[i] / (s.beta_lower[i] - s.budget.delta[i]));
  return worst;
}

double c_lower(const Scenario& s)
{
  check_budget(s);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i)
    best = std::min(best, s.beta_lower[i] / (s.beta_upper[i] + s.budget.delta[i]));
  return best;
}

double theta(const Scenario& s)
{
  check_budget(s);
  double t = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) t = std::min(t, s.budget.delta[i] / s.beta_upper[i]);
  return t;
}

std::array<double, 3> sigma_constants(const Scenario& s, SigmaConvention convention)
{
  const double b1 = s.beta_lower[0];
  if (!(b1 > 0.0)) throw ScenarioError("beta_lower1 must be positive");
  const Embedding& e = s.embedding;
  if (convention == SigmaConvention::derived)
    return {std::sqrt(e.c1 / b1), std::sqrt(e.c2 / b1), std::sqrt(e.c3 / b1)};
  return {std::sqrt(e.c1 / b1), std::sqrt(e.c1 * e.c2 / b1), std::sqrt(e.c1 * e.c3 / b1)};
}

std::array<double, 3> sigma_constants(const Scenario& s)
{
  return sigma_constants(s, s.embedding.convention);
}

void validate_perturbation(const Scenario& s, const Perturbation& p)
{
  constexpr double tol = 1.0 + 1e-12;
  const int t = s.mesh->triangle_count();
  const int n3 = static_cast<int>(s.mesh->edges_with_tag(3).size());
  if (static_cast<int>(p.psi_a.size()) != t || p.psi_rho.size() != t || p.psi_alpha.size() != n3)
    throw ScenarioError("perturbation sizes do not match the mesh");
  for (int c = 0; c < t; ++c) {
    if (std::abs(p.psi_a[c](0, 1) - p.psi_a[c](1, 0)) > 1e-12)
      throw ScenarioError("Psi on cell " + std::to_string(c) + " is not symmetric");
    if (spectral_norm_sym(p.psi_a[c]) > tol)
      throw ScenarioError("Psi on cell " + std::to_string(c) + " exceeds unit spectral norm");
    if (std::abs(p.psi_rho[c]) > tol)
      throw ScenarioError("psi_rho on cell " + std::to_string(c) + " exceeds 1");
  }
  for (int e = 0; e < n3; ++e)
    if (std::abs(p.psi_alpha[e]) > tol)
      throw ScenarioError("psi_alpha on edge " + std::to_string(e) + " exceeds 1");
}

Coefficients perturb(const Scenario& s, const Perturbation& p)
{
  validate_perturbation(s, p);
  const auto& d = s.budget.delta;
  Coefficients out;
  out.a.resize(s.mean.a.size());
  for (size_t c = 0; c < s.mean.a.size(); ++c) out.a[c] = s.mean.a[c] + d[0] * p.psi_a[c];
  out.rho = s.mean.rho + d[1] * p.psi_rho;
  out.alpha = s.mean.alpha + d[2] * p.psi_alpha;
  return out;
}

std::vector<Perturbation> extreme_perturbations(const Scenario& s)
{
  const int t = s.mesh->triangle_count();
  const int n3 = static_cast<int>(s.mesh->edges_with_tag(3).size());
  std::vector<Perturbation> out;
  out.reserve(8);
  for (int bits = 0; bits < 8; ++bits) {
    const double sa = (bits & 4) ? 1.0 : -1.0;
    const double sr = (bits & 2) ? 1.0 : -1.0;
    const double sl = (bits & 1) ? 1.0 : -1.0;
    Perturbation p;
    p.psi_a.assign(t, sa * Mat2::Identity());
    p.psi_rho = VecX::Constant(t, sr);
    p.psi_alpha = VecX::Constant(n3, sl);
    p.id = std::string("extreme_") + (sa > 0 ? '+' : '-') + (sr > 0 ? '+' : '-') +
           (sl > 0 ? '+' : '-');
    out.push_back(std::move(p));
  }
  return out;
}

Perturbation flux_aligned_perturbation(const Scenario& s, const std::vector<Vec2>& cell_gradients)
{
  const int t = s.mesh->triangle_count();
  if (static_cast<int>(cell_gradients.size()) != t)
    throw ScenarioError("gradient field size does not match triangle count");
  Perturbation p;
  p.psi_a.resize(t);
  for (int c = 0; c < t; ++c) {
    const double g2 = cell_gradients[c].squaredNorm();
    if (g2 > 0.0)
      p.psi_a[c] = -(cell_gradients[c] * cell_gradients[c].transpose()) / g2;
    else
      p.psi_a[c] = -Mat2::Identity();
  }
  p.psi_rho = VecX::Constant(t, -1.0);
  p.psi_alpha = VecX::Constant(static_cast<int>(s.mesh->edges_with_tag(3).size()), -1.0);
  p.id = "flux_aligned";
  return p;
}

Perturbation random_perturbation(const Scenario& s, std::mt19937_64& rng)
{
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  std::uniform_real_distribution<double> mag(0.0, 1.0);
  const int t = s.mesh->triangle_count();
  const int n3 = static_cast<int>(s.mesh->edges_with_tag(3).size());
  Perturbation p;
  p.psi_a.resize(t);
  p.psi_rho.resize(t);
  for (int c = 0; c < t; ++c) {
    Mat2 m;
    const double a = sym(rng), b = sym(rng), d = sym(rng);
    m << a, b, b, d;
    const double norm = spectral_norm_sym(m);
    p.psi_a[c] = norm > 0.0 ? Mat2((mag(rng) / norm) * m) : Mat2::Zero();
    p.psi_rho[c] = sym(rng);
  }
  p.psi_alpha.resize(n3);
  for (int e = 0; e < n3; ++e) p.psi_alpha[e] = sym(rng);
  return p;
}

Scenario refine(const Scenario& s, const RefinedMesh& refined)
{
  Scenario out;
  out.mesh = refined.mesh;
  const Mesh& fine = *refined.mesh;
  const int t = fine.triangle_count();
  out.mean.a.resize(t);
  out.mean.rho.resize(t);
  out.f.resize(t);
  for (int c = 0; c < t; ++c) {
    const int parent = refined.parent_triangle[c];
    out.mean.a[c] = s.mean.a[parent];
    out.mean.rho[c] = s.mean.rho[parent];
    out.f[c] = s.f[parent];
  }

  const auto inherit_edges = [&](int tag, const VecX& coarse) {
    const auto& fine_edges = fine.edges_with_tag(tag);
    VecX values(static_cast<int>(fine_edges.size()));
    for (size_t k = 0; k < fine_edges.size(); ++k) {
      const int parent = refined.parent_edge[fine_edges[k]];
      values[static_cast<int>(k)] = coarse[s.mesh->tag_position(parent)];
    }
    return values;
  };
  out.mean.alpha = inherit_edges(3, s.mean.alpha);
  out.robin = inherit_edges(3, s.robin);
  out.neumann = inherit_edges(2, s.neumann);

  out.budget = s.budget;
  out.beta_lower = s.beta_lower;
  out.beta_upper = s.beta_upper;
  out.embedding = s.embedding;
  out.spec_echo = s.spec_echo;
  return out;
}

} // namespace rdb
