#include "rdbounds/majorant.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <limits>

namespace rdb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_mu(const Scenario& s, const Coefficients& coeffs, const VecX& mu1, const VecX& mu2)
{
  const int t = s.mesh->triangle_count();
  const int n3 = static_cast<int>(s.mesh->edges_with_tag(3).size());
  if (mu1.size() != t || mu2.size() != n3)
    throw FemError("mu fields do not match the mesh");
  for (int c = 0; c < t; ++c) {
    if (mu1[c] < 0.0 || mu1[c] > 1.0) throw FemError("mu1 outside [0,1]");
    if (mu1[c] > 0.0 && coeffs.rho[c] <= 0.0)
      throw FemError("mu1 > 0 requires a positive reaction coefficient on cell " +
                     std::to_string(c));
  }
  for (int e = 0; e < n3; ++e) {
    if (mu2[e] < 0.0 || mu2[e] > 1.0) throw FemError("mu2 outside [0,1]");
    if (mu2[e] > 0.0 && coeffs.alpha[e] <= 0.0)
      throw FemError("mu2 > 0 requires a positive Robin coefficient on edge " + std::to_string(e));
  }
}

// int over cell of the square of an affine function given by vertex values,
// via the (exact) edge-midpoint rule.
double cell_sq_integral(double area, double v0, double v1, double v2)
{
  const double m0 = 0.5 * (v0 + v1), m1 = 0.5 * (v1 + v2), m2 = 0.5 * (v2 + v0);
  return area / 3.0 * (m0 * m0 + m1 * m1 + m2 * m2);
}

// int over edge of the square of a linear function (Simpson, exact).
double edge_sq_integral(double len, double va, double vb)
{
  const double vm = 0.5 * (va + vb);
  return len / 6.0 * (va * va + 4.0 * vm * vm + vb * vb);
}

struct Parts {
  double d = 0.0;
  double n1_sq = 0.0; // ||(1-mu1) r1||^2
  double n2_sq = 0.0;
  double nN_sq = 0.0;
  double mu1_sq = 0.0; // ||mu1 r1 / sqrt(rho)||^2
  double mu2_sq = 0.0;
};

Parts compute_parts(const Scenario& s, const Coefficients& coeffs, const ScalarField& v,
                    const FluxField& y, const VecX& mu1, const VecX& mu2)
{
  const Mesh& mesh = *s.mesh;
  const Residuals r = residuals(s, coeffs, v, y);
  Parts p;
  p.d = d_term(coeffs, v, y);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const double sq = cell_sq_integral(mesh.area(t), r.r1(t, 0), r.r1(t, 1), r.r1(t, 2));
    const double w = 1.0 - mu1[t];
    p.n1_sq += w * w * sq;
    if (mu1[t] > 0.0) p.mu1_sq += mu1[t] * mu1[t] / coeffs.rho[t] * sq;
  }
  const auto& robin = mesh.edges_with_tag(3);
  for (size_t k = 0; k < robin.size(); ++k) {
    const int i = static_cast<int>(k);
    const double sq = edge_sq_integral(mesh.edge_length(robin[k]), r.r2(i, 0), r.r2(i, 1));
    const double w = 1.0 - mu2[i];
    p.n2_sq += w * w * sq;
    if (mu2[i] > 0.0) p.mu2_sq += mu2[i] * mu2[i] / coeffs.alpha[i] * sq;
  }
  const auto& neumann = mesh.edges_with_tag(2);
  for (size_t k = 0; k < neumann.size(); ++k) {
    const int i = static_cast<int>(k);
    p.nN_sq += edge_sq_integral(mesh.edge_length(neumann[k]), r.rN(i, 0), r.rN(i, 1));
  }
  return p;
}

double sum_form_of(const Parts& p, const std::array<double, 3>& sigma)
{
  const double bracket = std::sqrt(std::max(0.0, p.d)) + sigma[0] * std::sqrt(p.n1_sq) +
                         sigma[2] * std::sqrt(p.n2_sq) + sigma[1] * std::sqrt(p.nN_sq);
  return bracket * bracket + p.mu1_sq + p.mu2_sq;
}

} // namespace

Residuals residuals(const Scenario& s, const Coefficients& coeffs, const ScalarField& v,
                    const FluxField& y)
{
  if (s.mesh.get() != v.mesh.get() || s.mesh.get() != y.mesh.get())
    throw FemError("fields live on different meshes");
  const Mesh& mesh = *s.mesh;
  const VecX div = flux_divergence(y);

  Residuals out;
  out.r1.resize(mesh.triangle_count(), 3);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    for (int k = 0; k < 3; ++k)
      out.r1(t, k) = s.f[t] - coeffs.rho[t] * v.values[tri[k]] + div[t];
  }

  const NodalVectors trace3 = normal_trace(y, 3);
  const auto& robin = mesh.edges_with_tag(3);
  out.r2.resize(static_cast<int>(robin.size()), 2);
  for (size_t k = 0; k < robin.size(); ++k) {
    const int i = static_cast<int>(k);
    const auto& be = mesh.boundary_edges()[robin[k]];
    out.r2(i, 0) = s.robin[i] - coeffs.alpha[i] * v.values[be.a] - trace3(i, 0);
    out.r2(i, 1) = s.robin[i] - coeffs.alpha[i] * v.values[be.b] - trace3(i, 1);
  }

  const NodalVectors trace2 = normal_trace(y, 2);
  const auto& neumann = mesh.edges_with_tag(2);
  out.rN.resize(static_cast<int>(neumann.size()), 2);
  for (size_t k = 0; k < neumann.size(); ++k) {
    const int i = static_cast<int>(k);
    out.rN(i, 0) = s.neumann[i] - trace2(i, 0);
    out.rN(i, 1) = s.neumann[i] - trace2(i, 1);
  }
  return out;
}

double r1_norm_sq(const Mesh& mesh, const Residuals& r)
{
  double total = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t)
    total += cell_sq_integral(mesh.area(t), r.r1(t, 0), r.r1(t, 1), r.r1(t, 2));
  return total;
}

double r2_norm_sq(const Mesh& mesh, const Residuals& r)
{
  double total = 0.0;
  const auto& robin = mesh.edges_with_tag(3);
  for (size_t k = 0; k < robin.size(); ++k)
    total += edge_sq_integral(mesh.edge_length(robin[k]), r.r2(static_cast<int>(k), 0),
                              r.r2(static_cast<int>(k), 1));
  return total;
}

double rN_norm_sq(const Mesh& mesh, const Residuals& r)
{
  double total = 0.0;
  const auto& neumann = mesh.edges_with_tag(2);
  for (size_t k = 0; k < neumann.size(); ++k)
    total += edge_sq_integral(mesh.edge_length(neumann[k]), r.rN(static_cast<int>(k), 0),
                              r.rN(static_cast<int>(k), 1));
  return total;
}

double d_term(const Coefficients& coeffs, const ScalarField& v, const FluxField& y)
{
  if (v.mesh.get() != y.mesh.get()) throw FemError("fields live on different meshes");
  const Mesh& mesh = *v.mesh;
  double total = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const Mat2 inv = coeffs.a[t].inverse();
    const Vec2 g = coeffs.a[t] * v.gradient(t);
    double acc = 0.0;
    for (int k = 0; k < 3; ++k) {
      const Vec2 ym = 0.5 * (y.at(tri[k]) + y.at(tri[(k + 1) % 3]));
      const Vec2 diff = g - ym;
      acc += diff.dot(inv * diff);
    }
    total += mesh.area(t) / 3.0 * acc;
  }
  return total;
}

double kappa_of(const MajorantGamma& gamma, const std::array<double, 3>& sigma)
{
  double kappa = 0.0;
  if (std::isfinite(gamma.g1)) kappa += 1.0 / gamma.g1;
  if (std::isfinite(gamma.g2)) kappa += sigma[0] * sigma[0] / gamma.g2;
  if (std::isfinite(gamma.g3)) kappa += sigma[2] * sigma[2] / gamma.g3;
  if (std::isfinite(gamma.g4)) kappa += sigma[1] * sigma[1] / gamma.g4;
  return kappa;
}

double majorant_sum_form(const Scenario& s, const Coefficients& coeffs, const ScalarField& v,
                         const FluxField& y, const VecX& mu1, const VecX& mu2)
{
  check_mu(s, coeffs, mu1, mu2);
  return sum_form_of(compute_parts(s, coeffs, v, y, mu1, mu2), sigma_constants(s));
}

MajorantValue majorant_gamma_form(const Scenario& s, const Coefficients& coeffs,
                                  const ScalarField& v, const FluxField& y,
                                  const MajorantGamma& gamma, const VecX& mu1, const VecX& mu2)
{
  check_mu(s, coeffs, mu1, mu2);
  const auto sigma = sigma_constants(s);
  const Parts p = compute_parts(s, coeffs, v, y, mu1, mu2);

  const auto contribution = [](double g, double part_sq, const char* name) {
    if (!(g > 0.0)) throw FemError(std::string("non-positive gamma multiplier: ") + name);
    if (!std::isfinite(g)) {
      if (part_sq != 0.0)
        throw FemError(std::string("infinite gamma with nonzero residual: ") + name);
      return 0.0;
    }
    return g * part_sq;
  };

  MajorantValue out;
  out.d_part = p.d;
  out.r1_part = p.n1_sq;
  out.r2_part = p.n2_sq;
  out.neumann_part = p.nN_sq;
  out.mu1_part = p.mu1_sq;
  out.mu2_part = p.mu2_sq;
  out.gamma = gamma;
  out.kappa = kappa_of(gamma, sigma);
  out.mu1 = mu1;
  out.mu2 = mu2;
  out.flux = y;

  double weighted = contribution(gamma.g1, p.d, "gamma1");
  weighted += contribution(gamma.g2, p.n1_sq, "gamma2");
  weighted += contribution(gamma.g3, p.n2_sq, "gamma3");
  weighted += contribution(gamma.g4, p.nN_sq, "gamma4");
  out.total = out.kappa * weighted + p.mu1_sq + p.mu2_sq;
  return out;
}

MajorantGamma optimal_gamma(double d, double n1, double n2, double nN,
                            const std::array<double, 3>& sigma)
{
  MajorantGamma g;
  g.g1 = d > 0.0 ? 1.0 / std::sqrt(d) : kInf;
  g.g2 = n1 > 0.0 ? sigma[0] / n1 : kInf;
  g.g3 = n2 > 0.0 ? sigma[2] / n2 : kInf;
  g.g4 = nN > 0.0 ? sigma[1] / nN : kInf;
  return g;
}

std::pair<VecX, VecX> optimal_mu(const Coefficients& coeffs, double kappa, double g2, double g3)
{
  if (!(kappa > 0.0) || !(g2 > 0.0) || !(g3 > 0.0))
    throw FemError("optimal_mu needs positive kappa and gamma");
  const auto pointwise = [&](double kg, double c) {
    if (c <= 0.0) return 0.0;
    if (!std::isfinite(kg)) return 1.0;
    return kg * c / (kg * c + 1.0);
  };
  VecX mu1(coeffs.rho.size());
  for (Eigen::Index i = 0; i < coeffs.rho.size(); ++i)
    mu1[i] = pointwise(kappa * g2, coeffs.rho[i]);
  VecX mu2(coeffs.alpha.size());
  for (Eigen::Index i = 0; i < coeffs.alpha.size(); ++i)
    mu2[i] = pointwise(kappa * g3, coeffs.alpha[i]);
  return {std::move(mu1), std::move(mu2)};
}

namespace {

// Minimize the gamma-form over the nodal flux values at fixed gamma and mu:
// assemble the 2N x 2N SPD system and run CG from the current flux.
FluxField minimize_flux(const Scenario& s, const Coefficients& coeffs, const ScalarField& v,
                        const FluxField& y0, double kg1, const VecX& cell_weight,
                        const VecX& edge_weight, double kg4, double cg_rtol)
{
  const Mesh& mesh = *s.mesh;
  const int n = mesh.node_count();
  std::vector<Triplet> triplets;
  triplets.reserve(36 * mesh.triangle_count() + 16 * mesh.boundary_edge_count());
  VecX rhs = VecX::Zero(2 * n);

  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const double area = mesh.area(t);
    const Mat2 inv = coeffs.a[t].inverse();
    const Vec2 grad_v = v.gradient(t);

    // D-term: kg1 * (y^T Ainv y - 2 grad(v) . y)
    for (int i = 0; i < 3; ++i) {
      for (int a = 0; a < 2; ++a)
        rhs[2 * tri[i] + a] += kg1 * area / 3.0 * grad_v[a];
      for (int j = 0; j < 3; ++j) {
        const double mass = area / 12.0 * (i == j ? 2.0 : 1.0);
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            triplets.emplace_back(2 * tri[i] + a, 2 * tri[j] + b, kg1 * mass * inv(a, b));
      }
    }

    // r1-term: c (area d^2 + 2 d int q), d = div y, q = f - rho v
    const double c = cell_weight[t];
    if (c > 0.0) {
      double q_mean = 0.0;
      for (int k = 0; k < 3; ++k) q_mean += s.f[t] - coeffs.rho[t] * v.values[tri[k]];
      const double q_int = area * q_mean / 3.0;
      for (int i = 0; i < 3; ++i) {
        const Vec2 gi = mesh.basis_gradient(t, i);
        for (int a = 0; a < 2; ++a) rhs[2 * tri[i] + a] -= c * q_int * gi[a];
        for (int j = 0; j < 3; ++j) {
          const Vec2 gj = mesh.basis_gradient(t, j);
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              triplets.emplace_back(2 * tri[i] + a, 2 * tri[j] + b, c * area * gi[a] * gj[b]);
        }
      }
    }
  }

  const auto add_edge_term = [&](int edge, double c, double pa, double pb) {
    if (c <= 0.0) return;
    const auto& be = mesh.boundary_edges()[edge];
    const double len = mesh.edge_length(edge);
    const Vec2& nu = mesh.edge_normal(edge);
    const int nodes[2] = {be.a, be.b};
    const double mass[2][2] = {{len / 3.0, len / 6.0}, {len / 6.0, len / 3.0}};
    const double lin[2] = {len / 6.0 * (2.0 * pa + pb), len / 6.0 * (pa + 2.0 * pb)};
    for (int i = 0; i < 2; ++i) {
      for (int a = 0; a < 2; ++a) rhs[2 * nodes[i] + a] += c * lin[i] * nu[a];
      for (int j = 0; j < 2; ++j)
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            triplets.emplace_back(2 * nodes[i] + a, 2 * nodes[j] + b,
                                  c * mass[i][j] * nu[a] * nu[b]);
    }
  };

  const auto& robin = mesh.edges_with_tag(3);
  for (size_t k = 0; k < robin.size(); ++k) {
    const int i = static_cast<int>(k);
    const auto& be = mesh.boundary_edges()[robin[k]];
    add_edge_term(robin[k], edge_weight[i], s.robin[i] - coeffs.alpha[i] * v.values[be.a],
                  s.robin[i] - coeffs.alpha[i] * v.values[be.b]);
  }
  const auto& neumann = mesh.edges_with_tag(2);
  for (size_t k = 0; k < neumann.size(); ++k)
    add_edge_term(neumann[k], kg4, s.neumann[static_cast<int>(k)],
                  s.neumann[static_cast<int>(k)]);

  SpMat m(2 * n, 2 * n);
  m.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(cg_rtol);
  cg.setMaxIterations(10l * 2 * n);
  cg.compute(m);
  VecX guess(2 * n);
  for (int i = 0; i < n; ++i) {
    guess[2 * i] = y0.values(i, 0);
    guess[2 * i + 1] = y0.values(i, 1);
  }
  VecX sol = cg.solveWithGuess(rhs, guess);
  if (cg.info() != Eigen::Success)
    throw FemError("flux minimization solve did not converge");

  NodalVectors out(n, 2);
  for (int i = 0; i < n; ++i) {
    out(i, 0) = sol[2 * i];
    out(i, 1) = sol[2 * i + 1];
  }
  return FluxField(s.mesh, std::move(out));
}

// gamma with vanishing norms floored so the flux solve sees finite weights
MajorantGamma capped_gamma(const Parts& p, const std::array<double, 3>& sigma)
{
  const double scale = std::sqrt(std::max(0.0, p.d)) + sigma[0] * std::sqrt(p.n1_sq) +
                       sigma[2] * std::sqrt(p.n2_sq) + sigma[1] * std::sqrt(p.nN_sq);
  const double floor = std::max(1e-12 * scale, 1e-300);
  MajorantGamma g;
  g.g1 = 1.0 / std::max(std::sqrt(std::max(0.0, p.d)), floor);
  g.g2 = sigma[0] / std::max(std::sqrt(p.n1_sq), floor);
  g.g3 = sigma[2] / std::max(std::sqrt(p.n2_sq), floor);
  g.g4 = sigma[1] / std::max(std::sqrt(p.nN_sq), floor);
  return g;
}

} // namespace

MajorantMinimizeResult minimize_majorant(const Scenario& s, const Coefficients& coeffs,
                                         const ScalarField& v, const MajorantMinimizeOptions& opts)
{
  const Mesh& mesh = *s.mesh;
  const auto sigma = sigma_constants(s);

  std::vector<Vec2> exact_flux(mesh.triangle_count());
  for (int t = 0; t < mesh.triangle_count(); ++t) exact_flux[t] = coeffs.a[t] * v.gradient(t);
  FluxField y = interpolate_cell_vectors(s.mesh, exact_flux);

  VecX mu1 = VecX::Zero(mesh.triangle_count());
  VecX mu2 = VecX::Zero(static_cast<int>(mesh.edges_with_tag(3).size()));

  MajorantMinimizeResult out;
  Parts p = compute_parts(s, coeffs, v, y, mu1, mu2);
  double best_total = sum_form_of(p, sigma);
  FluxField best_y = y;
  VecX best_mu1 = mu1, best_mu2 = mu2;
  Parts best_p = p;
  out.sweep_totals.push_back(best_total);

  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    const MajorantGamma g = capped_gamma(p, sigma);
    const double kappa = kappa_of(g, sigma);

    VecX cell_weight(mesh.triangle_count());
    for (int t = 0; t < mesh.triangle_count(); ++t) {
      const double one_minus = 1.0 - mu1[t];
      cell_weight[t] = kappa * g.g2 * one_minus * one_minus +
                       (mu1[t] > 0.0 ? mu1[t] * mu1[t] / coeffs.rho[t] : 0.0);
    }
    VecX edge_weight(mu2.size());
    for (Eigen::Index e = 0; e < mu2.size(); ++e) {
      const double one_minus = 1.0 - mu2[e];
      edge_weight[e] = kappa * g.g3 * one_minus * one_minus +
                       (mu2[e] > 0.0 ? mu2[e] * mu2[e] / coeffs.alpha[e] : 0.0);
    }

    try {
      y = minimize_flux(s, coeffs, v, y, kappa * g.g1, cell_weight, edge_weight, kappa * g.g4,
                        opts.cg_rtol);
    } catch (const FemError&) {
      out.solver_warning = true;
      break;
    }

    p = compute_parts(s, coeffs, v, y, mu1, mu2);
    const MajorantGamma g_next = capped_gamma(p, sigma);
    const double kappa_next = kappa_of(g_next, sigma);
    std::tie(mu1, mu2) = optimal_mu(coeffs, kappa_next, g_next.g2, g_next.g3);

    p = compute_parts(s, coeffs, v, y, mu1, mu2);
    const double total = sum_form_of(p, sigma);
    if (total <= best_total) {
      best_total = total;
      best_y = y;
      best_mu1 = mu1;
      best_mu2 = mu2;
      best_p = p;
    }
    const double prev = out.sweep_totals.back();
    out.sweep_totals.push_back(best_total);
    if (std::abs(prev - total) <= opts.stagnation_rtol * std::abs(total)) break;
  }

  const MajorantGamma gamma =
      optimal_gamma(std::max(0.0, best_p.d), std::sqrt(best_p.n1_sq), std::sqrt(best_p.n2_sq),
                    std::sqrt(best_p.nN_sq), sigma);
  out.value = majorant_gamma_form(s, coeffs, v, best_y, gamma, best_mu1, best_mu2);
  return out;
}

double radius_upper_sq(const Scenario& s, const ScalarField& u0)
{
  const auto& d = s.budget.delta;
  const auto& b = s.beta_lower;
  return d[0] * d[0] / (b[0] - d[0]) * grad_norm_squared(u0) +
         d[1] * d[1] / (b[1] - d[1]) * l2_norm_squared(u0) +
         d[2] * d[2] / (b[2] - d[2]) * boundary_norm_squared(u0, 3);
}

double normalized_radius_upper_sq(const Scenario& s)
{
  const auto& d = s.budget.delta;
  const auto& b = s.beta_lower;
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) worst = std::max(worst, d[i] * d[i] / (b[i] * (b[i] - d[i])));
  return worst;
}

ExtremalBounds extremal_residual_bounds(const Scenario& s, const ScalarField& u0,
                                        const FluxField& y)
{
  const Mesh& mesh = *s.mesh;
  const auto& d = s.budget.delta;
  const Residuals mean_res = residuals(s, s.mean, u0, y);

  ExtremalBounds out;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const Vec2 grad_u = u0.gradient(t);
    const Vec2 mean_flux = s.mean.a[t] * grad_u;
    double acc_d = 0.0, acc_r1 = 0.0;
    for (int k = 0; k < 3; ++k) {
      const int i = tri[k], j = tri[(k + 1) % 3];
      const Vec2 ym = 0.5 * (y.at(i) + y.at(j));
      const double gap = (mean_flux - ym).norm();
      acc_d += gap * gap + 2.0 * d[0] * grad_u.norm() * gap + d[0] * d[0] * grad_u.squaredNorm();
      const double r0 = 0.5 * (mean_res.r1(t, k) + mean_res.r1(t, (k + 1) % 3));
      const double um = 0.5 * (u0.values[i] + u0.values[j]);
      acc_r1 += r0 * r0 + 2.0 * d[1] * std::abs(r0) * std::abs(um) + d[1] * d[1] * um * um;
    }
    out.d_bound += mesh.area(t) / 3.0 * acc_d;
    out.r1_bound += mesh.area(t) / 3.0 * acc_r1;
  }
  out.d_bound /= (s.beta_lower[0] - d[0]);

  const auto& robin = mesh.edges_with_tag(3);
  for (size_t k = 0; k < robin.size(); ++k) {
    const int i = static_cast<int>(k);
    const auto& be = mesh.boundary_edges()[robin[k]];
    const double len = mesh.edge_length(robin[k]);
    const double ra = mean_res.r2(i, 0), rb = mean_res.r2(i, 1), rm = 0.5 * (ra + rb);
    const double ua = u0.values[be.a], ub = u0.values[be.b], um = 0.5 * (ua + ub);
    const auto point = [&](double r, double u) {
      return r * r + 2.0 * d[2] * std::abs(r) * std::abs(u) + d[2] * d[2] * u * u;
    };
    out.r2_bound += len / 6.0 * (point(ra, ua) + 4.0 * point(rm, um) + point(rb, ub));
  }
  return out;
}

} // namespace rdb
