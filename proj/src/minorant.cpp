#include "rdbounds/minorant.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <future>
#include <random>

namespace rdb {

namespace {

double sign_of(double x) { return x < 0.0 ? -1.0 : 1.0; }

// Extremal symmetric direction for the dyad b (x) a: the admissible matrix of
// unit spectral norm maximizing Psi : sym(b a^T), i.e. sign(lambda_k) q_k q_k^T.
Mat2 extremal_direction(const Vec2& a, const Vec2& b)
{
  Mat2 t = 0.5 * (b * a.transpose() + a * b.transpose());
  const double mean = 0.5 * (t(0, 0) + t(1, 1));
  const double half_diff = 0.5 * (t(0, 0) - t(1, 1));
  const double r = std::sqrt(half_diff * half_diff + t(0, 1) * t(0, 1));
  if (r == 0.0 && mean == 0.0) return Mat2::Zero();
  const double l1 = mean + r, l2 = mean - r;
  Vec2 q1;
  if (std::abs(half_diff + r) >= std::abs(t(0, 1)) && half_diff + r != 0.0)
    q1 = Vec2(half_diff + r, t(0, 1)).normalized();
  else if (t(0, 1) != 0.0)
    q1 = Vec2(t(0, 1), r - half_diff).normalized();
  else
    q1 = Vec2(0.0, 1.0); // diagonal with t00 <= t11: the large eigenvalue rides on e_y
  const Vec2 q2(-q1.y(), q1.x());
  return sign_of(l1) * q1 * q1.transpose() + sign_of(l2) * q2 * q2.transpose();
}

struct V0Check {
  static void require(const ScalarField& w)
  {
    if (!w.in_v0()) throw FemError("test function is not in V0 (nonzero on tag-1 nodes)");
  }
};

} // namespace

double minorant_fixed(const Scenario& s, const Coefficients& coeffs, const ScalarField& v,
                      const ScalarField& w)
{
  V0Check::require(w);
  return -(bilinear(coeffs, w, w) + 2.0 * bilinear(coeffs, v, w)) + 2.0 * load(s, w);
}

MinorantValue minorant_radius(const Scenario& s, const ScalarField& u0, const ScalarField& w)
{
  V0Check::require(w);
  if (u0.mesh.get() != w.mesh.get() || s.mesh.get() != w.mesh.get())
    throw FemError("fields live on different meshes");
  const Mesh& mesh = *s.mesh;
  const auto& d = s.budget.delta;

  MinorantValue out;
  out.norm0_part = -bilinear(s.mean, w, w);

  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const Vec2 gw = w.gradient(t);
    const Vec2 ga = gw + 2.0 * u0.gradient(t);
    out.delta1_part += d[0] * mesh.area(t) * ga.norm() * gw.norm();

    const auto& tri = mesh.triangles()[t];
    double acc = 0.0;
    for (int k = 0; k < 3; ++k) {
      const int i = tri[k], j = tri[(k + 1) % 3];
      const double wm = 0.5 * (w.values[i] + w.values[j]);
      const double um = 0.5 * (u0.values[i] + u0.values[j]);
      acc += std::abs((wm + 2.0 * um) * wm);
    }
    out.delta2_part += d[1] * mesh.area(t) / 3.0 * acc;
  }

  for (int e : mesh.edges_with_tag(3)) {
    const auto& be = mesh.boundary_edges()[e];
    const double len = mesh.edge_length(e);
    const double wa = w.values[be.a], wb = w.values[be.b];
    const double ua = u0.values[be.a], ub = u0.values[be.b];
    const double wm = 0.5 * (wa + wb), um = 0.5 * (ua + ub);
    const double qa = std::abs((wa + 2.0 * ua) * wa);
    const double qm = std::abs((wm + 2.0 * um) * wm);
    const double qb = std::abs((wb + 2.0 * ub) * wb);
    out.delta3_part += d[2] * len / 6.0 * (qa + 4.0 * qm + qb);
  }

  out.total = out.norm0_part + out.delta1_part + out.delta2_part + out.delta3_part;
  out.witness = w;
  return out;
}

LambdaBound lambda_bound(const Scenario& s, const ScalarField& u0)
{
  const double n0 = bilinear(s.mean, u0, u0);
  const double nd = delta_norm_squared(s, u0);
  LambdaBound out;
  if (n0 <= 0.0) {
    out.degenerate = true;
    return out;
  }
  if (nd <= 0.0) return out; // empty budget: bound and multiplier both zero
  const double gap = n0 - nd;
  if (gap <= 0.0)
    throw FemError("delta norm is not dominated by the mean energy norm; invalid budget");
  out.lambda = nd / gap;
  out.radius_sq = nd * nd / gap;
  return out;
}

double normalized_radius_lower_sq(const Scenario& s)
{
  const double t = theta(s);
  return t * t / (1.0 - t);
}

namespace {

struct FrozenSolve {
  // One sign-freeze step: maximize the frozen quadratic around the current w.
  static VecX step(const Scenario& s, const ScalarField& u0, const ScalarField& w, double cg_rtol)
  {
    const Mesh& mesh = *s.mesh;
    const int n = mesh.node_count();
    const auto& d = s.budget.delta;

    std::vector<Triplet> triplets;
    triplets.reserve(9 * mesh.triangle_count() + 4 * mesh.boundary_edge_count() + n);
    VecX rhs = VecX::Zero(n);

    auto add = [&](int i, int j, double h_val, double delta_val) {
      // H = K0 - (delta part); rhs accumulates (delta part) * u0
      if (!mesh.is_dirichlet(i)) {
        rhs[i] += delta_val * u0.values[j];
        if (!mesh.is_dirichlet(j)) triplets.emplace_back(i, j, h_val - delta_val);
      }
    };

    for (int t = 0; t < mesh.triangle_count(); ++t) {
      const auto& tri = mesh.triangles()[t];
      const double area = mesh.area(t);
      const Vec2 gw = w.gradient(t);
      const Vec2 ga = gw + 2.0 * u0.gradient(t);
      const Mat2 psi = extremal_direction(ga, gw);

      // midpoint signs of (w + 2 u0) w
      double sgn[3];
      double phi[3][3] = {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
      for (int k = 0; k < 3; ++k) {
        const int i = tri[k], j = tri[(k + 1) % 3];
        const double wm = 0.5 * (w.values[i] + w.values[j]);
        const double um = 0.5 * (u0.values[i] + u0.values[j]);
        sgn[k] = sign_of((wm + 2.0 * um) * wm);
      }

      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          const double k0 = area * mesh.basis_gradient(t, i).dot(s.mean.a[t] * mesh.basis_gradient(t, j)) +
                            s.mean.rho[t] * area / 12.0 * (i == j ? 2.0 : 1.0);
          double mass_s = 0.0;
          for (int m = 0; m < 3; ++m) mass_s += sgn[m] * phi[m][i] * phi[m][j];
          const double dv = d[0] * area * mesh.basis_gradient(t, i).dot(psi * mesh.basis_gradient(t, j)) +
                            d[1] * area / 3.0 * mass_s;
          add(tri[i], tri[j], k0, dv);
        }
      }
    }

    const auto& robin_edges = mesh.edges_with_tag(3);
    for (size_t k = 0; k < robin_edges.size(); ++k) {
      const auto& be = mesh.boundary_edges()[robin_edges[k]];
      const double len = mesh.edge_length(robin_edges[k]);
      const double alpha0 = s.mean.alpha[static_cast<int>(k)];
      const double wa = w.values[be.a], wb = w.values[be.b];
      const double ua = u0.values[be.a], ub = u0.values[be.b];
      const double sa = sign_of((wa + 2.0 * ua) * wa);
      const double sm = sign_of((0.5 * (wa + wb) + (ua + ub)) * 0.5 * (wa + wb));
      const double sb = sign_of((wb + 2.0 * ub) * wb);
      const int nodes[2] = {be.a, be.b};
      const double mass_s[2][2] = {{sa + sm, sm}, {sm, sb + sm}};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          add(nodes[i], nodes[j], alpha0 * len / 6.0 * (i == j ? 2.0 : 1.0),
              d[2] * len / 6.0 * mass_s[i][j]);
    }

    for (int i : mesh.dirichlet_nodes()) {
      triplets.emplace_back(i, i, 1.0);
      rhs[i] = 0.0;
    }

    SpMat h(n, n);
    h.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(cg_rtol);
    cg.setMaxIterations(10l * n);
    cg.compute(h);
    VecX next = cg.solve(rhs);
    if (cg.info() != Eigen::Success)
      throw FemError("sign-freeze subproblem solve did not converge");
    for (int i : mesh.dirichlet_nodes()) next[i] = 0.0;
    return next;
  }
};

struct StartResult {
  MinorantValue value;
  int iterations = 0;
};

StartResult run_start(const Scenario& s, const ScalarField& u0, ScalarField w,
                      const MinorantSearchOptions& opts)
{
  StartResult out;
  out.value = minorant_radius(s, u0, w);
  for (int it = 0; it < opts.max_outer; ++it) {
    ++out.iterations;
    ScalarField next(s.mesh, FrozenSolve::step(s, u0, w, opts.cg_rtol));
    const MinorantValue candidate = minorant_radius(s, u0, next);
    if (candidate.total <= out.value.total) break; // frozen model exhausted
    const double gain = candidate.total - out.value.total;
    out.value = candidate;
    w = std::move(next);
    if (gain <= opts.stagnation_rtol * std::abs(out.value.total)) break;
  }
  return out;
}

} // namespace

double minorant_frozen_model(const Scenario& s, const ScalarField& u0, const ScalarField& w_at,
                             const ScalarField& w_eval)
{
  const Mesh& mesh = *s.mesh;
  const auto& d = s.budget.delta;
  double total = -bilinear(s.mean, w_eval, w_eval);

  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const Vec2 gw_at = w_at.gradient(t);
    const Mat2 psi = extremal_direction(gw_at + 2.0 * u0.gradient(t), gw_at);
    const Vec2 gw = w_eval.gradient(t);
    total += d[0] * mesh.area(t) * (gw + 2.0 * u0.gradient(t)).dot(psi * gw);

    const auto& tri = mesh.triangles()[t];
    double acc = 0.0;
    for (int k = 0; k < 3; ++k) {
      const int i = tri[k], j = tri[(k + 1) % 3];
      const double wm_at = 0.5 * (w_at.values[i] + w_at.values[j]);
      const double um = 0.5 * (u0.values[i] + u0.values[j]);
      const double wm = 0.5 * (w_eval.values[i] + w_eval.values[j]);
      acc += sign_of((wm_at + 2.0 * um) * wm_at) * (wm + 2.0 * um) * wm;
    }
    total += d[1] * mesh.area(t) / 3.0 * acc;
  }

  for (int e : mesh.edges_with_tag(3)) {
    const auto& be = mesh.boundary_edges()[e];
    const double len = mesh.edge_length(e);
    const double sum_u = u0.values[be.a] + u0.values[be.b];
    auto point = [&](double w_at_p, double w_p, double u_p, double weight) {
      return weight * sign_of((w_at_p + 2.0 * u_p) * w_at_p) * (w_p + 2.0 * u_p) * w_p;
    };
    double acc = point(w_at.values[be.a], w_eval.values[be.a], u0.values[be.a], 1.0);
    acc += point(0.5 * (w_at.values[be.a] + w_at.values[be.b]),
                 0.5 * (w_eval.values[be.a] + w_eval.values[be.b]), 0.5 * sum_u, 4.0);
    acc += point(w_at.values[be.b], w_eval.values[be.b], u0.values[be.b], 1.0);
    total += d[2] * len / 6.0 * acc;
  }
  return total;
}

MinorantSearchResult maximize_minorant(const Scenario& s, const ScalarField& u0,
                                       const MinorantSearchOptions& opts)
{
  const Mesh& mesh = *s.mesh;
  const LambdaBound analytic = lambda_bound(s, u0);

  std::vector<ScalarField> starts;
  starts.emplace_back(s.mesh, VecX(analytic.lambda * u0.values)); // always included
  for (int k = 0; k < opts.random_starts; ++k) {
    std::mt19937_64 rng(opts.seed * 1000003ull + static_cast<uint64_t>(k));
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    VecX v(mesh.node_count());
    for (int i = 0; i < mesh.node_count(); ++i) v[i] = mesh.is_dirichlet(i) ? 0.0 : uni(rng);
    starts.emplace_back(s.mesh, std::move(v));
  }

  std::vector<StartResult> results(starts.size());
  const int threads = std::max(1, opts.threads);
  if (threads == 1) {
    for (size_t k = 0; k < starts.size(); ++k) results[k] = run_start(s, u0, starts[k], opts);
  } else {
    std::vector<std::future<StartResult>> futures;
    futures.reserve(starts.size());
    for (size_t k = 0; k < starts.size(); ++k)
      futures.push_back(std::async(std::launch::async,
                                   [&, k] { return run_start(s, u0, starts[k], opts); }));
    for (size_t k = 0; k < starts.size(); ++k) results[k] = futures[k].get();
  }

  MinorantSearchResult out;
  out.best = results[0].value;
  for (const auto& r : results) {
    out.outer_iterations += r.iterations;
    if (r.value.total > out.best.total) out.best = r.value;
  }

  // polish from the overall best
  const StartResult polished = run_start(s, u0, out.best.witness, opts);
  out.outer_iterations += polished.iterations;
  if (polished.value.total > out.best.total) out.best = polished.value;

  out.scaled_lower_bound = c_lower(s) * out.best.total;
  return out;
}

} // namespace rdb
