#include "rdbounds/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "rdbounds/report.hpp"
#include "rdbounds/scenario_io.hpp"

namespace rdb {

namespace {

struct CommonArgs {
  std::string scenario_path;
  std::string out_dir = ".";
  uint64_t seed = 1;
  int samples = 0;
  int threads = 1;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args)
{
  cmd->add_option("scenario", args.scenario_path, "scenario file")->required();
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "random seed");
  cmd->add_option("--samples", args.samples, "number of random oracle samples")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--threads", args.threads, "worker thread cap")->check(CLI::PositiveNumber);
  cmd->add_option("--set", args.overrides, "scenario override key=value (repeatable)");
}

Scenario load_with_overrides(const CommonArgs& args)
{
  if (!std::filesystem::exists(args.scenario_path))
    throw ScenarioError("cannot open scenario file: " + args.scenario_path);
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const std::string& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ScenarioError("override must be key=value, got '" + kv + "'");
    overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return load_scenario_file(args.scenario_path, overrides);
}

void write_file(const std::string& dir, const std::string& name, const std::string& content)
{
  std::filesystem::create_directories(dir);
  const auto path = std::filesystem::path(dir) / name;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

ScalarField random_v0_field(const Scenario& s, std::mt19937_64& rng, double scale = 1.0)
{
  std::uniform_real_distribution<double> uni(-scale, scale);
  VecX v(s.mesh->node_count());
  for (int i = 0; i < s.mesh->node_count(); ++i)
    v[i] = s.mesh->is_dirichlet(i) ? 0.0 : uni(rng);
  return ScalarField(s.mesh, std::move(v));
}

FluxField random_flux(const Scenario& s, std::mt19937_64& rng, double scale = 1.0)
{
  std::uniform_real_distribution<double> uni(-scale, scale);
  NodalVectors v(s.mesh->node_count(), 2);
  for (int i = 0; i < s.mesh->node_count(); ++i) {
    v(i, 0) = uni(rng);
    v(i, 1) = uni(rng);
  }
  return FluxField(s.mesh, std::move(v));
}

int cmd_verify(const Scenario& s, uint64_t seed, int threads, std::ostream& out)
{
  bool all_pass = true;
  const auto line = [&](const std::string& name, const std::string& detail, bool pass) {
    out << name << ": " << detail << (pass ? " PASS" : " FAIL") << "\n";
    all_pass = all_pass && pass;
  };
  std::mt19937_64 rng(seed);
  const Mesh& mesh = *s.mesh;

  // geometry: triangle areas against the boundary loop, boundary measures
  {
    const double loop = mesh.boundary_loop_area();
    const bool ok = std::abs(mesh.total_area() - loop) <= 1e-12 * std::abs(loop);
    line("mesh_area", fmt9(mesh.total_area()) + " vs loop " + fmt9(loop), ok);
    double parts = 0.0, total = 0.0;
    for (int tag = 1; tag <= 3; ++tag) parts += boundary_measure(mesh, tag);
    for (int e = 0; e < mesh.boundary_edge_count(); ++e) total += mesh.edge_length(e);
    line("boundary_measure", fmt9(parts) + " vs " + fmt9(total),
         std::abs(parts - total) <= 1e-12 * total);
  }

  const LinearSystem system = assemble(s, s.mean);
  const ScalarField u0 = solve(system, {1e-13, 20});
  line("galerkin_residual", fmt9(residual_inf(system, u0)),
       residual_inf(system, u0) <= 1e-9 * system.rhs.norm());

  // norm equivalence over random fields and the extreme coefficient triples
  {
    bool ok = true;
    const double cu = c_upper(s), cl = c_lower(s);
    const auto extremes = extreme_perturbations(s);
    for (int k = 0; k < 20 && ok; ++k) {
      const ScalarField v = random_v0_field(s, rng);
      const double mean_sq = bilinear(s.mean, v, v);
      for (const auto& p : extremes) {
        const double pert_sq = bilinear(perturb(s, p), v, v);
        ok = ok && mean_sq <= cu * pert_sq * (1.0 + 1e-12) &&
             mean_sq >= cl * pert_sq * (1.0 - 1e-12);
      }
    }
    line("norm_equivalence", "20 fields x 8 extremes", ok);
  }

  // divergence identity: int (div y w + y . grad w) = int_boundary (y.nu) w
  {
    bool ok = true;
    double worst = 0.0;
    for (int k = 0; k < 5; ++k) {
      const ScalarField w = random_v0_field(s, rng);
      const FluxField y = random_flux(s, rng);
      const VecX div = flux_divergence(y);
      double volume = 0.0;
      for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles()[t];
        const double wbar = (w.values[tri[0]] + w.values[tri[1]] + w.values[tri[2]]) / 3.0;
        Vec2 ybar = Vec2::Zero();
        for (int i = 0; i < 3; ++i) ybar += y.at(tri[i]);
        ybar /= 3.0;
        volume += mesh.area(t) * (div[t] * wbar + ybar.dot(w.gradient(t)));
      }
      double boundary = 0.0;
      for (int tag = 2; tag <= 3; ++tag) {
        const NodalVectors trace = normal_trace(y, tag);
        const auto& edges = mesh.edges_with_tag(tag);
        for (size_t e = 0; e < edges.size(); ++e) {
          const auto& be = mesh.boundary_edges()[edges[e]];
          const int i = static_cast<int>(e);
          boundary += mesh.edge_length(edges[e]) / 6.0 *
                      (2.0 * trace(i, 0) * w.values[be.a] + trace(i, 0) * w.values[be.b] +
                       trace(i, 1) * w.values[be.a] + 2.0 * trace(i, 1) * w.values[be.b]);
        }
      }
      const double scale = std::abs(volume) + std::abs(boundary) + 1e-30;
      worst = std::max(worst, std::abs(volume - boundary) / scale);
      ok = ok && worst <= 1e-12;
    }
    line("integration_by_parts", "max rel " + fmt9(worst), ok);
  }

  // fixed-coefficient minorant equality at w = u_h - v
  {
    bool ok = true;
    double worst = 0.0;
    for (int k = 0; k < 5; ++k) {
      const ScalarField v = random_v0_field(s, rng);
      const ScalarField w(s.mesh, VecX(u0.values - v.values));
      const double lhs = minorant_fixed(s, s.mean, v, w);
      const double rhs = bilinear(s.mean, w, w);
      worst = std::max(worst, std::abs(lhs - rhs) / rhs);
      ok = ok && worst <= 1e-10;
    }
    line("minorant_equality", "max rel " + fmt9(worst), ok);
  }

  // lambda scan: the one-parameter family peaks at the analytic multiplier
  {
    const LambdaBound analytic = lambda_bound(s, u0);
    bool ok = true;
    if (analytic.lambda > 0.0) {
      double best_val = -1e300, best_lambda = 0.0;
      for (int k = 0; k <= 60; ++k) {
        const double lam = 3.0 * analytic.lambda * k / 60.0;
        const ScalarField w(s.mesh, VecX(lam * u0.values));
        const double val = minorant_radius(s, u0, w).total;
        if (val > best_val) {
          best_val = val;
          best_lambda = lam;
        }
      }
      ok = std::abs(best_lambda - analytic.lambda) <= 3.0 * analytic.lambda / 60.0 + 1e-15;
      line("lambda_scan", "peak at " + fmt9(best_lambda) + " vs " + fmt9(analytic.lambda), ok);
    } else {
      line("lambda_scan", "degenerate budget", true);
    }
  }

  // gamma identity: quadratic form at the optimal multipliers = squared sum
  {
    bool ok = true;
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      const ScalarField v = random_v0_field(s, rng);
      const FluxField y = random_flux(s, rng);
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      VecX mu1(mesh.triangle_count());
      for (int t = 0; t < mesh.triangle_count(); ++t)
        mu1[t] = s.mean.rho[t] > 0.0 ? uni(rng) : 0.0;
      VecX mu2(static_cast<int>(mesh.edges_with_tag(3).size()));
      for (Eigen::Index e = 0; e < mu2.size(); ++e) mu2[e] = s.mean.alpha[e] > 0.0 ? uni(rng) : 0.0;

      const double sum_form = majorant_sum_form(s, s.mean, v, y, mu1, mu2);
      const Residuals r = residuals(s, s.mean, v, y);
      const VecX w1 = VecX::Ones(mu1.size()) - mu1;
      double n1_sq = 0.0, n2_sq = 0.0;
      for (int t = 0; t < mesh.triangle_count(); ++t) {
        const double m0 = 0.5 * (r.r1(t, 0) + r.r1(t, 1)), m1 = 0.5 * (r.r1(t, 1) + r.r1(t, 2)),
                     m2 = 0.5 * (r.r1(t, 2) + r.r1(t, 0));
        n1_sq += w1[t] * w1[t] * mesh.area(t) / 3.0 * (m0 * m0 + m1 * m1 + m2 * m2);
      }
      const auto& robin = mesh.edges_with_tag(3);
      for (size_t e = 0; e < robin.size(); ++e) {
        const int i = static_cast<int>(e);
        const double ra = r.r2(i, 0), rb = r.r2(i, 1), rm = 0.5 * (ra + rb);
        n2_sq += (1.0 - mu2[i]) * (1.0 - mu2[i]) * mesh.edge_length(robin[e]) / 6.0 *
                 (ra * ra + 4.0 * rm * rm + rb * rb);
      }
      const MajorantGamma gamma = optimal_gamma(d_term(s.mean, v, y), std::sqrt(n1_sq),
                                                std::sqrt(n2_sq),
                                                std::sqrt(rN_norm_sq(mesh, r)),
                                                sigma_constants(s));
      const double gamma_form = majorant_gamma_form(s, s.mean, v, y, gamma, mu1, mu2).total;
      worst = std::max(worst, std::abs(gamma_form - sum_form) / sum_form);
      ok = ok && worst <= 1e-12;
    }
    line("gamma_identity", "max rel " + fmt9(worst), ok);
  }

  // pointwise mu optimality on a 0.05 grid
  {
    std::uniform_real_distribution<double> uni(0.1, 10.0);
    const double kappa = uni(rng), g2 = uni(rng), g3 = uni(rng);
    const auto [mu1, mu2] = optimal_mu(s.mean, kappa, g2, g3);
    bool ok = true;
    for (int t = 0; t < mesh.triangle_count() && ok; ++t) {
      if (s.mean.rho[t] <= 0.0) continue;
      const auto objective = [&](double mu) {
        return kappa * g2 * (1.0 - mu) * (1.0 - mu) + mu * mu / s.mean.rho[t];
      };
      for (int g = 0; g <= 20; ++g)
        ok = ok && objective(mu1[t]) <= objective(0.05 * g) + 1e-14;
    }
    line("mu_optimality", "grid 0.05", ok);
  }

  // worst-coefficient bounds on the majorant ingredients at the mean flux
  {
    std::vector<Vec2> mean_flux(mesh.triangle_count());
    for (int t = 0; t < mesh.triangle_count(); ++t) mean_flux[t] = s.mean.a[t] * u0.gradient(t);
    const FluxField y = interpolate_cell_vectors(s.mesh, mean_flux);
    const ExtremalBounds bounds = extremal_residual_bounds(s, u0, y);
    bool ok = true;
    for (const auto& p : extreme_perturbations(s)) {
      const Coefficients pert = perturb(s, p);
      const Residuals r = residuals(s, pert, u0, y);
      ok = ok && d_term(pert, u0, y) <= bounds.d_bound * (1.0 + 1e-10) + 1e-30;
      ok = ok && r1_norm_sq(mesh, r) <= bounds.r1_bound * (1.0 + 1e-10) + 1e-30;
      ok = ok && r2_norm_sq(mesh, r) <= bounds.r2_bound * (1.0 + 1e-10) + 1e-30;
    }
    line("extremal_bounds", "8 extremes", ok);
  }

  // optimized lower bound dominates the analytic one
  {
    MinorantSearchOptions mopts;
    mopts.seed = seed;
    mopts.threads = threads;
    const MinorantSearchResult search = maximize_minorant(s, u0, mopts);
    const double analytic = c_lower(s) * lambda_bound(s, u0).radius_sq;
    line("minorant_search",
         fmt9(search.scaled_lower_bound) + " >= " + fmt9(analytic),
         search.scaled_lower_bound >= analytic - 1e-12);
  }

  // sandwich with the extreme samples only
  {
    const OracleResult oracle = sample_radius(s, 0, seed, threads);
    const double lower_norm = c_lower(s) * normalized_radius_lower_sq(s);
    const double upper_norm = c_upper(s) * normalized_radius_upper_sq(s);
    const bool ok = oracle.empirical_normalized >= lower_norm - oracle.slack &&
                    oracle.empirical_normalized <= upper_norm + oracle.slack;
    line("sandwich",
         fmt9(oracle.empirical_normalized) + " in [" + fmt9(lower_norm - oracle.slack) + ", " +
             fmt9(upper_norm + oracle.slack) + "]",
         ok);
  }

  {
    const OrderingResult ordering = verify_ordering(s);
    line("ordering",
         (std::isfinite(ordering.ratio) ? fmt9(ordering.ratio) : std::string("inf")) + " >= 1",
         ordering.pass);
  }

  return all_pass ? 0 : 1;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
  CLI::App app{"two-sided bounds for the solution-set radius of reaction-diffusion "
               "problems with uncertain coefficients"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string report_path;
  std::string sweep_param = "delta";
  std::string sweep_values;

  CLI::App* solve_cmd = app.add_subcommand("solve", "solve the mean problem, write u0 + norms");
  add_common(solve_cmd, args);
  CLI::App* bounds_cmd = app.add_subcommand("bounds", "compute the two-sided radius bounds");
  add_common(bounds_cmd, args);
  CLI::App* sample_cmd = app.add_subcommand("sample", "bounds plus the sampling oracle");
  add_common(sample_cmd, args);
  CLI::App* verify_cmd = app.add_subcommand("verify", "run the invariant suite");
  add_common(verify_cmd, args);
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "delta sweep CSV table");
  add_common(sweep_cmd, args);
  sweep_cmd->add_option("--param", sweep_param, "swept parameter (delta)");
  sweep_cmd->add_option("--values", sweep_values, "comma-separated values")->required();
  CLI::App* report_cmd = app.add_subcommand("report", "render a JSON report as text");
  report_cmd->add_option("report", report_path, "report JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (report_cmd->parsed()) {
      std::ifstream in(report_path);
      if (!in) {
        err << "cannot open report file: " << report_path << "\n";
        return 2;
      }
      const Json j = Json::parse(in);
      out << render_report(j);
      return 0;
    }

    Scenario s;
    try {
      s = load_with_overrides(args);
    } catch (const std::exception& e) {
      err << "scenario error: " << e.what() << "\n";
      return 2;
    }

    if (solve_cmd->parsed()) {
      BoundsReport report = compute_bounds(s, [&] {
        ReportOptions opts;
        opts.seed = args.seed;
        opts.threads = args.threads;
        opts.minorant.random_starts = 0; // solve does not need the optimizer
        opts.minorant.max_outer = 0;
        return opts;
      }());
      const Json full = report_to_json(report);
      Json j;
      j["scenario"] = full["scenario"];
      j["mean"] = full["mean"];
      write_file(args.out_dir, "u0.field", field_to_text(report.u0));
      write_file(args.out_dir, "solution.json", j.dump(2) + "\n");
      out << render_report(j);
      return 0;
    }
    if (bounds_cmd->parsed() || sample_cmd->parsed()) {
      ReportOptions opts;
      opts.seed = args.seed;
      opts.threads = args.threads;
      BoundsReport report = compute_bounds(s, opts);
      if (sample_cmd->parsed())
        report.oracle = sample_radius(s, args.samples, args.seed, args.threads);
      const Json j = report_to_json(report);
      write_file(args.out_dir, "report.json", j.dump(2) + "\n");
      write_file(args.out_dir, "u0.field", field_to_text(report.u0));
      if (report.minorant.witness.mesh)
        write_file(args.out_dir, "witness.field", field_to_text(report.minorant.witness));
      out << render_report(j);
      return 0;
    }
    if (sweep_cmd->parsed()) {
      if (sweep_param != "delta") {
        err << "usage error: only --param delta is supported\n";
        return 2;
      }
      std::vector<double> values;
      std::stringstream ss(sweep_values);
      std::string token;
      try {
        while (std::getline(ss, token, ',')) values.push_back(std::stod(token));
      } catch (const std::exception&) {
        err << "usage error: cannot parse --values '" << sweep_values << "'\n";
        return 2;
      }
      if (values.empty()) {
        err << "usage error: --values must list at least one number\n";
        return 2;
      }
      const std::string csv = sweep_table(s, values, args.samples, args.seed, args.threads);
      write_file(args.out_dir, "sweep.csv", csv);
      out << csv;
      return 0;
    }
    if (verify_cmd->parsed()) return cmd_verify(s, args.seed, args.threads, out);

    err << "usage error: unknown command\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int run_cli(int argc, const char* const* argv)
{
  return run_cli(argc, argv, std::cout, std::cerr);
}

} // namespace rdb
