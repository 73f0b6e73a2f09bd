#include "rdbounds/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <sstream>

namespace rdb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Perturbation refine_perturbation(const Scenario& coarse, const Perturbation& p,
                                 const RefinedMesh& refined)
{
  const Mesh& fine = *refined.mesh;
  Perturbation out;
  out.id = p.id;
  out.psi_a.resize(fine.triangle_count());
  out.psi_rho.resize(fine.triangle_count());
  for (int t = 0; t < fine.triangle_count(); ++t) {
    out.psi_a[t] = p.psi_a[refined.parent_triangle[t]];
    out.psi_rho[t] = p.psi_rho[refined.parent_triangle[t]];
  }
  const auto& fine_edges = fine.edges_with_tag(3);
  out.psi_alpha.resize(static_cast<int>(fine_edges.size()));
  for (size_t k = 0; k < fine_edges.size(); ++k) {
    const int parent = refined.parent_edge[fine_edges[k]];
    out.psi_alpha[static_cast<int>(k)] = p.psi_alpha[coarse.mesh->tag_position(parent)];
  }
  return out;
}

Json echo_scenario(const Scenario& s)
{
  Json echo = Json::object();
  if (auto it = s.spec_echo.find("domain"); it != s.spec_echo.end())
    echo["domain"] = it->second;
  else
    echo["domain"] = "custom mesh";
  echo["mesh"] = {{"nodes", s.mesh->node_count()},
                  {"triangles", s.mesh->triangle_count()},
                  {"boundary_edges", s.mesh->boundary_edge_count()}};

  const auto scalar_or_field = [](const VecX& v) -> Json {
    if (v.size() == 0) return 0.0;
    if ((v.array() == v[0]).all()) return v[0];
    return "per-entity";
  };
  const bool uniform_a =
      std::all_of(s.mean.a.begin(), s.mean.a.end(), [&](const Mat2& m) { return m == s.mean.a[0]; });
  if (uniform_a)
    echo["a0"] = {s.mean.a[0](0, 0), s.mean.a[0](0, 1), s.mean.a[0](1, 1)};
  else
    echo["a0"] = "per-entity";
  echo["rho0"] = scalar_or_field(s.mean.rho);
  echo["alpha0"] = scalar_or_field(s.mean.alpha);
  echo["f"] = scalar_or_field(s.f);
  echo["F"] = scalar_or_field(s.neumann);
  echo["G"] = scalar_or_field(s.robin);
  echo["delta"] = s.budget.delta;
  echo["beta_lower"] = s.beta_lower;
  echo["beta_upper"] = s.beta_upper;
  echo["embedding"] = {{"c1", s.embedding.c1},
                       {"c2", s.embedding.c2},
                       {"c3", s.embedding.c3},
                       {"sigma_convention",
                        s.embedding.convention == SigmaConvention::derived ? "derived" : "paper"}};
  return echo;
}

} // namespace

std::string fmt9(double x)
{
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.9g", x);
  return buffer;
}

OrderingResult verify_ordering(const Scenario& s)
{
  const auto& d = s.budget.delta;
  const auto& bl = s.beta_lower;
  const auto& bu = s.beta_upper;

  OrderingResult out;
  const double lower_norm = c_lower(s) * normalized_radius_lower_sq(s);
  const double upper_norm = c_upper(s) * normalized_radius_upper_sq(s);
  if (lower_norm == 0.0) {
    out.ratio = kInf;
    out.defined = false;
    out.pass = true;
  } else {
    out.ratio = upper_norm / lower_norm;
    out.pass = out.ratio >= 1.0 - 1e-12;
  }

  // strengthened bound applies when the first index attains every extremum
  std::array<double, 3> cu{}, ru{}, cl{}, th{};
  for (int i = 0; i < 3; ++i) {
    cu[i] = bu[i] / (bl[i] - d[i]);
    ru[i] = d[i] * d[i] / (bl[i] * (bl[i] - d[i]));
    cl[i] = bl[i] / (bu[i] + d[i]);
    th[i] = d[i] / bu[i];
  }
  const bool first_attains =
      d[0] > 0.0 && cu[0] >= std::max({cu[0], cu[1], cu[2]}) &&
      ru[0] >= std::max({ru[0], ru[1], ru[2]}) && cl[0] <= std::min({cl[0], cl[1], cl[2]}) &&
      th[0] <= std::min({th[0], th[1], th[2]});
  if (first_attains) {
    out.strengthened_applicable = true;
    out.strengthened_bound = (bu[0] / bl[0]) * (bu[0] + d[0]) / (bl[0] - d[0]);
    out.strengthened_pass = out.ratio >= out.strengthened_bound * (1.0 - 1e-12);
    out.pass = out.pass && out.strengthened_pass;
  }
  return out;
}

OracleResult sample_radius(const Scenario& s, int num_random, uint64_t seed, int threads)
{
  if (num_random < 0) throw ScenarioError("number of random samples must be >= 0");
  s.validate();
  const ScalarField u0 = solve(assemble(s, s.mean));
  const double nsq0 = bilinear(s.mean, u0, u0);

  std::vector<Perturbation> candidates = extreme_perturbations(s);
  {
    std::vector<Vec2> grads(s.mesh->triangle_count());
    for (int t = 0; t < s.mesh->triangle_count(); ++t) grads[t] = u0.gradient(t);
    candidates.push_back(flux_aligned_perturbation(s, grads));
  }
  std::mt19937_64 rng(seed);
  for (int k = 0; k < num_random; ++k) {
    Perturbation p = random_perturbation(s, rng);
    p.id = "random_" + std::to_string(k);
    candidates.push_back(std::move(p));
  }

  const auto sample_error_sq = [&](const Perturbation& p) -> double {
    try {
      const ScalarField u = solve(assemble(s, perturb(s, p)));
      const ScalarField diff(u0.mesh, VecX(u0.values - u.values));
      return bilinear(s.mean, diff, diff);
    } catch (const std::exception&) {
      return -kInf; // skipped sample
    }
  };

  std::vector<double> errors(candidates.size());
  const int workers = std::max(1, threads);
  if (workers == 1) {
    for (size_t k = 0; k < candidates.size(); ++k) errors[k] = sample_error_sq(candidates[k]);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::future<void>> pool;
    for (int w = 0; w < workers; ++w)
      pool.push_back(std::async(std::launch::async, [&] {
        for (size_t k = next.fetch_add(1); k < candidates.size(); k = next.fetch_add(1))
          errors[k] = sample_error_sq(candidates[k]);
      }));
    for (auto& f : pool) f.get();
  }

  OracleResult out;
  out.samples = static_cast<int>(candidates.size());
  for (double e : errors)
    if (e == -kInf) ++out.skipped;
  if (out.skipped == out.samples)
    throw FemError("every oracle sample failed to solve");
  size_t worst = 0;
  for (size_t k = 1; k < candidates.size(); ++k)
    if (errors[k] > errors[worst]) worst = k;
  out.empirical_sq = std::max(0.0, errors[worst]);
  out.empirical_normalized = nsq0 > 0.0 ? out.empirical_sq / nsq0 : 0.0;
  out.worst_id = candidates[worst].id;

  // discretization slack by one uniform refinement of the mean problem and of
  // the worst sample
  const RefinedMesh refined = refine_uniform(*s.mesh);
  const Scenario fine = refine(s, refined);
  const ScalarField u0_fine = solve(assemble(fine, fine.mean));
  const ScalarField gap0(fine.mesh, VecX(prolong(refined, u0.values) - u0_fine.values));
  out.slack_u0_sq = bilinear(fine.mean, gap0, gap0);

  const Perturbation worst_fine = refine_perturbation(s, candidates[worst], refined);
  const ScalarField uw_coarse = solve(assemble(s, perturb(s, candidates[worst])));
  const ScalarField uw_fine = solve(assemble(fine, perturb(fine, worst_fine)));
  const ScalarField gapw(fine.mesh, VecX(prolong(refined, uw_coarse.values) - uw_fine.values));
  out.slack_worst_sq = bilinear(fine.mean, gapw, gapw);

  out.slack = nsq0 > 0.0 ? 3.0 * out.slack_u0_sq / nsq0 : 0.0;
  return out;
}

BoundsReport compute_bounds(const Scenario& s, const ReportOptions& opts)
{
  s.validate();
  BoundsReport report;
  report.scenario_echo = echo_scenario(s);
  report.c_upper_value = c_upper(s);
  report.c_lower_value = c_lower(s);
  report.theta_value = theta(s);
  report.sigma = sigma_constants(s);
  report.sigma_other = sigma_constants(s, s.embedding.convention == SigmaConvention::derived
                                              ? SigmaConvention::paper
                                              : SigmaConvention::derived);
  report.sigma_convention =
      s.embedding.convention == SigmaConvention::derived ? "derived" : "paper";

  report.u0 = solve(assemble(s, s.mean));
  report.mean_energy_norm = energy_norm(s.mean, report.u0);
  report.h = s.mesh->h_max();

  const LambdaBound analytic = lambda_bound(s, report.u0);
  report.lower_analytic = report.c_lower_value * analytic.radius_sq;
  report.lower_normalized = report.c_lower_value * normalized_radius_lower_sq(s);

  MinorantSearchOptions mopts = opts.minorant;
  mopts.seed = opts.seed;
  mopts.threads = opts.threads;
  const MinorantSearchResult search = maximize_minorant(s, report.u0, mopts);
  report.lower_optimized = search.scaled_lower_bound;
  report.minorant = search.best;

  report.upper_value = report.c_upper_value * radius_upper_sq(s, report.u0);
  report.upper_normalized = report.c_upper_value * normalized_radius_upper_sq(s);

  report.ordering = verify_ordering(s);
  if (!report.ordering.defined && report.upper_normalized == 0.0)
    report.ordering.ratio = 1.0; // both bounds vanish for an empty budget
  return report;
}

Json minorant_to_json(const MinorantValue& value)
{
  return Json{{"total", value.total},
              {"parts",
               {{"norm0", value.norm0_part},
                {"delta1", value.delta1_part},
                {"delta2", value.delta2_part},
                {"delta3", value.delta3_part}}}};
}

Json majorant_to_json(const MajorantValue& value, const std::string& flux_path)
{
  const auto gamma = [](double g) -> Json {
    if (std::isfinite(g)) return g;
    return "inf";
  };
  return Json{{"total", value.total},
              {"parts",
               {{"d", value.d_part},
                {"r1", value.r1_part},
                {"r2", value.r2_part},
                {"neumann", value.neumann_part},
                {"mu1", value.mu1_part},
                {"mu2", value.mu2_part}}},
              {"gamma",
               {gamma(value.gamma.g1), gamma(value.gamma.g2), gamma(value.gamma.g3),
                gamma(value.gamma.g4)}},
              {"kappa", value.kappa},
              {"flux", flux_path}};
}

Json report_to_json(const BoundsReport& report)
{
  Json j;
  j["scenario"] = report.scenario_echo;
  j["constants"] = {{"c_upper", report.c_upper_value},
                    {"c_lower", report.c_lower_value},
                    {"theta", report.theta_value},
                    {"sigma", report.sigma},
                    {"sigma_convention", report.sigma_convention},
                    {"sigma_other", report.sigma_other}};
  j["mean"] = {{"energy_norm", report.mean_energy_norm}, {"h", report.h}};
  j["lower"] = {{"analytic", report.lower_analytic},
                {"optimized", report.lower_optimized},
                {"normalized", report.lower_normalized}};
  if (report.minorant.witness.mesh)
    j["lower"]["minorant"] = minorant_to_json(report.minorant);
  j["upper"] = {{"value", report.upper_value}, {"normalized", report.upper_normalized}};
  if (report.oracle) {
    const OracleResult& oracle = *report.oracle;
    j["oracle"] = {{"samples", oracle.samples},
                   {"empirical", oracle.empirical_sq},
                   {"empirical_normalized", oracle.empirical_normalized},
                   {"worst_id", oracle.worst_id},
                   {"slack", oracle.slack},
                   {"slack_terms", {{"u0", oracle.slack_u0_sq}, {"worst", oracle.slack_worst_sq}}}};
    if (oracle.skipped > 0) j["oracle"]["skipped"] = oracle.skipped;
  }
  j["ordering"] = Json::object();
  if (std::isfinite(report.ordering.ratio))
    j["ordering"]["ratio"] = report.ordering.ratio;
  else
    j["ordering"]["ratio"] = "inf";
  j["ordering"]["pass"] = report.ordering.pass;
  if (report.ordering.strengthened_applicable)
    j["ordering"]["strengthened_bound"] = report.ordering.strengthened_bound;
  return j;
}

std::string render_report(const Json& report)
{
  std::ostringstream out;
  const auto num = [&](const Json& j) -> std::string {
    if (j.is_string()) return j.get<std::string>();
    return fmt9(j.get<double>());
  };

  if (report.contains("scenario")) {
    const Json& sc = report["scenario"];
    out << "scenario: " << sc.value("domain", std::string("?"));
    if (sc.contains("mesh"))
      out << " (" << sc["mesh"]["nodes"] << " nodes, " << sc["mesh"]["triangles"]
          << " triangles)";
    out << "\n";
    if (sc.contains("delta"))
      out << "delta: " << num(sc["delta"][0]) << " " << num(sc["delta"][1]) << " "
          << num(sc["delta"][2]) << "\n";
  }
  if (report.contains("constants")) {
    const Json& c = report["constants"];
    out << "constants: C_upper=" << num(c["c_upper"]) << " C_lower=" << num(c["c_lower"])
        << " theta=" << num(c["theta"]) << " sigma=[" << num(c["sigma"][0]) << ", "
        << num(c["sigma"][1]) << ", " << num(c["sigma"][2]) << "]\n";
  }
  if (report.contains("mean")) {
    out << "mean energy norm: " << num(report["mean"]["energy_norm"])
        << "  h: " << num(report["mean"]["h"]) << "\n";
  }
  if (report.contains("lower")) {
    const Json& l = report["lower"];
    out << "lower bound r^2: analytic=" << num(l["analytic"])
        << " optimized=" << num(l["optimized"]) << " normalized=" << num(l["normalized"]) << "\n";
  }
  if (report.contains("upper")) {
    const Json& u = report["upper"];
    out << "upper bound r^2: value=" << num(u["value"]) << " normalized=" << num(u["normalized"])
        << "\n";
  }
  if (report.contains("oracle")) {
    const Json& o = report["oracle"];
    out << "oracle: samples=" << o["samples"] << " empirical=" << num(o["empirical"])
        << " normalized=" << num(o["empirical_normalized"]) << " worst="
        << o["worst_id"].get<std::string>() << " slack=" << num(o["slack"]) << "\n";
  }
  if (report.contains("ordering")) {
    const Json& o = report["ordering"];
    out << "ordering: " << num(o["ratio"]) << " >= 1 " << (o["pass"].get<bool>() ? "PASS" : "FAIL")
        << "\n";
  }
  return out.str();
}

std::string sweep_table(const Scenario& base, const std::vector<double>& deltas, int num_random,
                        uint64_t seed, int threads)
{
  std::ostringstream out;
  out << "delta,lower_norm,upper_norm,empirical_norm,ratio\n";
  for (double d : deltas) {
    Scenario s = base;
    s.budget.delta = {d, d, d};
    s.validate();
    const double lower_norm = c_lower(s) * normalized_radius_lower_sq(s);
    const double upper_norm = c_upper(s) * normalized_radius_upper_sq(s);
    const OracleResult oracle = sample_radius(s, num_random, seed, threads);
    const OrderingResult ordering = verify_ordering(s);
    out << fmt9(d) << "," << fmt9(lower_norm) << "," << fmt9(upper_norm) << ","
        << fmt9(oracle.empirical_normalized) << ","
        << (std::isfinite(ordering.ratio) ? fmt9(ordering.ratio) : "inf") << "\n";
  }
  return out.str();
}

} // namespace rdb
