#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rdbounds/minorant.hpp"
#include "test_support.hpp"

using namespace rdb;
using rdb::testing::random_scenario;
using rdb::testing::random_v0_field;
using rdb::testing::reference_scenario;

TEST_CASE("fixed-coefficient minorant")
{
  const Scenario s = reference_scenario(8);
  const ScalarField u_h = solve(assemble(s, s.mean), {1e-13, 20});
  std::mt19937_64 rng(1);

  SUBCASE("zero test function gives zero")
  {
    const ScalarField v = random_v0_field(s, rng);
    CHECK(minorant_fixed(s, s.mean, v, ScalarField::zero(s.mesh)) == 0.0);
  }
  SUBCASE("equality at w = u_h - v")
  {
    for (int k = 0; k < 20; ++k) {
      const ScalarField v = random_v0_field(s, rng);
      const ScalarField w(s.mesh, VecX(u_h.values - v.values));
      const double lhs = minorant_fixed(s, s.mean, v, w);
      const double rhs = bilinear(s.mean, w, w);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
  }
  SUBCASE("at v = u_h every w is non-positive up to solver tolerance")
  {
    for (int k = 0; k < 10; ++k) {
      const ScalarField w = random_v0_field(s, rng);
      CHECK(minorant_fixed(s, s.mean, u_h, w) <= 1e-9);
    }
  }
  SUBCASE("functions outside V0 are rejected")
  {
    ScalarField w = random_v0_field(s, rng);
    w.values[s.mesh->dirichlet_nodes()[0]] = 1.0;
    CHECK_THROWS_AS(minorant_fixed(s, s.mean, u_h, w), FemError);
  }
}

TEST_CASE("worst-case minorant value")
{
  const Scenario s = reference_scenario(8);
  const ScalarField u0 = solve(assemble(s, s.mean), {1e-13, 20});
  std::mt19937_64 rng(2);

  SUBCASE("zero test function")
  {
    const MinorantValue m = minorant_radius(s, u0, ScalarField::zero(s.mesh));
    CHECK(m.total == 0.0);
    CHECK(m.norm0_part == 0.0);
    CHECK(m.delta1_part == 0.0);
  }
  SUBCASE("empty budget leaves only the negative part")
  {
    Scenario s0 = s;
    s0.budget.delta = {0, 0, 0};
    const ScalarField w = random_v0_field(s0, rng);
    const MinorantValue m = minorant_radius(s0, u0, w);
    CHECK(m.total == doctest::Approx(-bilinear(s0.mean, w, w)).epsilon(1e-13));
    CHECK(m.total <= 0.0);
  }
  SUBCASE("parts sum to the total and the delta parts are nonnegative")
  {
    for (int k = 0; k < 10; ++k) {
      const ScalarField w = random_v0_field(s, rng);
      const MinorantValue m = minorant_radius(s, u0, w);
      CHECK(m.total ==
            doctest::Approx(m.norm0_part + m.delta1_part + m.delta2_part + m.delta3_part)
                .epsilon(1e-12));
      CHECK(m.delta1_part >= 0.0);
      CHECK(m.delta2_part >= 0.0);
      CHECK(m.delta3_part >= 0.0);
    }
  }
  SUBCASE("the analytic candidate reproduces the closed form")
  {
    const LambdaBound analytic = lambda_bound(s, u0);
    const ScalarField w(s.mesh, VecX(analytic.lambda * u0.values));
    const MinorantValue m = minorant_radius(s, u0, w);
    CHECK(m.total == doctest::Approx(analytic.radius_sq).epsilon(1e-10));
  }
}

TEST_CASE("analytic lower bound")
{
  const Scenario s = reference_scenario(8);
  const ScalarField u0 = solve(assemble(s, s.mean), {1e-13, 20});

  SUBCASE("empty budget")
  {
    Scenario s0 = s;
    s0.budget.delta = {0, 0, 0};
    const LambdaBound b = lambda_bound(s0, u0);
    CHECK(b.radius_sq == 0.0);
    CHECK(b.lambda == 0.0);
    CHECK_FALSE(b.degenerate);
  }
  SUBCASE("zero field is degenerate")
  {
    const LambdaBound b = lambda_bound(s, ScalarField::zero(s.mesh));
    CHECK(b.degenerate);
    CHECK(b.radius_sq == 0.0);
  }
  SUBCASE("closed form in terms of the two norms")
  {
    const double n0 = bilinear(s.mean, u0, u0);
    const double nd = delta_norm_squared(s, u0);
    const LambdaBound b = lambda_bound(s, u0);
    CHECK(b.lambda == doctest::Approx(nd / (n0 - nd)).epsilon(1e-14));
    CHECK(b.radius_sq == doctest::Approx(nd * nd / (n0 - nd)).epsilon(1e-14));
    // the theta chain from below
    const double th = theta(s);
    CHECK(b.radius_sq >= th * th / (1.0 - th) * n0 * (1.0 - 1e-12));
  }
}

TEST_CASE("normalized lower bound closed form")
{
  Scenario s = reference_scenario(2);
  CHECK(normalized_radius_lower_sq(s) == doctest::Approx(0.01 / 0.9).epsilon(1e-12));
  s.budget.delta = {0, 0, 0};
  CHECK(normalized_radius_lower_sq(s) == 0.0);
  s.budget.delta = {0.5, 0.5, 0.5};
  CHECK(normalized_radius_lower_sq(s) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("lambda scan peaks at the analytic multiplier")
{
  const Scenario s = reference_scenario(8);
  const ScalarField u0 = solve(assemble(s, s.mean), {1e-13, 20});
  const LambdaBound analytic = lambda_bound(s, u0);
  REQUIRE(analytic.lambda > 0.0);
  double best_val = -1e300, best_lambda = 0.0;
  const int grid = 90;
  for (int k = 0; k <= grid; ++k) {
    const double lam = 3.0 * analytic.lambda * k / grid;
    const ScalarField w(s.mesh, VecX(lam * u0.values));
    const double val = minorant_radius(s, u0, w).total;
    if (val > best_val) {
      best_val = val;
      best_lambda = lam;
    }
  }
  CHECK(std::abs(best_lambda - analytic.lambda) <= 3.0 * analytic.lambda / grid + 1e-15);
}

TEST_CASE("sign-frozen model minorizes and is tight at the freezing point")
{
  const Scenario s = reference_scenario(6);
  const ScalarField u0 = solve(assemble(s, s.mean), {1e-13, 20});
  std::mt19937_64 rng(4);
  for (int k = 0; k < 20; ++k) {
    const ScalarField w_at = random_v0_field(s, rng);
    const ScalarField w_eval = random_v0_field(s, rng);
    const double tight = minorant_frozen_model(s, u0, w_at, w_at);
    const double exact = minorant_radius(s, u0, w_at).total;
    CHECK(tight == doctest::Approx(exact).epsilon(1e-12));
    CHECK(minorant_frozen_model(s, u0, w_at, w_eval) <=
          minorant_radius(s, u0, w_eval).total + 1e-12);
  }
}

TEST_CASE("maximized minorant")
{
  SUBCASE("empty budget maximizes at zero")
  {
    Scenario s0 = reference_scenario(6);
    s0.budget.delta = {0, 0, 0};
    const ScalarField u0 = solve(assemble(s0, s0.mean), {1e-13, 20});
    MinorantSearchOptions opts;
    opts.random_starts = 2;
    const MinorantSearchResult res = maximize_minorant(s0, u0, opts);
    CHECK(res.best.total == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(res.best.witness.values.norm() == 0.0);
  }
  SUBCASE("dominates the analytic candidate and improves monotonically")
  {
    const Scenario s = reference_scenario(8);
    const ScalarField u0 = solve(assemble(s, s.mean), {1e-13, 20});
    const LambdaBound analytic = lambda_bound(s, u0);

    MinorantSearchOptions quick;
    quick.max_outer = 1;
    quick.random_starts = 1;
    const double early = maximize_minorant(s, u0, quick).best.total;
    MinorantSearchOptions full;
    full.max_outer = 50;
    full.random_starts = 3;
    const MinorantSearchResult res = maximize_minorant(s, u0, full);
    CHECK(res.best.total >= analytic.radius_sq - 1e-12);
    CHECK(res.best.total >= early - 1e-12);
    CHECK(res.scaled_lower_bound ==
          doctest::Approx(c_lower(s) * res.best.total).epsilon(1e-14));
    // the returned witness reproduces the reported value
    CHECK(minorant_radius(s, u0, res.best.witness).total ==
          doctest::Approx(res.best.total).epsilon(1e-13));
  }
  SUBCASE("strict improvement over the one-parameter family somewhere")
  {
    std::mt19937_64 rng(777);
    bool improved = false;
    for (int k = 0; k < 3; ++k) {
      const Scenario s = random_scenario(rng, 8);
      const ScalarField u0 = solve(assemble(s, s.mean), {1e-13, 20});
      const LambdaBound analytic = lambda_bound(s, u0);
      MinorantSearchOptions opts;
      opts.seed = 5;
      const MinorantSearchResult res = maximize_minorant(s, u0, opts);
      if (analytic.radius_sq > 0.0 && res.best.total > 1.01 * analytic.radius_sq) improved = true;
    }
    CHECK(improved);
  }
}

TEST_CASE("search result does not depend on the worker count")
{
  const Scenario s = reference_scenario(8);
  const ScalarField u0 = solve(assemble(s, s.mean), {1e-13, 20});
  MinorantSearchOptions seq;
  seq.seed = 12;
  MinorantSearchOptions par = seq;
  par.threads = 4;
  const MinorantSearchResult a = maximize_minorant(s, u0, seq);
  const MinorantSearchResult b = maximize_minorant(s, u0, par);
  CHECK(a.best.total == b.best.total);
  CHECK((a.best.witness.values - b.best.witness.values).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("dyad norm identity used to collapse the matrix perturbation")
{
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const Vec2 a(uni(rng), uni(rng));
    const Vec2 b(uni(rng), uni(rng));
    const Mat2 dyad = a * b.transpose();
    const double frob = dyad.norm();
    CHECK(frob == doctest::Approx(a.norm() * b.norm()).epsilon(1e-14));
  }
}
