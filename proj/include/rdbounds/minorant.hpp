#ifndef RDBOUNDS_MINORANT_HPP
#define RDBOUNDS_MINORANT_HPP

#include "rdbounds/fem.hpp"

namespace rdb {

/// Worst-case minorant value split into its parts:
/// total = -|w|_0^2 + sum of the three nonnegative delta terms.
struct MinorantValue {
  double total = 0.0;
  double norm0_part = 0.0;   // -|w|_0^2
  double delta1_part = 0.0;  // delta_1 int |grad w + 2 grad u0| |grad w|
  double delta2_part = 0.0;  // delta_2 int |(w + 2 u0) w|
  double delta3_part = 0.0;  // delta_3 int_G3 |(w + 2 u0) w|
  ScalarField witness;
};

/// Fixed-coefficient minorant -a(w + 2v, w) + 2 l(w): a computable lower
/// bound of the squared energy error of v for that coefficient triple, with
/// equality at w = u - v.
double minorant_fixed(const Scenario& s, const Coefficients& coeffs, const ScalarField& v,
                      const ScalarField& w);

/// Worst-case-over-coefficients minorant of the squared radius at test
/// function w (the |a (x) b| = |a||b| identity for dyads collapses the
/// matrix perturbation term to a product of gradient norms).
MinorantValue minorant_radius(const Scenario& s, const ScalarField& u0, const ScalarField& w);

struct LambdaBound {
  double radius_sq = 0.0; // |u0|_delta^4 / (|u0|_0^2 - |u0|_delta^2)
  double lambda = 0.0;    // maximizing multiplier of w = lambda u0
  bool degenerate = false;
};

/// Closed-form lower bound from the one-parameter family w = lambda u0.
/// Degenerate (zero) only when u0 vanishes or the budget is empty.
LambdaBound lambda_bound(const Scenario& s, const ScalarField& u0);

/// Normalized closed form theta^2 / (1 - theta).
double normalized_radius_lower_sq(const Scenario& s);

struct MinorantSearchOptions {
  int max_outer = 50;        // sign-freeze iterations per start
  int random_starts = 5;
  double stagnation_rtol = 1e-8;
  double cg_rtol = 1e-10;
  uint64_t seed = 1;
  int threads = 1;
};

struct MinorantSearchResult {
  MinorantValue best;
  double scaled_lower_bound = 0.0; // c_lower * best.total, the certified bound
  int outer_iterations = 0;        // total across starts
};

/// Maximize the worst-case minorant over the finite element space by
/// iterative sign freezing: fix the sign pattern (and the extremal matrix
/// direction) of the absolute-value integrands at the current iterate, solve
/// the resulting SPD quadratic maximization, refresh, repeat. Every iterate
/// evaluates through minorant_radius, so any returned value is a valid bound;
/// the analytic candidate w = lambda* u0 is always included.
MinorantSearchResult maximize_minorant(const Scenario& s, const ScalarField& u0,
                                       const MinorantSearchOptions& opts = {});

/// Value of the sign-frozen quadratic model: absolute values are replaced by
/// the sign pattern (and extremal matrix direction) taken at w_at, then the
/// resulting quadratic is evaluated at w_eval. Underestimates minorant_radius
/// everywhere and coincides with it at w_eval = w_at.
double minorant_frozen_model(const Scenario& s, const ScalarField& u0, const ScalarField& w_at,
                             const ScalarField& w_eval);

} // namespace rdb

#endif
