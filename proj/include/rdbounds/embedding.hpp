#ifndef RDBOUNDS_EMBEDDING_HPP
#define RDBOUNDS_EMBEDDING_HPP

#include "rdbounds/fem.hpp"

namespace rdb {

struct RayleighOptions {
  int max_iterations = 200;
  double rtol = 1e-10;
  double cg_rtol = 1e-12;
  uint64_t seed = 7;
};

/// Largest value of |w|^2_Omega / |grad w|^2_Omega over the discrete V0
/// (zero on tag-1 nodes), by power iteration on the stiffness-inverse mass.
/// A discrete maximum understates the continuous constant; round up before
/// shipping a value as an embedding constant.
double estimate_friedrichs_constant(const MeshPtr& mesh, const RayleighOptions& opts = {});

/// Largest value of |w|^2_{Gamma_tag} / |grad w|^2_Omega over the discrete V0.
double estimate_trace_constant(const MeshPtr& mesh, int tag, const RayleighOptions& opts = {});

} // namespace rdb

#endif
