#ifndef RDBOUNDS_TYPES_HPP
#define RDBOUNDS_TYPES_HPP

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/Sparse>

namespace rdb {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using VecX = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Nodal vector field: one (x,y) row per mesh node.
using NodalVectors = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Largest absolute eigenvalue of a symmetric 2x2 matrix.
inline double spectral_norm_sym(const Mat2& m)
{
  const double mean = 0.5 * (m(0, 0) + m(1, 1));
  const double r = std::sqrt(0.25 * (m(0, 0) - m(1, 1)) * (m(0, 0) - m(1, 1)) + m(0, 1) * m(1, 0));
  return std::max(std::abs(mean + r), std::abs(mean - r));
}

/// Eigenvalue range of a symmetric 2x2 matrix, (min, max).
inline std::pair<double, double> eig_range_sym(const Mat2& m)
{
  const double mean = 0.5 * (m(0, 0) + m(1, 1));
  const double r = std::sqrt(0.25 * (m(0, 0) - m(1, 1)) * (m(0, 0) - m(1, 1)) + m(0, 1) * m(1, 0));
  return {mean - r, mean + r};
}

} // namespace rdb

#endif
