#pragma once

#include <Eigen/Core>

namespace cgpdm {

// Cholesky factor of a (possibly jittered) symmetric positive-definite matrix.
struct PsdFactorization {
  Eigen::MatrixXd lower_factor;
  double jitter_applied = 0.0;
  double log_det = 0.0;

  Eigen::Index size() const { return lower_factor.rows(); }
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd inverse() const;
  // v^T K^{-1} v
  double quadratic_form(const Eigen::VectorXd& v) const;
};

// Jitter ladder, as fractions of the mean diagonal.
inline constexpr double kJitterLadder[] = {1e-8, 1e-6, 1e-4};

// Plain Cholesky first; on failure retries with each jitter level added to the
// diagonal. Throws kNotPositiveDefinite when the last level fails too.
PsdFactorization factorize_psd(const Eigen::MatrixXd& k);

}  // namespace cgpdm
