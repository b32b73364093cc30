#pragma once

// Negative log-likelihood of Q independent zero-mean GPs that share one Gram
// matrix K and differ only by the output scalings w_j (covariance K / w_j^2):
//
//   L = (Q/2) ln|K| + 1/2 tr(K^{-1} T W^2 T^T) - M ln|W|
//
// Used by both the latent map (T = Y) and the dynamics map (T = Delta).

#include <Eigen/Core>

#include "cgpdm/psd.hpp"

namespace cgpdm::detail {

struct ScaledGpLoss {
  double value = 0.0;
  Eigen::MatrixXd dgram;     // dL/dK, symmetric
  Eigen::MatrixXd dtargets;  // dL/dT
  Eigen::VectorXd dlog_w;    // dL/d ln w_j
};

inline double scaled_gp_value(const PsdFactorization& factor,
                              const Eigen::MatrixXd& targets,
                              const Eigen::VectorXd& w) {
  const Eigen::Index m = targets.rows();
  const Eigen::Index q = targets.cols();
  // L^{-1} T, whose squared column norms are the quadratic forms.
  Eigen::MatrixXd half = targets;
  factor.lower_factor.triangularView<Eigen::Lower>().solveInPlace(half);
  const Eigen::VectorXd quad = half.colwise().squaredNorm().transpose();
  return 0.5 * static_cast<double>(q) * factor.log_det +
         0.5 * w.array().square().matrix().dot(quad) -
         static_cast<double>(m) * w.array().log().sum();
}

inline ScaledGpLoss scaled_gp_value_and_grad(const PsdFactorization& factor,
                                             const Eigen::MatrixXd& targets,
                                             const Eigen::VectorXd& w) {
  const Eigen::Index m = targets.rows();
  const Eigen::Index q = targets.cols();
  const Eigen::VectorXd w2 = w.array().square().matrix();

  const Eigen::MatrixXd alpha = factor.solve(targets);  // K^{-1} T
  const Eigen::VectorXd quad =
      targets.cwiseProduct(alpha).colwise().sum().transpose();

  ScaledGpLoss out;
  out.value = 0.5 * static_cast<double>(q) * factor.log_det +
              0.5 * w2.dot(quad) -
              static_cast<double>(m) * w.array().log().sum();

  const Eigen::MatrixXd weighted = alpha * w.asDiagonal();  // K^{-1} T W
  out.dgram = factor.inverse();
  out.dgram *= 0.5 * static_cast<double>(q);
  out.dgram.noalias() -= 0.5 * weighted * weighted.transpose();
  out.dtargets = alpha * w2.asDiagonal();
  out.dlog_w = (w2.array() * quad.array()).matrix() -
               Eigen::VectorXd::Constant(q, static_cast<double>(m));
  return out;
}

}  // namespace cgpdm::detail
