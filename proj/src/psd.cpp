#include "cgpdm/psd.hpp"

#include <lapacke.h>

#include <cmath>
#include <string>

#include "cgpdm/error.hpp"

namespace cgpdm {
namespace {

constexpr const char* kModule = "kernel-core";

lapack_int lapack_dim(Eigen::Index n) { return static_cast<lapack_int>(n); }

bool try_cholesky(const Eigen::MatrixXd& k, PsdFactorization* out) {
  Eigen::MatrixXd lower = k;
  const lapack_int n = lapack_dim(k.rows());
  if (n > 0 &&
      LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', n, lower.data(), n) != 0) {
    return false;
  }
  lower.triangularView<Eigen::StrictlyUpper>().setZero();
  const auto diag = lower.diagonal().array();
  if (!(diag > 0.0).all() || !diag.isFinite().all()) return false;
  out->log_det = 2.0 * diag.log().sum();
  out->lower_factor = std::move(lower);
  return true;
}

}  // namespace

Eigen::MatrixXd PsdFactorization::solve(const Eigen::MatrixXd& rhs) const {
  Eigen::MatrixXd out = rhs;
  if (out.size() == 0) return out;
  const lapack_int n = lapack_dim(size());
  LAPACKE_dpotrs(LAPACK_COL_MAJOR, 'L', n, lapack_dim(out.cols()),
                 lower_factor.data(), n, out.data(), lapack_dim(out.rows()));
  return out;
}

Eigen::VectorXd PsdFactorization::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd out = rhs;
  lower_factor.triangularView<Eigen::Lower>().solveInPlace(out);
  lower_factor.transpose().triangularView<Eigen::Upper>().solveInPlace(out);
  return out;
}

Eigen::MatrixXd PsdFactorization::inverse() const {
  Eigen::MatrixXd out = lower_factor;
  const lapack_int n = lapack_dim(size());
  if (n > 0) LAPACKE_dpotri(LAPACK_COL_MAJOR, 'L', n, out.data(), n);
  out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
  return out;
}

double PsdFactorization::quadratic_form(const Eigen::VectorXd& v) const {
  Eigen::VectorXd half = v;
  lower_factor.triangularView<Eigen::Lower>().solveInPlace(half);
  return half.squaredNorm();
}

PsdFactorization factorize_psd(const Eigen::MatrixXd& k) {
  if (k.rows() != k.cols()) {
    throw Error(ErrorKind::kShape, kModule, "matrix to factorize is not square");
  }
  if (!k.allFinite()) {
    throw Error(ErrorKind::kNotPositiveDefinite, kModule,
                "matrix contains non-finite entries");
  }
  PsdFactorization out;
  if (try_cholesky(k, &out)) return out;

  const double mean_diag = k.rows() > 0 ? k.diagonal().mean() : 1.0;
  const double scale = mean_diag > 0.0 ? mean_diag : 1.0;
  for (double level : kJitterLadder) {
    Eigen::MatrixXd jittered = k;
    const double jitter = level * scale;
    jittered.diagonal().array() += jitter;
    if (try_cholesky(jittered, &out)) {
      out.jitter_applied = jitter;
      return out;
    }
  }
  throw Error(ErrorKind::kNotPositiveDefinite, kModule,
              "Cholesky failed at maximum jitter (" +
                  std::to_string(kJitterLadder[2] * scale) + ") for a " +
                  std::to_string(k.rows()) + "x" + std::to_string(k.cols()) +
                  " matrix");
}

}  // namespace cgpdm
