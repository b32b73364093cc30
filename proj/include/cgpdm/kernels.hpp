#pragma once

#include <Eigen/Core>
#include <array>
#include <span>
#include <string_view>

namespace cgpdm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ModelVariant { kLowly, kHighly };

std::string_view to_string(ModelVariant variant);
ModelVariant parse_model_variant(std::string_view text);

// Y-variants take latent points (dimension d); X-variants take extended
// points [x; u] (dimension d + E).
enum class KernelVariant { kLowlyY, kHighlyY, kLowlyX, kHighlyX };

std::string_view to_string(KernelVariant variant);

// Scalar kernel primitives. `same_index` switches on the noise term: it marks
// two inputs that are the same training sample (or the query against itself),
// never mere coordinate equality.
double kernel_y_lowly(std::span<const double> xr, std::span<const double> xs,
                      double beta1, double beta2, bool same_index);
double kernel_y_highly(std::span<const double> xr, std::span<const double> xs,
                       std::span<const double> lengthscales, double sigma,
                       bool same_index);
double kernel_x_lowly(std::span<const double> xr, std::span<const double> xs,
                      const std::array<double, 4>& alpha, bool same_index);
double kernel_x_highly(std::span<const double> xr, std::span<const double> xs,
                       std::span<const double> lengthscales,
                       std::span<const double> phi, double sigma,
                       bool same_index);

/// One of the four kernel parameterizations together with its positive
/// hyper-parameters.
///
/// Raw parameter order (log-parameter vectors use the same order):
///   LowlyY  : beta1, beta2
///   HighlyY : lambda_1..lambda_n, sigma
///   LowlyX  : alpha1..alpha4
///   HighlyX : lambda_1..lambda_n, phi_1..phi_{n+1}, sigma
/// where n is the input dimension. Isotropic variants accept any dimension.
class Kernel {
 public:
  Kernel() = default;

  static Kernel lowly_y(double beta1, double beta2);
  static Kernel highly_y(VectorXd lengthscales, double sigma);
  static Kernel lowly_x(const std::array<double, 4>& alpha);
  static Kernel highly_x(VectorXd lengthscales, VectorXd phi, double sigma);
  static Kernel from_params(KernelVariant variant, Index input_dim,
                            const VectorXd& params);
  static Kernel from_log_params(KernelVariant variant, Index input_dim,
                                const VectorXd& log_params);
  static Index param_count(KernelVariant variant, Index input_dim);

  KernelVariant variant() const { return variant_; }
  // -1 for the isotropic (lowly) variants.
  Index input_dim() const { return input_dim_; }
  Index num_params() const { return params_.size(); }
  const VectorXd& params() const { return params_; }
  VectorXd log_params() const { return params_.array().log().matrix(); }

  double operator()(std::span<const double> xr, std::span<const double> xs,
                    bool same_index) const;
  // Value of the same-index term.
  double noise_variance() const;
  // d k(xr, xs) / d xr, written to `out` (size = input dimension).
  void grad_first(std::span<const double> xr, std::span<const double> xs,
                  std::span<double> out) const;
  // d k(xr, xs) / d ln(theta_p) for every raw parameter p.
  void grad_log_params(std::span<const double> xr, std::span<const double> xs,
                       bool same_index, std::span<double> out) const;

  // Throws a shape error if `dim` is not an admissible input dimension.
  void check_input_dim(Index dim) const;

 private:
  Kernel(KernelVariant variant, Index input_dim, VectorXd params);

  KernelVariant variant_ = KernelVariant::kLowlyY;
  Index input_dim_ = -1;
  VectorXd params_;
  VectorXd inv_sq_lengthscales_;
};

// Row i of `points` is the i-th input. Diagonal entries use same_index=true.
// Rows are distributed over OpenMP threads; each entry is computed by exactly
// one thread, so the result does not depend on the schedule.
MatrixXd gram_matrix(const MatrixXd& points, const Kernel& kernel);

// k(query_i, point_j) with same_index=false.
MatrixXd cross_covariance(const MatrixXd& queries, const MatrixXd& points,
                          const Kernel& kernel);
VectorXd cross_covariance(const VectorXd& query, const MatrixXd& points,
                          const Kernel& kernel);

struct KernelGradients {
  MatrixXd points;      // dL/d points, same shape as the inputs
  VectorXd log_params;  // dL/d ln theta
};

// Chains a symmetric sensitivity dL/dK through the Gram matrix of `points`.
KernelGradients contract_gram_gradient(const MatrixXd& points,
                                       const Kernel& kernel,
                                       const MatrixXd& dloss_dgram);

// Straight loop versions of the parallel kernels above; kept as the test and
// benchmark reference.
namespace serial {
MatrixXd gram_matrix(const MatrixXd& points, const Kernel& kernel);
KernelGradients contract_gram_gradient(const MatrixXd& points,
                                       const Kernel& kernel,
                                       const MatrixXd& dloss_dgram);
}  // namespace serial

}  // namespace cgpdm
