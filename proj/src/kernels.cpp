#include "cgpdm/kernels.hpp"

#include <cmath>
#include <string>

#include "cgpdm/error.hpp"

namespace cgpdm {
namespace {

constexpr const char* kModule = "kernel-core";

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw Error(ErrorKind::kParameterDomain, kModule,
                std::string(name) + " must be positive and finite, got " +
                    std::to_string(value));
  }
}

void require_same_size(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kShape, kModule,
                "kernel inputs have different dimensions (" +
                    std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return sum;
}

double weighted_squared_distance(std::span<const double> a,
                                 std::span<const double> b,
                                 const double* inv_sq) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff * inv_sq[i];
  }
  return sum;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

std::span<const double> row_span(const RowMatrix& m, Index row) {
  return {m.data() + row * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

std::string_view to_string(ModelVariant variant) {
  return variant == ModelVariant::kLowly ? "lowly" : "highly";
}

ModelVariant parse_model_variant(std::string_view text) {
  if (text == "lowly") return ModelVariant::kLowly;
  if (text == "highly") return ModelVariant::kHighly;
  throw Error(ErrorKind::kVariant, kModule,
              "unknown model variant '" + std::string(text) + "'");
}

std::string_view to_string(KernelVariant variant) {
  switch (variant) {
    case KernelVariant::kLowlyY: return "lowly-y";
    case KernelVariant::kHighlyY: return "highly-y";
    case KernelVariant::kLowlyX: return "lowly-x";
    case KernelVariant::kHighlyX: return "highly-x";
  }
  return "unknown";
}

double kernel_y_lowly(std::span<const double> xr, std::span<const double> xs,
                      double beta1, double beta2, bool same_index) {
  require_positive(beta1, "beta1");
  require_positive(beta2, "beta2");
  require_same_size(xr, xs);
  return std::exp(-0.5 * beta1 * squared_distance(xr, xs)) +
         (same_index ? 1.0 / beta2 : 0.0);
}

double kernel_y_highly(std::span<const double> xr, std::span<const double> xs,
                       std::span<const double> lengthscales, double sigma,
                       bool same_index) {
  require_same_size(xr, xs);
  require_same_size(xr, lengthscales);
  require_positive(sigma, "sigma_y");
  double sum = 0.0;
  for (std::size_t i = 0; i < xr.size(); ++i) {
    require_positive(lengthscales[i], "lambda_y");
    const double diff = (xr[i] - xs[i]) / lengthscales[i];
    sum += diff * diff;
  }
  return std::exp(-sum) + (same_index ? sigma * sigma : 0.0);
}

double kernel_x_lowly(std::span<const double> xr, std::span<const double> xs,
                      const std::array<double, 4>& alpha, bool same_index) {
  for (double a : alpha) require_positive(a, "alpha");
  require_same_size(xr, xs);
  return alpha[0] * std::exp(-0.5 * alpha[1] * squared_distance(xr, xs)) +
         alpha[2] * dot(xr, xs) + (same_index ? 1.0 / alpha[3] : 0.0);
}

double kernel_x_highly(std::span<const double> xr, std::span<const double> xs,
                       std::span<const double> lengthscales,
                       std::span<const double> phi, double sigma,
                       bool same_index) {
  require_same_size(xr, xs);
  require_same_size(xr, lengthscales);
  if (phi.size() != xr.size() + 1) {
    throw Error(ErrorKind::kShape, kModule,
                "phi must have input dimension + 1 entries");
  }
  require_positive(sigma, "sigma_x");
  double sum = 0.0;
  double linear = 0.0;
  for (std::size_t i = 0; i < xr.size(); ++i) {
    require_positive(lengthscales[i], "lambda_x");
    require_positive(phi[i], "phi");
    const double diff = (xr[i] - xs[i]) / lengthscales[i];
    sum += diff * diff;
    linear += phi[i] * phi[i] * xr[i] * xs[i];
  }
  require_positive(phi.back(), "phi");
  linear += phi.back() * phi.back();
  return std::exp(-sum) + linear + (same_index ? sigma * sigma : 0.0);
}

Kernel::Kernel(KernelVariant variant, Index input_dim, VectorXd params)
    : variant_(variant), input_dim_(input_dim), params_(std::move(params)) {
  for (Index i = 0; i < params_.size(); ++i) {
    require_positive(params_[i], "kernel hyper-parameter");
  }
  if (variant_ == KernelVariant::kHighlyY ||
      variant_ == KernelVariant::kHighlyX) {
    inv_sq_lengthscales_ =
        params_.head(input_dim_).array().square().inverse().matrix();
  }
}

Kernel Kernel::lowly_y(double beta1, double beta2) {
  return Kernel(KernelVariant::kLowlyY, -1, VectorXd{{beta1, beta2}});
}

Kernel Kernel::highly_y(VectorXd lengthscales, double sigma) {
  const Index n = lengthscales.size();
  VectorXd params(n + 1);
  params << lengthscales, sigma;
  return Kernel(KernelVariant::kHighlyY, n, std::move(params));
}

Kernel Kernel::lowly_x(const std::array<double, 4>& alpha) {
  return Kernel(KernelVariant::kLowlyX, -1,
                VectorXd{{alpha[0], alpha[1], alpha[2], alpha[3]}});
}

Kernel Kernel::highly_x(VectorXd lengthscales, VectorXd phi, double sigma) {
  const Index n = lengthscales.size();
  if (phi.size() != n + 1) {
    throw Error(ErrorKind::kShape, kModule,
                "phi must have input dimension + 1 entries");
  }
  VectorXd params(2 * n + 2);
  params << lengthscales, phi, sigma;
  return Kernel(KernelVariant::kHighlyX, n, std::move(params));
}

Index Kernel::param_count(KernelVariant variant, Index input_dim) {
  switch (variant) {
    case KernelVariant::kLowlyY: return 2;
    case KernelVariant::kHighlyY: return input_dim + 1;
    case KernelVariant::kLowlyX: return 4;
    case KernelVariant::kHighlyX: return 2 * input_dim + 2;
  }
  return 0;
}

Kernel Kernel::from_params(KernelVariant variant, Index input_dim,
                           const VectorXd& params) {
  if (params.size() != param_count(variant, input_dim)) {
    throw Error(ErrorKind::kShape, kModule,
                "wrong hyper-parameter count for " +
                    std::string(to_string(variant)));
  }
  const bool isotropic = variant == KernelVariant::kLowlyY ||
                         variant == KernelVariant::kLowlyX;
  return Kernel(variant, isotropic ? -1 : input_dim, params);
}

Kernel Kernel::from_log_params(KernelVariant variant, Index input_dim,
                               const VectorXd& log_params) {
  return from_params(variant, input_dim, log_params.array().exp().matrix());
}

void Kernel::check_input_dim(Index dim) const {
  if (input_dim_ >= 0 && dim != input_dim_) {
    throw Error(ErrorKind::kShape, kModule,
                std::string(to_string(variant_)) + " kernel expects inputs of "
                "dimension " + std::to_string(input_dim_) + ", got " +
                    std::to_string(dim));
  }
}

double Kernel::noise_variance() const {
  switch (variant_) {
    case KernelVariant::kLowlyY: return 1.0 / params_[1];
    case KernelVariant::kLowlyX: return 1.0 / params_[3];
    case KernelVariant::kHighlyY:
    case KernelVariant::kHighlyX: {
      const double sigma = params_[params_.size() - 1];
      return sigma * sigma;
    }
  }
  return 0.0;
}

double Kernel::operator()(std::span<const double> xr,
                          std::span<const double> xs, bool same_index) const {
  const double noise = same_index ? noise_variance() : 0.0;
  switch (variant_) {
    case KernelVariant::kLowlyY:
      return std::exp(-0.5 * params_[0] * squared_distance(xr, xs)) + noise;
    case KernelVariant::kHighlyY:
      return std::exp(-weighted_squared_distance(
                 xr, xs, inv_sq_lengthscales_.data())) +
             noise;
    case KernelVariant::kLowlyX:
      return params_[0] *
                 std::exp(-0.5 * params_[1] * squared_distance(xr, xs)) +
             params_[2] * dot(xr, xs) + noise;
    case KernelVariant::kHighlyX: {
      const Index n = input_dim_;
      double linear = 0.0;
      for (Index i = 0; i < n; ++i) {
        const double phi = params_[n + i];
        linear += phi * phi * xr[i] * xs[i];
      }
      const double bias = params_[2 * n];
      linear += bias * bias;
      return std::exp(-weighted_squared_distance(
                 xr, xs, inv_sq_lengthscales_.data())) +
             linear + noise;
    }
  }
  return 0.0;
}

void Kernel::grad_first(std::span<const double> xr, std::span<const double> xs,
                        std::span<double> out) const {
  const std::size_t n = xr.size();
  switch (variant_) {
    case KernelVariant::kLowlyY: {
      const double beta1 = params_[0];
      const double se = std::exp(-0.5 * beta1 * squared_distance(xr, xs));
      for (std::size_t i = 0; i < n; ++i) out[i] = -beta1 * (xr[i] - xs[i]) * se;
      break;
    }
    case KernelVariant::kHighlyY: {
      const double* w = inv_sq_lengthscales_.data();
      const double se = std::exp(-weighted_squared_distance(xr, xs, w));
      for (std::size_t i = 0; i < n; ++i) {
        out[i] = -2.0 * (xr[i] - xs[i]) * w[i] * se;
      }
      break;
    }
    case KernelVariant::kLowlyX: {
      const double a1 = params_[0], a2 = params_[1], a3 = params_[2];
      const double se = a1 * std::exp(-0.5 * a2 * squared_distance(xr, xs));
      for (std::size_t i = 0; i < n; ++i) {
        out[i] = -a2 * (xr[i] - xs[i]) * se + a3 * xs[i];
      }
      break;
    }
    case KernelVariant::kHighlyX: {
      const double* w = inv_sq_lengthscales_.data();
      const double se = std::exp(-weighted_squared_distance(xr, xs, w));
      for (std::size_t i = 0; i < n; ++i) {
        const double phi = params_[static_cast<Index>(n + i)];
        out[i] = -2.0 * (xr[i] - xs[i]) * w[i] * se + phi * phi * xs[i];
      }
      break;
    }
  }
}

void Kernel::grad_log_params(std::span<const double> xr,
                             std::span<const double> xs, bool same_index,
                             std::span<double> out) const {
  switch (variant_) {
    case KernelVariant::kLowlyY: {
      const double beta1 = params_[0];
      const double r2 = squared_distance(xr, xs);
      out[0] = -0.5 * beta1 * r2 * std::exp(-0.5 * beta1 * r2);
      out[1] = same_index ? -1.0 / params_[1] : 0.0;
      break;
    }
    case KernelVariant::kHighlyY: {
      const Index n = input_dim_;
      const double* w = inv_sq_lengthscales_.data();
      const double se = std::exp(-weighted_squared_distance(xr, xs, w));
      for (Index i = 0; i < n; ++i) {
        const double diff = xr[i] - xs[i];
        out[i] = 2.0 * diff * diff * w[i] * se;
      }
      const double sigma = params_[n];
      out[n] = same_index ? 2.0 * sigma * sigma : 0.0;
      break;
    }
    case KernelVariant::kLowlyX: {
      const double a1 = params_[0], a2 = params_[1], a3 = params_[2];
      const double r2 = squared_distance(xr, xs);
      const double se = a1 * std::exp(-0.5 * a2 * r2);
      out[0] = se;
      out[1] = -0.5 * a2 * r2 * se;
      out[2] = a3 * dot(xr, xs);
      out[3] = same_index ? -1.0 / params_[3] : 0.0;
      break;
    }
    case KernelVariant::kHighlyX: {
      const Index n = input_dim_;
      const double* w = inv_sq_lengthscales_.data();
      const double se = std::exp(-weighted_squared_distance(xr, xs, w));
      for (Index i = 0; i < n; ++i) {
        const double diff = xr[i] - xs[i];
        out[i] = 2.0 * diff * diff * w[i] * se;
        const double phi = params_[n + i];
        out[n + i] = 2.0 * phi * phi * xr[i] * xs[i];
      }
      const double bias = params_[2 * n];
      out[2 * n] = 2.0 * bias * bias;
      const double sigma = params_[2 * n + 1];
      out[2 * n + 1] = same_index ? 2.0 * sigma * sigma : 0.0;
      break;
    }
  }
}

MatrixXd gram_matrix(const MatrixXd& points, const Kernel& kernel) {
  kernel.check_input_dim(points.cols());
  const RowMatrix rows = points;
  const Index m = rows.rows();
  MatrixXd gram(m, m);
#pragma omp parallel for schedule(dynamic, 16)
  for (Index i = 0; i < m; ++i) {
    const auto xi = row_span(rows, i);
    for (Index j = 0; j < i; ++j) {
      const double value = kernel(xi, row_span(rows, j), false);
      gram(i, j) = value;
      gram(j, i) = value;
    }
    gram(i, i) = kernel(xi, xi, true);
  }
  return gram;
}

MatrixXd cross_covariance(const MatrixXd& queries, const MatrixXd& points,
                          const Kernel& kernel) {
  if (queries.cols() != points.cols()) {
    throw Error(ErrorKind::kShape, kModule,
                "query and training inputs have different dimensions");
  }
  kernel.check_input_dim(points.cols());
  const RowMatrix q = queries;
  const RowMatrix p = points;
  MatrixXd out(q.rows(), p.rows());
#pragma omp parallel for schedule(static) if (q.rows() > 8)
  for (Index i = 0; i < q.rows(); ++i) {
    for (Index j = 0; j < p.rows(); ++j) {
      out(i, j) = kernel(row_span(q, i), row_span(p, j), false);
    }
  }
  return out;
}

VectorXd cross_covariance(const VectorXd& query, const MatrixXd& points,
                          const Kernel& kernel) {
  if (query.size() != points.cols()) {
    throw Error(ErrorKind::kShape, kModule,
                "query and training inputs have different dimensions");
  }
  kernel.check_input_dim(points.cols());
  const RowMatrix p = points;
  const std::span<const double> q(query.data(),
                                  static_cast<std::size_t>(query.size()));
  VectorXd out(p.rows());
  for (Index j = 0; j < p.rows(); ++j) out[j] = kernel(q, row_span(p, j), false);
  return out;
}

KernelGradients contract_gram_gradient(const MatrixXd& points,
                                       const Kernel& kernel,
                                       const MatrixXd& dloss_dgram) {
  kernel.check_input_dim(points.cols());
  const RowMatrix rows = points;
  const Index m = rows.rows();
  const Index dim = rows.cols();
  const Index num_params = kernel.num_params();
  if (dloss_dgram.rows() != m || dloss_dgram.cols() != m) {
    throw Error(ErrorKind::kShape, kModule,
                "sensitivity matrix does not match the number of points");
  }

  RowMatrix point_grad = RowMatrix::Zero(m, dim);
  // Per-row partial sums, reduced below in row order so the total is
  // independent of the thread schedule.
  RowMatrix param_partial = RowMatrix::Zero(m, num_params);

#pragma omp parallel
  {
    VectorXd first(dim);
    VectorXd dparams(num_params);
    const std::span<double> first_span(first.data(),
                                       static_cast<std::size_t>(dim));
    const std::span<double> dparams_span(
        dparams.data(), static_cast<std::size_t>(num_params));
#pragma omp for schedule(dynamic, 16)
    for (Index i = 0; i < m; ++i) {
      const auto xi = row_span(rows, i);
      double* grad_row = point_grad.data() + i * dim;
      double* param_row = param_partial.data() + i * num_params;
      for (Index j = 0; j < m; ++j) {
        const double g = dloss_dgram(j, i);
        if (g == 0.0) continue;
        const auto xj = row_span(rows, j);
        kernel.grad_first(xi, xj, first_span);
        for (Index k = 0; k < dim; ++k) grad_row[k] += 2.0 * g * first[k];
        kernel.grad_log_params(xi, xj, i == j, dparams_span);
        for (Index p = 0; p < num_params; ++p) param_row[p] += g * dparams[p];
      }
    }
  }

  KernelGradients out;
  out.points = point_grad;
  out.log_params = VectorXd::Zero(num_params);
  for (Index i = 0; i < m; ++i) out.log_params += param_partial.row(i).transpose();
  return out;
}

namespace serial {

MatrixXd gram_matrix(const MatrixXd& points, const Kernel& kernel) {
  kernel.check_input_dim(points.cols());
  const Index m = points.rows();
  MatrixXd gram(m, m);
  for (Index i = 0; i < m; ++i) {
    const VectorXd xi = points.row(i).transpose();
    for (Index j = 0; j < m; ++j) {
      const VectorXd xj = points.row(j).transpose();
      gram(i, j) = kernel({xi.data(), static_cast<std::size_t>(xi.size())},
                          {xj.data(), static_cast<std::size_t>(xj.size())},
                          i == j);
    }
  }
  return gram;
}

KernelGradients contract_gram_gradient(const MatrixXd& points,
                                       const Kernel& kernel,
                                       const MatrixXd& dloss_dgram) {
  kernel.check_input_dim(points.cols());
  const Index m = points.rows();
  const Index dim = points.cols();
  KernelGradients out;
  out.points = MatrixXd::Zero(m, dim);
  out.log_params = VectorXd::Zero(kernel.num_params());
  VectorXd first(dim);
  VectorXd second(dim);
  VectorXd dparams(kernel.num_params());
  for (Index i = 0; i < m; ++i) {
    const VectorXd xi = points.row(i).transpose();
    const std::span<const double> si(xi.data(), static_cast<std::size_t>(dim));
    for (Index j = 0; j < m; ++j) {
      const VectorXd xj = points.row(j).transpose();
      const std::span<const double> sj(xj.data(), static_cast<std::size_t>(dim));
      const double g = dloss_dgram(i, j);
      // K_ij depends on x_i through its first argument and x_j through its
      // second; the second-argument derivative is the first-argument
      // derivative with the arguments swapped.
      kernel.grad_first(si, sj, {first.data(), static_cast<std::size_t>(first.size())});
      kernel.grad_first(sj, si, {second.data(), static_cast<std::size_t>(second.size())});
      out.points.row(i) += g * first.transpose();
      out.points.row(j) += g * second.transpose();
      kernel.grad_log_params(si, sj, i == j, {dparams.data(), static_cast<std::size_t>(dparams.size())});
      out.log_params += g * dparams;
    }
  }
  return out;
}

}  // namespace serial
}  // namespace cgpdm
