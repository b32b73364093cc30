#pragma once

// Observation model y = g(x) + noise: one GP per observation component, all
// sharing the latent kernel k_y and differing by a scaling w_{y,j}.

#include <Eigen/Core>

#include "cgpdm/kernels.hpp"

namespace cgpdm {

class CgpdmModel;

struct LatentMapParams {
  Kernel kernel;  // LowlyY or HighlyY
  VectorXd w;     // D scalings; fixed at 1 for the lowly variant

  ModelVariant variant() const;
  bool trains_scaling() const { return variant() == ModelVariant::kHighly; }
  // Number of entries in the log-parameter block (kernel, then w if trained).
  Index num_log_params() const;

  // Starting point: unit length-scales and scalings, sigma_y = 0.1,
  // (beta1, beta2) = (1, 10).
  static LatentMapParams initial(ModelVariant variant, Index latent_dim,
                                 Index observation_dim);

  void validate(Index latent_dim, Index observation_dim) const;
};

struct LatentMapPosterior {
  VectorXd mean;              // D
  double scalar_variance = 0; // v_y(x*), clamped at 0
  double raw_variance = 0;    // before clamping
  VectorXd per_dim_variance;  // v_y(x*) / w_{y,j}^2
};

struct LatentLikelihoodGradient {
  double value = 0.0;
  MatrixXd latent;            // dL/dX, N x d
  VectorXd kernel_log_params; // dL/d ln(kernel params)
  VectorXd log_w;             // dL/d ln w; empty for the lowly variant
  double jitter = 0.0;        // jitter added to K_y, if any
};

// L_y = (D/2) ln|K_y| + 1/2 tr(K_y^{-1} Y W^2 Y^T) - N ln|W|
double latent_neg_log_likelihood(const MatrixXd& latent,
                                 const MatrixXd& observations,
                                 const LatentMapParams& params);

LatentLikelihoodGradient latent_neg_log_likelihood_grad(
    const MatrixXd& latent, const MatrixXd& observations,
    const LatentMapParams& params);

// Posterior of y* given x*, using the factorization cached in the model.
LatentMapPosterior latent_predict(const VectorXd& x_star,
                                  const CgpdmModel& model);

}  // namespace cgpdm
