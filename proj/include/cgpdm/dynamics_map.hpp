#pragma once

// Controlled latent dynamics x_{t+1} - x_t = h(x_t, u_t) + noise.

#include <Eigen/Core>
#include <vector>

#include "cgpdm/kernels.hpp"

namespace cgpdm {

class CgpdmModel;

struct DynamicsParams {
  Kernel kernel;  // LowlyX or HighlyX
  VectorXd w;     // d scalings; fixed at 1 for the lowly variant

  ModelVariant variant() const;
  bool trains_scaling() const { return variant() == ModelVariant::kHighly; }
  Index num_log_params() const;

  // Unit length-scales, scalings and phi; sigma_x = 0.1;
  // alpha = (1, 1, 1, 10).
  static DynamicsParams initial(ModelVariant variant, Index latent_dim,
                                Index control_dim);

  void validate(Index latent_dim, Index control_dim) const;
};

struct StepSource {
  Index sequence = 0;
  Index step = 0;        // position of x_t inside its sequence
  Index latent_row = 0;  // row of x_t in the stacked latent matrix
};

// Training pairs of the dynamics GP: inputs [x_t; u_t] and targets
// x_{t+1} - x_t, never crossing a sequence boundary.
struct DynamicsDataset {
  MatrixXd inputs;      // M x (d + E)
  MatrixXd increments;  // M x d
  std::vector<StepSource> sources;

  Index size() const { return inputs.rows(); }
};

// `sequence_starts` holds the first stacked row of every sequence (strictly
// increasing, starting at 0). Sequence s has N_s latent rows and must come
// with N_s - 1 control rows.
DynamicsDataset build_dynamics_inputs(const MatrixXd& latent,
                                      const std::vector<MatrixXd>& controls,
                                      const std::vector<Index>& sequence_starts);

// Length of every sequence implied by the start list and the total row count.
std::vector<Index> sequence_lengths(const std::vector<Index>& sequence_starts,
                                    Index total_rows);

// L_x = (d/2) ln|K_x| + 1/2 tr(K_x^{-1} Delta W^2 Delta^T) - M ln|W|
double dynamics_neg_log_likelihood(const DynamicsDataset& dataset,
                                   const DynamicsParams& params);

struct DynamicsLikelihoodGradient {
  double value = 0.0;
  MatrixXd latent;             // dL/dX over all stacked latent rows
  VectorXd kernel_log_params;
  VectorXd log_w;              // empty for the lowly variant
  double jitter = 0.0;
};

// Gradient w.r.t. the latent rows accumulates three paths: x_t inside the
// input [x_t; u_t], and x_t as subtrahend / x_{t+1} as minuend of the target.
DynamicsLikelihoodGradient dynamics_neg_log_likelihood_grad(
    const DynamicsDataset& dataset, const DynamicsParams& params,
    Index latent_rows);

struct DynamicsPosterior {
  VectorXd mean;               // x* + predicted increment
  double scalar_variance = 0;  // v_x, clamped at 0
  double raw_variance = 0;
  VectorXd per_dim_variance;   // v_x / w_{x,i}^2
};

DynamicsPosterior dynamics_predict(const VectorXd& x_star,
                                   const VectorXd& u_star,
                                   const CgpdmModel& model);

}  // namespace cgpdm
