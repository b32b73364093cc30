#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

#include "cgpdm/lbfgs.hpp"
#include "cgpdm/model.hpp"

namespace cgpdm {

struct TrainConfig {
  Index latent_dim = 3;
  ModelVariant variant = ModelVariant::kHighly;
  int max_iters = 500;
  // L-BFGS iterations over the hyper-parameters alone, with the latent
  // coordinates held at their PCA initialization, before the joint phase.
  // Without it the latent-map term (D outputs against d for the dynamics)
  // dominates the first joint steps and bends X into shapes the dynamics GP
  // extrapolates unstably.
  int warmup_iters = 200;
  double grad_tol = 1e-4;
  int memory = 10;
  // Recorded with the model; training itself has no random component.
  std::uint64_t seed = 0;
  // Model Y minus its column mean (added back at prediction time).
  bool center_observations = true;

  void validate(Index observation_dim) const;
};

// Column-centers Y and returns the scores on the top-d principal directions
// (no whitening). Each direction is signed so that its largest-magnitude
// loading is positive.
MatrixXd pca_init(const MatrixXd& observations, Index latent_dim);

// Total training loss L_y + L_x over a flat state vector with layout
//   [ vec(X) row-major (N*d) | log theta_y | log theta_x ]
// log theta_y = [kernel params (Kernel order), ln w_y (highly only)]
// log theta_x = [kernel params (Kernel order), ln w_x (highly only)]
class CgpdmObjective {
 public:
  CgpdmObjective(ModelVariant variant, Index latent_dim,
                 MatrixXd observations, std::vector<MatrixXd> controls,
                 std::vector<Index> sequence_starts);

  Index size() const;
  Index latent_block_size() const { return rows_ * latent_dim_; }
  Index latent_param_count() const;
  Index dynamics_param_count() const;

  Eigen::VectorXd pack(const MatrixXd& latent, const LatentMapParams& lp,
                       const DynamicsParams& dp) const;
  void unpack(const Eigen::VectorXd& state, MatrixXd* latent,
              LatentMapParams* lp, DynamicsParams* dp) const;

  // +inf when a Gram matrix cannot be factorized at maximum jitter.
  double loss(const Eigen::VectorXd& state) const;
  double loss_and_gradient(const Eigen::VectorXd& state,
                           Eigen::VectorXd& grad) const;

  // Factorizations that needed jitter or failed, since construction.
  long jitter_events() const { return jitter_events_; }

  const MatrixXd& observations() const { return observations_; }
  const std::vector<MatrixXd>& controls() const { return controls_; }
  const std::vector<Index>& sequence_starts() const { return starts_; }

  // Observation columns whose scaling is trained (highly variant). A column
  // with no spread has an unbounded likelihood in its scaling, which stays 1.
  const std::vector<Index>& scaled_columns() const { return scaled_columns_; }

 private:
  ModelVariant variant_;
  Index latent_dim_;
  Index rows_;
  Index observation_dim_;
  Index control_dim_;
  MatrixXd observations_;
  std::vector<MatrixXd> controls_;
  std::vector<Index> starts_;
  std::vector<Index> scaled_columns_;
  mutable long jitter_events_ = 0;
};

using TrainLogCallback = std::function<void(const IterationRecord&)>;

// PCA initialization, default hyper-parameters, L-BFGS on the total loss.
CgpdmModel train(const std::vector<Trajectory>& dataset,
                 const TrainConfig& config,
                 const TrainLogCallback& on_iteration = {});

}  // namespace cgpdm
