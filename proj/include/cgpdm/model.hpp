#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cgpdm/dynamics_map.hpp"
#include "cgpdm/latent_map.hpp"
#include "cgpdm/psd.hpp"

namespace cgpdm {

// One recorded episode: N observations and N - 1 controls, where control t
// drives observation t to t + 1.
struct Trajectory {
  MatrixXd observations;  // N x D, meters
  MatrixXd controls;      // (N - 1) x E, meters
  double dt = 0.05;
  std::map<std::string, std::string> metadata;

  Index length() const { return observations.rows(); }
  void validate() const;
};

enum class TrainStatus { kNotRun, kConverged, kMaxIterations, kLineSearchFailed };

std::string_view to_string(TrainStatus status);
TrainStatus parse_train_status(std::string_view text);

struct IterationRecord {
  int iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;  // infinity norm
  double step = 0.0;
  int evaluations = 0;
  long jitter_events = 0;  // cumulative
};

struct TrainingInfo {
  TrainStatus status = TrainStatus::kNotRun;
  int warmup_iterations = 0;  // hyper-parameter-only phase
  int iterations = 0;         // joint phase
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double final_grad_norm = 0.0;
  long jitter_events = 0;
  std::uint64_t seed = 0;
  std::vector<IterationRecord> trace;
};

// Trained CGPDM. Immutable once constructed; the cached factorizations are
// recomputed from the stored latent coordinates and hyper-parameters, so a
// model rebuilt from the same inputs is bit-identical.
class CgpdmModel {
 public:
  CgpdmModel() = default;

  // `observations` are the raw stacked observations; the GP models
  // observations - observation_offset (a zero offset disables centering).
  CgpdmModel(MatrixXd latent, MatrixXd observations, VectorXd observation_offset,
             std::vector<MatrixXd> controls, std::vector<Index> sequence_starts,
             LatentMapParams latent_params, DynamicsParams dynamics_params,
             TrainingInfo info = {});

  bool is_trained() const { return trained_; }
  // Throws kState when the model has not been built.
  void require_trained() const;

  ModelVariant variant() const { return latent_params_.variant(); }
  Index latent_dim() const { return latent_.cols(); }
  Index observation_dim() const { return observations_.cols(); }
  Index control_dim() const { return control_dim_; }

  const MatrixXd& latent() const { return latent_; }
  const MatrixXd& observations() const { return observations_; }
  const MatrixXd& centered_observations() const { return centered_; }
  const VectorXd& observation_offset() const { return offset_; }
  const std::vector<MatrixXd>& controls() const { return controls_; }
  const std::vector<Index>& sequence_starts() const { return starts_; }
  const LatentMapParams& latent_params() const { return latent_params_; }
  const DynamicsParams& dynamics_params() const { return dynamics_params_; }
  const DynamicsDataset& dynamics_data() const { return dynamics_data_; }
  const TrainingInfo& training_info() const { return info_; }

  const PsdFactorization& latent_factor() const { return latent_factor_; }
  const PsdFactorization& dynamics_factor() const { return dynamics_factor_; }
  // K_y^{-1} (Y - offset) and K_x^{-1} Delta.
  const MatrixXd& latent_weights() const { return latent_weights_; }
  const MatrixXd& dynamics_weights() const { return dynamics_weights_; }

  // FNV-1a over the training observations and controls.
  std::uint64_t data_hash() const;

 private:
  bool trained_ = false;
  MatrixXd latent_;
  MatrixXd observations_;
  MatrixXd centered_;
  VectorXd offset_;
  std::vector<MatrixXd> controls_;
  std::vector<Index> starts_;
  Index control_dim_ = 0;
  LatentMapParams latent_params_;
  DynamicsParams dynamics_params_;
  DynamicsDataset dynamics_data_;
  TrainingInfo info_;
  PsdFactorization latent_factor_;
  PsdFactorization dynamics_factor_;
  MatrixXd latent_weights_;
  MatrixXd dynamics_weights_;
};

std::uint64_t hash_training_data(const MatrixXd& observations,
                                 const std::vector<MatrixXd>& controls);

}  // namespace cgpdm
