#include "cgpdm/model.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "cgpdm/error.hpp"

namespace cgpdm {
namespace {

constexpr const char* kModule = "trainer";

void fnv1a(std::uint64_t* hash, const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    *hash ^= p[i];
    *hash *= 0x100000001b3ULL;
  }
}

void hash_matrix(std::uint64_t* hash, const MatrixXd& m) {
  const std::int64_t shape[2] = {m.rows(), m.cols()};
  fnv1a(hash, shape, sizeof(shape));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      fnv1a(hash, &v, sizeof(v));
    }
  }
}

}  // namespace

void Trajectory::validate() const {
  const Index n = observations.rows();
  if (n < 1) {
    throw Error(ErrorKind::kShape, "datastore", "trajectory has no observations");
  }
  if (controls.rows() != n - 1) {
    throw Error(ErrorKind::kShape, "datastore",
                "trajectory has " + std::to_string(n) + " observations but " +
                    std::to_string(controls.rows()) + " controls (expected " +
                    std::to_string(n - 1) + ")");
  }
  if (!observations.allFinite() || !controls.allFinite()) {
    throw Error(ErrorKind::kInput, "datastore", "trajectory contains non-finite values");
  }
}

std::string_view to_string(TrainStatus status) {
  switch (status) {
    case TrainStatus::kNotRun: return "not-run";
    case TrainStatus::kConverged: return "converged";
    case TrainStatus::kMaxIterations: return "max-iterations";
    case TrainStatus::kLineSearchFailed: return "line-search-failed";
  }
  return "unknown";
}

TrainStatus parse_train_status(std::string_view text) {
  for (auto s : {TrainStatus::kNotRun, TrainStatus::kConverged,
                 TrainStatus::kMaxIterations, TrainStatus::kLineSearchFailed}) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorKind::kSchema, "datastore",
              "unknown training status '" + std::string(text) + "'");
}

std::uint64_t hash_training_data(const MatrixXd& observations,
                                 const std::vector<MatrixXd>& controls) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  hash_matrix(&hash, observations);
  for (const auto& u : controls) hash_matrix(&hash, u);
  return hash;
}

CgpdmModel::CgpdmModel(MatrixXd latent, MatrixXd observations,
                       VectorXd observation_offset,
                       std::vector<MatrixXd> controls,
                       std::vector<Index> sequence_starts,
                       LatentMapParams latent_params,
                       DynamicsParams dynamics_params, TrainingInfo info)
    : latent_(std::move(latent)),
      observations_(std::move(observations)),
      offset_(std::move(observation_offset)),
      controls_(std::move(controls)),
      starts_(std::move(sequence_starts)),
      latent_params_(std::move(latent_params)),
      dynamics_params_(std::move(dynamics_params)),
      info_(std::move(info)) {
  if (latent_.rows() != observations_.rows()) {
    throw Error(ErrorKind::kShape, kModule,
                "latent and observation row counts differ");
  }
  if (offset_.size() != observations_.cols()) {
    throw Error(ErrorKind::kShape, kModule,
                "observation offset has the wrong dimension");
  }
  if (latent_params_.variant() != dynamics_params_.variant()) {
    throw Error(ErrorKind::kVariant, kModule,
                "latent and dynamics parameters belong to different variants");
  }
  control_dim_ = controls_.empty() ? 0 : controls_.front().cols();
  latent_params_.validate(latent_.cols(), observations_.cols());
  dynamics_params_.validate(latent_.cols(), control_dim_);

  centered_ = observations_.rowwise() - offset_.transpose();
  dynamics_data_ = build_dynamics_inputs(latent_, controls_, starts_);
  if (dynamics_data_.size() < 1) {
    throw Error(ErrorKind::kShape, kModule,
                "model needs at least one transition");
  }

  latent_factor_ = factorize_psd(gram_matrix(latent_, latent_params_.kernel));
  latent_weights_ = latent_factor_.solve(centered_);
  dynamics_factor_ =
      factorize_psd(gram_matrix(dynamics_data_.inputs, dynamics_params_.kernel));
  dynamics_weights_ = dynamics_factor_.solve(dynamics_data_.increments);
  trained_ = true;
}

void CgpdmModel::require_trained() const {
  if (!trained_) {
    throw Error(ErrorKind::kState, kModule, "model has not been trained");
  }
}

std::uint64_t CgpdmModel::data_hash() const {
  return hash_training_data(observations_, controls_);
}

}  // namespace cgpdm
