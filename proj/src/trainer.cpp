#include "cgpdm/trainer.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <string>

#include "cgpdm/error.hpp"

namespace cgpdm {
namespace {

constexpr const char* kModule = "trainer";

// Columns within this fraction of the largest entry count as constant.
constexpr double kFlatColumnTol = 1e-12;

KernelVariant latent_kernel_variant(ModelVariant v) {
  return v == ModelVariant::kHighly ? KernelVariant::kHighlyY
                                    : KernelVariant::kLowlyY;
}

KernelVariant dynamics_kernel_variant(ModelVariant v) {
  return v == ModelVariant::kHighly ? KernelVariant::kHighlyX
                                    : KernelVariant::kLowlyX;
}

TrainStatus to_train_status(LbfgsStatus s) {
  switch (s) {
    case LbfgsStatus::kConverged: return TrainStatus::kConverged;
    case LbfgsStatus::kMaxIterations: return TrainStatus::kMaxIterations;
    case LbfgsStatus::kLineSearchFailed: return TrainStatus::kLineSearchFailed;
  }
  return TrainStatus::kNotRun;
}

}  // namespace

void TrainConfig::validate(Index observation_dim) const {
  if (latent_dim < 1 || latent_dim >= observation_dim) {
    throw Error(ErrorKind::kInput, kModule,
                "latent dimension must satisfy 1 <= d < D (d=" +
                    std::to_string(latent_dim) +
                    ", D=" + std::to_string(observation_dim) + ")");
  }
  if (max_iters < 1) {
    throw Error(ErrorKind::kInput, kModule, "max_iters must be at least 1");
  }
  if (warmup_iters < 0) {
    throw Error(ErrorKind::kInput, kModule, "warmup_iters must be non-negative");
  }
  if (memory < 1 || !(grad_tol >= 0.0)) {
    throw Error(ErrorKind::kInput, kModule,
                "L-BFGS memory must be >= 1 and grad_tol >= 0");
  }
}

MatrixXd pca_init(const MatrixXd& observations, Index latent_dim) {
  const Index n = observations.rows();
  const Index dim = observations.cols();
  if (n < 2) {
    throw Error(ErrorKind::kInput, kModule, "PCA needs at least two observations");
  }
  if (latent_dim < 1 || latent_dim > std::min(n, dim)) {
    throw Error(ErrorKind::kRankDeficient, kModule,
                "cannot extract " + std::to_string(latent_dim) +
                    " principal components from a " + std::to_string(n) + "x" +
                    std::to_string(dim) + " matrix");
  }
  const MatrixXd centered =
      observations.rowwise() - observations.colwise().mean();
  Eigen::JacobiSVD<MatrixXd> svd(centered, Eigen::ComputeThinV);
  MatrixXd directions = svd.matrixV().leftCols(latent_dim);
  for (Index c = 0; c < latent_dim; ++c) {
    Index pivot = 0;
    directions.col(c).cwiseAbs().maxCoeff(&pivot);
    if (directions(pivot, c) < 0.0) directions.col(c) *= -1.0;
  }
  return centered * directions;
}

CgpdmObjective::CgpdmObjective(ModelVariant variant, Index latent_dim,
                               MatrixXd observations,
                               std::vector<MatrixXd> controls,
                               std::vector<Index> sequence_starts)
    : variant_(variant),
      latent_dim_(latent_dim),
      rows_(observations.rows()),
      observation_dim_(observations.cols()),
      control_dim_(controls.empty() ? 0 : controls.front().cols()),
      observations_(std::move(observations)),
      controls_(std::move(controls)),
      starts_(std::move(sequence_starts)) {
  sequence_lengths(starts_, rows_);  // validates the boundaries
  if (variant_ == ModelVariant::kHighly) {
    const double scale =
        observations_.size() > 0 ? observations_.cwiseAbs().maxCoeff() : 0.0;
    for (Index j = 0; j < observation_dim_; ++j) {
      if (observations_.col(j).cwiseAbs().maxCoeff() > kFlatColumnTol * scale) {
        scaled_columns_.push_back(j);
      }
    }
  }
}

Index CgpdmObjective::latent_param_count() const {
  return Kernel::param_count(latent_kernel_variant(variant_), latent_dim_) +
         static_cast<Index>(scaled_columns_.size());
}

Index CgpdmObjective::dynamics_param_count() const {
  return Kernel::param_count(dynamics_kernel_variant(variant_),
                             latent_dim_ + control_dim_) +
         (variant_ == ModelVariant::kHighly ? latent_dim_ : 0);
}

Index CgpdmObjective::size() const {
  return latent_block_size() + latent_param_count() + dynamics_param_count();
}

Eigen::VectorXd CgpdmObjective::pack(const MatrixXd& latent,
                                     const LatentMapParams& lp,
                                     const DynamicsParams& dp) const {
  if (latent.rows() != rows_ || latent.cols() != latent_dim_ ||
      lp.variant() != variant_ || dp.variant() != variant_) {
    throw Error(ErrorKind::kShape, kModule,
                "state does not match the objective layout");
  }
  Eigen::VectorXd state(size());
  Index pos = 0;
  for (Index i = 0; i < rows_; ++i) {
    for (Index k = 0; k < latent_dim_; ++k) state[pos++] = latent(i, k);
  }
  const auto put = [&](const Eigen::VectorXd& v) {
    state.segment(pos, v.size()) = v;
    pos += v.size();
  };
  put(lp.kernel.log_params());
  for (Index j : scaled_columns_) state[pos++] = std::log(lp.w[j]);
  put(dp.kernel.log_params());
  if (dp.trains_scaling()) put(dp.w.array().log().matrix());
  return state;
}

void CgpdmObjective::unpack(const Eigen::VectorXd& state, MatrixXd* latent,
                            LatentMapParams* lp, DynamicsParams* dp) const {
  if (state.size() != size()) {
    throw Error(ErrorKind::kShape, kModule, "state vector has the wrong size");
  }
  latent->resize(rows_, latent_dim_);
  Index pos = 0;
  for (Index i = 0; i < rows_; ++i) {
    for (Index k = 0; k < latent_dim_; ++k) (*latent)(i, k) = state[pos++];
  }
  const bool highly = variant_ == ModelVariant::kHighly;

  const KernelVariant ly = latent_kernel_variant(variant_);
  const Index ly_count = Kernel::param_count(ly, latent_dim_);
  lp->kernel = Kernel::from_log_params(ly, latent_dim_, state.segment(pos, ly_count));
  pos += ly_count;
  lp->w = Eigen::VectorXd::Ones(observation_dim_);
  for (Index j : scaled_columns_) lp->w[j] = std::exp(state[pos++]);

  const KernelVariant dx = dynamics_kernel_variant(variant_);
  const Index in_dim = latent_dim_ + control_dim_;
  const Index dx_count = Kernel::param_count(dx, in_dim);
  dp->kernel = Kernel::from_log_params(dx, in_dim, state.segment(pos, dx_count));
  pos += dx_count;
  if (highly) {
    dp->w = state.segment(pos, latent_dim_).array().exp().matrix();
    pos += latent_dim_;
  } else {
    dp->w = Eigen::VectorXd::Ones(latent_dim_);
  }
}

double CgpdmObjective::loss(const Eigen::VectorXd& state) const {
  MatrixXd latent;
  LatentMapParams lp;
  DynamicsParams dp;
  try {
    unpack(state, &latent, &lp, &dp);
    const double ly = latent_neg_log_likelihood(latent, observations_, lp);
    const DynamicsDataset data = build_dynamics_inputs(latent, controls_, starts_);
    return ly + dynamics_neg_log_likelihood(data, dp);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNotPositiveDefinite &&
        e.kind() != ErrorKind::kParameterDomain) {
      throw;
    }
    ++jitter_events_;
    return std::numeric_limits<double>::infinity();
  }
}

double CgpdmObjective::loss_and_gradient(const Eigen::VectorXd& state,
                                         Eigen::VectorXd& grad) const {
  grad.setZero(size());
  MatrixXd latent;
  LatentMapParams lp;
  DynamicsParams dp;
  try {
    unpack(state, &latent, &lp, &dp);
    const LatentLikelihoodGradient gy =
        latent_neg_log_likelihood_grad(latent, observations_, lp);
    const DynamicsDataset data = build_dynamics_inputs(latent, controls_, starts_);
    const DynamicsLikelihoodGradient gx =
        dynamics_neg_log_likelihood_grad(data, dp, rows_);
    if (gy.jitter > 0.0) ++jitter_events_;
    if (gx.jitter > 0.0) ++jitter_events_;

    Index pos = 0;
    const MatrixXd dlatent = gy.latent + gx.latent;
    for (Index i = 0; i < rows_; ++i) {
      for (Index k = 0; k < latent_dim_; ++k) grad[pos++] = dlatent(i, k);
    }
    const auto put = [&](const Eigen::VectorXd& v) {
      grad.segment(pos, v.size()) = v;
      pos += v.size();
    };
    put(gy.kernel_log_params);
    for (Index j : scaled_columns_) grad[pos++] = gy.log_w[j];
    put(gx.kernel_log_params);
    if (dp.trains_scaling()) put(gx.log_w);
    return gy.value + gx.value;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNotPositiveDefinite &&
        e.kind() != ErrorKind::kParameterDomain) {
      throw;
    }
    ++jitter_events_;
    return std::numeric_limits<double>::infinity();
  }
}

CgpdmModel train(const std::vector<Trajectory>& dataset,
                 const TrainConfig& config,
                 const TrainLogCallback& on_iteration) {
  if (dataset.empty()) {
    throw Error(ErrorKind::kInput, kModule, "training needs at least one trajectory");
  }
  const Index obs_dim = dataset.front().observations.cols();
  const Index ctrl_dim = dataset.front().controls.cols();
  config.validate(obs_dim);

  Index total = 0;
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    const Trajectory& traj = dataset[s];
    traj.validate();
    if (traj.length() < 2) {
      throw Error(ErrorKind::kInput, kModule,
                  "trajectory " + std::to_string(s) + " has fewer than 2 steps");
    }
    if (traj.observations.cols() != obs_dim || traj.controls.cols() != ctrl_dim) {
      throw Error(ErrorKind::kShape, kModule,
                  "trajectory " + std::to_string(s) +
                      " has a different observation or control dimension");
    }
    total += traj.length();
  }

  MatrixXd observations(total, obs_dim);
  std::vector<MatrixXd> controls;
  std::vector<Index> starts;
  Index row = 0;
  for (const Trajectory& traj : dataset) {
    starts.push_back(row);
    observations.middleRows(row, traj.length()) = traj.observations;
    controls.push_back(traj.controls);
    row += traj.length();
  }

  const VectorXd offset = config.center_observations
                              ? VectorXd(observations.colwise().mean().transpose())
                              : VectorXd::Zero(obs_dim);
  const MatrixXd centered = observations.rowwise() - offset.transpose();

  const MatrixXd latent0 = pca_init(observations, config.latent_dim);
  const LatentMapParams lp0 =
      LatentMapParams::initial(config.variant, config.latent_dim, obs_dim);
  const DynamicsParams dp0 =
      DynamicsParams::initial(config.variant, config.latent_dim, ctrl_dim);

  const CgpdmObjective objective(config.variant, config.latent_dim, centered,
                                 controls, starts);
  const Eigen::VectorXd state0 = objective.pack(latent0, lp0, dp0);

  LbfgsOptions options;
  options.grad_tol = config.grad_tol;
  options.memory = config.memory;

  TrainingInfo info;
  info.seed = config.seed;
  int offset_iter = 0;
  bool skip_start = false;
  const auto record = [&](const LbfgsIteration& it) {
    // The joint phase starts where the warm-up stopped; its start point is
    // already in the trace.
    if (skip_start && it.iteration == 0) return;
    IterationRecord rec{offset_iter + it.iteration, it.loss, it.grad_norm, it.step,
                        it.evaluations, objective.jitter_events()};
    info.trace.push_back(rec);
    if (on_iteration) on_iteration(rec);
  };

  Eigen::VectorXd start = state0;
  const Index fixed = objective.latent_block_size();
  if (config.warmup_iters > 0) {
    options.max_iters = config.warmup_iters;
    Eigen::VectorXd full = state0;
    Eigen::VectorXd full_grad;
    const LbfgsResult warm = lbfgs_minimize(
        [&](const Eigen::VectorXd& hyper, Eigen::VectorXd& g) {
          full.tail(hyper.size()) = hyper;
          const double value = objective.loss_and_gradient(full, full_grad);
          g = full_grad.tail(hyper.size());
          return value;
        },
        state0.tail(state0.size() - fixed), options, record);
    start.tail(state0.size() - fixed) = warm.x;
    offset_iter = warm.iterations;
    skip_start = true;
    info.warmup_iterations = warm.iterations;
  }

  options.max_iters = config.max_iters;
  const LbfgsResult result = lbfgs_minimize(
      [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        return objective.loss_and_gradient(x, g);
      },
      start, options, record);

  info.status = to_train_status(result.status);
  info.iterations = result.iterations;
  info.initial_loss = info.trace.front().loss;
  info.final_loss = result.loss;
  info.final_grad_norm = result.grad_norm;
  info.jitter_events = objective.jitter_events();

  MatrixXd latent;
  LatentMapParams lp;
  DynamicsParams dp;
  objective.unpack(result.x, &latent, &lp, &dp);
  return CgpdmModel(std::move(latent), std::move(observations), offset,
                    std::move(controls), std::move(starts), std::move(lp),
                    std::move(dp), std::move(info));
}

}  // namespace cgpdm
