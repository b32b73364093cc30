#include "cgpdm/dynamics_map.hpp"

#include <algorithm>
#include <string>

#include "cgpdm/error.hpp"
#include "cgpdm/model.hpp"
#include "scaled_gp.hpp"

namespace cgpdm {
namespace {

constexpr const char* kModule = "dynamics-map";

}  // namespace

ModelVariant DynamicsParams::variant() const {
  return kernel.variant() == KernelVariant::kHighlyX ? ModelVariant::kHighly
                                                     : ModelVariant::kLowly;
}

Index DynamicsParams::num_log_params() const {
  return kernel.num_params() + (trains_scaling() ? w.size() : 0);
}

DynamicsParams DynamicsParams::initial(ModelVariant variant, Index latent_dim,
                                       Index control_dim) {
  DynamicsParams p;
  const Index n = latent_dim + control_dim;
  if (variant == ModelVariant::kHighly) {
    p.kernel = Kernel::highly_x(VectorXd::Ones(n), VectorXd::Ones(n + 1), 0.1);
  } else {
    p.kernel = Kernel::lowly_x({1.0, 1.0, 1.0, 10.0});
  }
  p.w = VectorXd::Ones(latent_dim);
  return p;
}

void DynamicsParams::validate(Index latent_dim, Index control_dim) const {
  if (kernel.variant() != KernelVariant::kLowlyX &&
      kernel.variant() != KernelVariant::kHighlyX) {
    throw Error(ErrorKind::kVariant, kModule,
                "dynamics map needs an X-family kernel");
  }
  kernel.check_input_dim(latent_dim + control_dim);
  if (w.size() != latent_dim) {
    throw Error(ErrorKind::kShape, kModule,
                "scaling vector has " + std::to_string(w.size()) +
                    " entries, expected " + std::to_string(latent_dim));
  }
  if (!(w.array() > 0.0).all() || !w.allFinite()) {
    throw Error(ErrorKind::kParameterDomain, kModule,
                "scaling factors must be positive");
  }
  if (!trains_scaling() && !(w.array() == 1.0).all()) {
    throw Error(ErrorKind::kParameterDomain, kModule,
                "lowly variant requires unit scaling factors");
  }
}

std::vector<Index> sequence_lengths(const std::vector<Index>& sequence_starts,
                                    Index total_rows) {
  if (sequence_starts.empty() || sequence_starts.front() != 0) {
    throw Error(ErrorKind::kShape, kModule,
                "sequence boundaries must start at row 0");
  }
  std::vector<Index> lengths(sequence_starts.size());
  for (std::size_t s = 0; s < sequence_starts.size(); ++s) {
    const Index end = s + 1 < sequence_starts.size() ? sequence_starts[s + 1]
                                                     : total_rows;
    if (end <= sequence_starts[s]) {
      throw Error(ErrorKind::kShape, kModule,
                  "sequence boundaries must be strictly increasing and inside "
                  "the stacked rows");
    }
    lengths[s] = end - sequence_starts[s];
  }
  return lengths;
}

DynamicsDataset build_dynamics_inputs(const MatrixXd& latent,
                                      const std::vector<MatrixXd>& controls,
                                      const std::vector<Index>& sequence_starts) {
  const std::vector<Index> lengths =
      sequence_lengths(sequence_starts, latent.rows());
  if (controls.size() != lengths.size()) {
    throw Error(ErrorKind::kShape, kModule,
                std::to_string(lengths.size()) + " sequences but " +
                    std::to_string(controls.size()) + " control blocks");
  }
  const Index d = latent.cols();
  Index control_dim = -1;
  Index rows = 0;
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    if (controls[s].rows() != lengths[s] - 1) {
      throw Error(ErrorKind::kShape, kModule,
                  "sequence " + std::to_string(s) + " has " +
                      std::to_string(lengths[s]) + " states but " +
                      std::to_string(controls[s].rows()) + " controls");
    }
    if (controls[s].rows() > 0) {
      if (control_dim < 0) control_dim = controls[s].cols();
      if (controls[s].cols() != control_dim) {
        throw Error(ErrorKind::kShape, kModule,
                    "control dimension differs between sequences");
      }
    }
    rows += lengths[s] - 1;
  }
  if (control_dim < 0) {
    control_dim = controls.empty() ? 0 : controls.front().cols();
  }

  DynamicsDataset out;
  out.inputs.resize(rows, d + control_dim);
  out.increments.resize(rows, d);
  out.sources.reserve(static_cast<std::size_t>(rows));
  Index m = 0;
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    const Index start = sequence_starts[s];
    for (Index t = 0; t + 1 < lengths[s]; ++t, ++m) {
      const Index row = start + t;
      out.inputs.row(m).head(d) = latent.row(row);
      out.inputs.row(m).tail(control_dim) = controls[s].row(t);
      out.increments.row(m) = latent.row(row + 1) - latent.row(row);
      out.sources.push_back({static_cast<Index>(s), t, row});
    }
  }
  return out;
}

double dynamics_neg_log_likelihood(const DynamicsDataset& dataset,
                                   const DynamicsParams& params) {
  if (dataset.size() < 1) {
    throw Error(ErrorKind::kShape, kModule, "dynamics dataset is empty");
  }
  const Index d = dataset.increments.cols();
  params.validate(d, dataset.inputs.cols() - d);
  const PsdFactorization factor =
      factorize_psd(gram_matrix(dataset.inputs, params.kernel));
  return detail::scaled_gp_value(factor, dataset.increments, params.w);
}

DynamicsLikelihoodGradient dynamics_neg_log_likelihood_grad(
    const DynamicsDataset& dataset, const DynamicsParams& params,
    Index latent_rows) {
  if (dataset.size() < 1) {
    throw Error(ErrorKind::kShape, kModule, "dynamics dataset is empty");
  }
  const Index d = dataset.increments.cols();
  params.validate(d, dataset.inputs.cols() - d);
  const PsdFactorization factor =
      factorize_psd(gram_matrix(dataset.inputs, params.kernel));
  const detail::ScaledGpLoss loss =
      detail::scaled_gp_value_and_grad(factor, dataset.increments, params.w);
  const KernelGradients kg =
      contract_gram_gradient(dataset.inputs, params.kernel, loss.dgram);

  DynamicsLikelihoodGradient out;
  out.value = loss.value;
  out.jitter = factor.jitter_applied;
  out.latent = MatrixXd::Zero(latent_rows, d);
  for (Index m = 0; m < dataset.size(); ++m) {
    const Index row = dataset.sources[static_cast<std::size_t>(m)].latent_row;
    if (row + 1 >= latent_rows) {
      throw Error(ErrorKind::kShape, kModule,
                  "dataset references latent rows beyond the stacked matrix");
    }
    out.latent.row(row) += kg.points.row(m).head(d);
    out.latent.row(row) -= loss.dtargets.row(m);
    out.latent.row(row + 1) += loss.dtargets.row(m);
  }
  out.kernel_log_params = kg.log_params;
  if (params.trains_scaling()) out.log_w = loss.dlog_w;
  return out;
}

DynamicsPosterior dynamics_predict(const VectorXd& x_star,
                                   const VectorXd& u_star,
                                   const CgpdmModel& model) {
  model.require_trained();
  if (x_star.size() != model.latent_dim() ||
      u_star.size() != model.control_dim()) {
    throw Error(ErrorKind::kShape, kModule,
                "query dimensions do not match the model (d=" +
                    std::to_string(model.latent_dim()) +
                    ", E=" + std::to_string(model.control_dim()) + ")");
  }
  const auto& params = model.dynamics_params();
  VectorXd input(x_star.size() + u_star.size());
  input << x_star, u_star;
  const VectorXd k_star =
      cross_covariance(input, model.dynamics_data().inputs, params.kernel);
  const std::span<const double> xs(input.data(),
                                   static_cast<std::size_t>(input.size()));

  DynamicsPosterior out;
  out.mean = x_star + model.dynamics_weights().transpose() * k_star;
  out.raw_variance = params.kernel(xs, xs, true) -
                     model.dynamics_factor().quadratic_form(k_star);
  out.scalar_variance = std::max(out.raw_variance, 0.0);
  out.per_dim_variance =
      (out.scalar_variance / params.w.array().square()).matrix();
  return out;
}

}  // namespace cgpdm
