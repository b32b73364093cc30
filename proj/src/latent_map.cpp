#include "cgpdm/latent_map.hpp"

#include <algorithm>
#include <string>

#include "cgpdm/error.hpp"
#include "cgpdm/model.hpp"
#include "scaled_gp.hpp"

namespace cgpdm {
namespace {

constexpr const char* kModule = "latent-map";

void check_shapes(const MatrixXd& latent, const MatrixXd& observations,
                  const LatentMapParams& params) {
  if (latent.rows() != observations.rows()) {
    throw Error(ErrorKind::kShape, kModule,
                "latent rows (" + std::to_string(latent.rows()) +
                    ") differ from observation rows (" +
                    std::to_string(observations.rows()) + ")");
  }
  params.validate(latent.cols(), observations.cols());
}

}  // namespace

ModelVariant LatentMapParams::variant() const {
  return kernel.variant() == KernelVariant::kHighlyY ? ModelVariant::kHighly
                                                     : ModelVariant::kLowly;
}

Index LatentMapParams::num_log_params() const {
  return kernel.num_params() + (trains_scaling() ? w.size() : 0);
}

LatentMapParams LatentMapParams::initial(ModelVariant variant,
                                         Index latent_dim,
                                         Index observation_dim) {
  LatentMapParams p;
  if (variant == ModelVariant::kHighly) {
    p.kernel = Kernel::highly_y(VectorXd::Ones(latent_dim), 0.1);
  } else {
    p.kernel = Kernel::lowly_y(1.0, 10.0);
  }
  p.w = VectorXd::Ones(observation_dim);
  return p;
}

void LatentMapParams::validate(Index latent_dim, Index observation_dim) const {
  if (kernel.variant() != KernelVariant::kLowlyY &&
      kernel.variant() != KernelVariant::kHighlyY) {
    throw Error(ErrorKind::kVariant, kModule,
                "latent map needs a Y-family kernel");
  }
  kernel.check_input_dim(latent_dim);
  if (w.size() != observation_dim) {
    throw Error(ErrorKind::kShape, kModule,
                "scaling vector has " + std::to_string(w.size()) +
                    " entries, expected " + std::to_string(observation_dim));
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

double latent_neg_log_likelihood(const MatrixXd& latent,
                                 const MatrixXd& observations,
                                 const LatentMapParams& params) {
  check_shapes(latent, observations, params);
  const PsdFactorization factor =
      factorize_psd(gram_matrix(latent, params.kernel));
  return detail::scaled_gp_value(factor, observations, params.w);
}

LatentLikelihoodGradient latent_neg_log_likelihood_grad(
    const MatrixXd& latent, const MatrixXd& observations,
    const LatentMapParams& params) {
  check_shapes(latent, observations, params);
  const PsdFactorization factor =
      factorize_psd(gram_matrix(latent, params.kernel));
  const detail::ScaledGpLoss loss =
      detail::scaled_gp_value_and_grad(factor, observations, params.w);
  const KernelGradients kg =
      contract_gram_gradient(latent, params.kernel, loss.dgram);

  LatentLikelihoodGradient out;
  out.value = loss.value;
  out.jitter = factor.jitter_applied;
  out.latent = kg.points;
  out.kernel_log_params = kg.log_params;
  if (params.trains_scaling()) out.log_w = loss.dlog_w;
  return out;
}

LatentMapPosterior latent_predict(const VectorXd& x_star,
                                  const CgpdmModel& model) {
  model.require_trained();
  if (x_star.size() != model.latent_dim()) {
    throw Error(ErrorKind::kShape, kModule,
                "query has dimension " + std::to_string(x_star.size()) +
                    ", model latent dimension is " +
                    std::to_string(model.latent_dim()));
  }
  const auto& params = model.latent_params();
  const VectorXd k_star =
      cross_covariance(x_star, model.latent(), params.kernel);
  const std::span<const double> xs(x_star.data(),
                                   static_cast<std::size_t>(x_star.size()));

  LatentMapPosterior out;
  out.mean = model.observation_offset() +
             model.latent_weights().transpose() * k_star;
  out.raw_variance = params.kernel(xs, xs, true) -
                     model.latent_factor().quadratic_form(k_star);
  out.scalar_variance = std::max(out.raw_variance, 0.0);
  out.per_dim_variance =
      (out.scalar_variance / params.w.array().square()).matrix();
  return out;
}

}  // namespace cgpdm
