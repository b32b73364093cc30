#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cgpdm/dynamics_map.hpp"
#include "cgpdm/latent_map.hpp"
#include "cgpdm/model.hpp"

namespace cgpdm::testing {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                                     std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

inline Eigen::VectorXd random_positive(Eigen::Index n, std::uint64_t seed,
                                       double lo = 0.5, double hi = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(lo, hi);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = uni(rng);
  return v;
}

inline double relative_error(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// max |a - b| / max(max |a|, max |b|, floor) over all entries
inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             double floor = 1e-12) {
  const double scale =
      std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), floor});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

// Central differences of f around x, perturbing every entry by +-h.
template <typename F>
Eigen::VectorXd central_difference(const F& f, const Eigen::VectorXd& x,
                                   double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

// Largest per-entry error relative to the gradient's overall scale.
inline double gradient_error(const Eigen::VectorXd& analytic,
                             const Eigen::VectorXd& numeric) {
  const double scale = std::max(
      {analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff(), 1e-8});
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

// Small multi-sequence problem with smooth latent paths and controls.
struct SyntheticProblem {
  Eigen::MatrixXd latent;
  Eigen::MatrixXd observations;
  std::vector<Eigen::MatrixXd> controls;
  std::vector<Eigen::Index> starts;
};

inline SyntheticProblem synthetic_problem(const std::vector<Eigen::Index>& lengths,
                                          Eigen::Index latent_dim,
                                          Eigen::Index observation_dim,
                                          Eigen::Index control_dim,
                                          std::uint64_t seed) {
  SyntheticProblem p;
  Eigen::Index total = 0;
  for (auto n : lengths) total += n;
  p.latent.resize(total, latent_dim);
  const Eigen::MatrixXd mixing =
      random_matrix(latent_dim, observation_dim, seed + 1, 0.7);
  Eigen::Index row = 0;
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    p.starts.push_back(row);
    const Eigen::MatrixXd u =
        random_matrix(std::max<Eigen::Index>(lengths[s] - 1, 0), control_dim,
                      seed + 10 + s, 0.3);
    const Eigen::MatrixXd jitter =
        random_matrix(lengths[s], latent_dim, seed + 100 + s, 0.05);
    for (Eigen::Index t = 0; t < lengths[s]; ++t) {
      for (Eigen::Index k = 0; k < latent_dim; ++k) {
        p.latent(row + t, k) =
            std::sin(0.4 * static_cast<double>(t) + static_cast<double>(k + s)) +
            jitter(t, k);
      }
    }
    p.controls.push_back(u);
    row += lengths[s];
  }
  p.observations = (p.latent * mixing).array().tanh().matrix() +
                   random_matrix(total, observation_dim, seed + 2, 0.01);
  return p;
}

// Random hyper-parameters, perturbed away from the defaults.
inline LatentMapParams random_latent_params(ModelVariant variant, Eigen::Index d,
                                            Eigen::Index observation_dim,
                                            std::uint64_t seed) {
  LatentMapParams p = LatentMapParams::initial(variant, d, observation_dim);
  const Eigen::VectorXd raw = p.kernel.params().cwiseProduct(
      random_positive(p.kernel.num_params(), seed, 0.6, 1.6));
  p.kernel = Kernel::from_params(p.kernel.variant(), p.kernel.input_dim(), raw);
  if (p.trains_scaling()) p.w = random_positive(observation_dim, seed + 1);
  return p;
}

inline DynamicsParams random_dynamics_params(ModelVariant variant, Eigen::Index d,
                                             Eigen::Index control_dim,
                                             std::uint64_t seed) {
  DynamicsParams p = DynamicsParams::initial(variant, d, control_dim);
  const Eigen::VectorXd raw = p.kernel.params().cwiseProduct(
      random_positive(p.kernel.num_params(), seed, 0.6, 1.6));
  p.kernel = Kernel::from_params(p.kernel.variant(), p.kernel.input_dim(), raw);
  if (p.trains_scaling()) p.w = random_positive(d, seed + 1);
  return p;
}

}  // namespace cgpdm::testing
