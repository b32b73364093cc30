#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

namespace cgpdm {

struct LbfgsOptions {
  int max_iters = 500;
  double grad_tol = 1e-4;  // on the infinity norm
  int memory = 10;
  double c1 = 1e-4;        // sufficient decrease
  double c2 = 0.9;         // curvature
  int max_line_search_evals = 20;
  // A step that misses the curvature condition is still taken when it lowers
  // the loss by at least this fraction of max(1, |loss|).
  double min_fallback_decrease = 1e-12;
};

enum class LbfgsStatus { kConverged, kMaxIterations, kLineSearchFailed };

struct LbfgsIteration {
  int iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  int evaluations = 0;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double loss = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  LbfgsStatus status = LbfgsStatus::kMaxIterations;
  // Entry 0 is the starting point; one entry per accepted step after that.
  std::vector<LbfgsIteration> trace;
};

// Returns f(x) and writes the gradient. A non-finite return value marks x as
// infeasible; the line search backs off from it.
using Objective = std::function<double(const Eigen::VectorXd& x,
                                       Eigen::VectorXd& grad)>;
using IterationCallback = std::function<void(const LbfgsIteration&)>;

// Limited-memory BFGS with a strong-Wolfe line search. Each accepted step
// strictly decreases f. Throws kInput if f or its gradient is not finite at x0.
LbfgsResult lbfgs_minimize(const Objective& objective, Eigen::VectorXd x0,
                           const LbfgsOptions& options,
                           const IterationCallback& on_iteration = {});

}  // namespace cgpdm
