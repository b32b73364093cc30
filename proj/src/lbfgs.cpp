#include "cgpdm/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "cgpdm/error.hpp"

namespace cgpdm {
namespace {

using Eigen::VectorXd;

struct Sample {
  double step = 0.0;
  double value = 0.0;
  double slope = 0.0;  // directional derivative
  bool finite = false;
  VectorXd grad;
};

// Minimizer of the cubic through (a, fa, da) and (b, fb, db); falls back to
// bisection when the interpolant is degenerate or leaves the safeguarded
// interior of [a, b].
double cubic_step(const Sample& a, const Sample& b) {
  const double lo = std::min(a.step, b.step);
  const double hi = std::max(a.step, b.step);
  const double margin = 0.1 * (hi - lo);
  const double mid = 0.5 * (a.step + b.step);
  if (!a.finite || !b.finite) return mid;
  const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.step - b.step);
  const double disc = d1 * d1 - a.slope * b.slope;
  if (disc < 0.0) return mid;
  const double sign = b.step > a.step ? 1.0 : -1.0;
  const double d2 = sign * std::sqrt(disc);
  const double denom = b.slope - a.slope + 2.0 * d2;
  if (denom == 0.0) return mid;
  const double t = b.step - (b.step - a.step) * (b.slope + d2 - d1) / denom;
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin) return mid;
  return t;
}

class LineSearch {
 public:
  LineSearch(const Objective& objective, const LbfgsOptions& options,
             const VectorXd& x, double f0, const VectorXd& direction,
             double slope0)
      : objective_(objective),
        options_(options),
        x_(x),
        f0_(f0),
        direction_(direction),
        slope0_(slope0) {}

  // On success fills `accepted` and returns true.
  bool run(double initial_step, Sample* accepted) {
    Sample prev{0.0, f0_, slope0_, true, {}};
    double step = initial_step;
    bool have_upper = false;
    double upper = 0.0;
    for (int i = 0; i < options_.max_line_search_evals; ++i) {
      Sample cur = evaluate(step);
      if (!cur.finite) {
        // Infeasible trial point: shrink toward the last good step.
        have_upper = true;
        upper = step;
        step = prev.step + 0.5 * (step - prev.step);
        continue;
      }
      if (cur.value > f0_ + options_.c1 * step * slope0_ ||
          (i > 0 && prev.step > 0.0 && cur.value >= prev.value)) {
        return zoom(prev, cur, accepted);
      }
      if (std::abs(cur.slope) <= -options_.c2 * slope0_) {
        *accepted = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(cur, prev, accepted);
      prev = std::move(cur);
      double next = 2.0 * step;
      if (have_upper) next = std::min(next, prev.step + 0.5 * (upper - prev.step));
      step = next;
    }
    return fallback(prev, accepted);
  }

  int evaluations() const { return evaluations_; }

 private:
  Sample evaluate(double step) {
    ++evaluations_;
    Sample s;
    s.step = step;
    s.grad.resize(x_.size());
    s.value = objective_(x_ + step * direction_, s.grad);
    s.finite = std::isfinite(s.value) && s.grad.allFinite();
    if (s.finite) s.slope = s.grad.dot(direction_);
    return s;
  }

  bool sufficient(const Sample& s) const {
    return s.finite && s.step > 0.0 &&
           s.value <= f0_ + options_.c1 * s.step * slope0_ &&
           f0_ - s.value >= options_.min_fallback_decrease * std::max(1.0, std::abs(f0_));
  }

  bool zoom(Sample lo, Sample hi, Sample* accepted) {
    while (evaluations_ < options_.max_line_search_evals) {
      if (std::abs(hi.step - lo.step) <=
          std::numeric_limits<double>::epsilon() * std::max(1.0, lo.step)) {
        break;
      }
      Sample cur = evaluate(cubic_step(lo, hi));
      if (!cur.finite || cur.value > f0_ + options_.c1 * cur.step * slope0_ ||
          cur.value >= lo.value) {
        hi = std::move(cur);
        continue;
      }
      if (std::abs(cur.slope) <= -options_.c2 * slope0_) {
        *accepted = std::move(cur);
        return true;
      }
      if (cur.slope * (hi.step - lo.step) >= 0.0) hi = lo;
      lo = std::move(cur);
    }
    return fallback(lo, accepted);
  }

  // The curvature condition could not be met within the evaluation budget;
  // a point with sufficient decrease is still a valid descent step.
  bool fallback(const Sample& best, Sample* accepted) {
    if (!sufficient(best)) return false;
    *accepted = best;
    return true;
  }

  const Objective& objective_;
  const LbfgsOptions& options_;
  const VectorXd& x_;
  double f0_;
  const VectorXd& direction_;
  double slope0_;
  int evaluations_ = 0;
};

VectorXd two_loop(const VectorXd& grad, const std::deque<VectorXd>& s_hist,
                  const std::deque<VectorXd>& y_hist) {
  const std::size_t m = s_hist.size();
  VectorXd q = grad;
  std::vector<double> alpha(m), rho(m);
  for (std::size_t k = m; k-- > 0;) {
    rho[k] = 1.0 / y_hist[k].dot(s_hist[k]);
    alpha[k] = rho[k] * s_hist[k].dot(q);
    q -= alpha[k] * y_hist[k];
  }
  if (m > 0) {
    const double gamma =
        s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    q *= gamma;
  }
  for (std::size_t k = 0; k < m; ++k) {
    const double beta = rho[k] * y_hist[k].dot(q);
    q += (alpha[k] - beta) * s_hist[k];
  }
  return -q;
}

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& objective, VectorXd x0,
                           const LbfgsOptions& options,
                           const IterationCallback& on_iteration) {
  if (options.max_iters < 0 || options.memory < 1) {
    throw Error(ErrorKind::kInput, "trainer", "invalid L-BFGS options");
  }
  LbfgsResult result;
  VectorXd grad(x0.size());
  double f = objective(x0, grad);
  result.evaluations = 1;
  if (!std::isfinite(f) || !grad.allFinite()) {
    throw Error(ErrorKind::kInput, "trainer",
                "objective or gradient is not finite at the starting point");
  }
  VectorXd x = std::move(x0);
  double gnorm = grad.size() > 0 ? grad.lpNorm<Eigen::Infinity>() : 0.0;
  result.trace.push_back({0, f, gnorm, 0.0, 1});
  if (on_iteration) on_iteration(result.trace.back());

  std::deque<VectorXd> s_hist, y_hist;
  result.status = LbfgsStatus::kMaxIterations;
  if (gnorm <= options.grad_tol) {
    result.status = LbfgsStatus::kConverged;
  } else {
    for (int iter = 1; iter <= options.max_iters; ++iter) {
      VectorXd direction = two_loop(grad, s_hist, y_hist);
      double slope = grad.dot(direction);
      if (!(slope < 0.0)) {
        s_hist.clear();
        y_hist.clear();
        direction = -grad;
        slope = -grad.squaredNorm();
      }
      const double initial_step =
          s_hist.empty() ? std::min(1.0, 1.0 / direction.norm()) : 1.0;

      LineSearch search(objective, options, x, f, direction, slope);
      Sample accepted;
      const bool ok = search.run(initial_step, &accepted);
      result.evaluations += search.evaluations();
      if (!ok) {
        result.status = LbfgsStatus::kLineSearchFailed;
        break;
      }

      VectorXd s = accepted.step * direction;
      VectorXd y = accepted.grad - grad;
      const double sy = s.dot(y);
      if (sy > 1e-12 * s.norm() * y.norm()) {
        s_hist.push_back(std::move(s));
        y_hist.push_back(std::move(y));
        if (static_cast<int>(s_hist.size()) > options.memory) {
          s_hist.pop_front();
          y_hist.pop_front();
        }
      }
      x += accepted.step * direction;
      f = accepted.value;
      grad = std::move(accepted.grad);
      gnorm = grad.lpNorm<Eigen::Infinity>();
      result.iterations = iter;
      result.trace.push_back({iter, f, gnorm, accepted.step, search.evaluations()});
      if (on_iteration) on_iteration(result.trace.back());
      if (gnorm <= options.grad_tol) {
        result.status = LbfgsStatus::kConverged;
        break;
      }
    }
  }
  result.x = std::move(x);
  result.loss = f;
  result.grad_norm = gnorm;
  return result;
}

}  // namespace cgpdm
