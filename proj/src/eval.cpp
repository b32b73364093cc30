#include "cgpdm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <omp.h>

#include "cgpdm/cloth_sim.hpp"
#include "cgpdm/dynamics_map.hpp"
#include "cgpdm/error.hpp"
#include "cgpdm/latent_map.hpp"

namespace cgpdm {
namespace {

constexpr const char* kModule = "eval-harness";

std::mt19937_64 seeded(std::initializer_list<std::uint64_t> words) {
  std::vector<std::uint32_t> parts;
  for (std::uint64_t w : words) {
    parts.push_back(static_cast<std::uint32_t>(w));
    parts.push_back(static_cast<std::uint32_t>(w >> 32));
  }
  std::seed_seq seq(parts.begin(), parts.end());
  return std::mt19937_64(seq);
}

std::uint64_t range_key(double range_deg) {
  return static_cast<std::uint64_t>(std::llround(range_deg * 1000.0));
}

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

}  // namespace

std::string_view to_string(RolloutMode mode) {
  return mode == RolloutMode::kMean ? "mean" : "sample";
}

RolloutMode parse_rollout_mode(std::string_view text) {
  if (text == "mean") return RolloutMode::kMean;
  if (text == "sample") return RolloutMode::kSample;
  throw Error(ErrorKind::kInput, kModule,
              "unknown rollout mode '" + std::string(text) + "'");
}

RolloutResult rollout(const CgpdmModel& model, const VectorXd& initial,
                      const MatrixXd& controls, RolloutMode mode,
                      std::uint64_t seed) {
  model.require_trained();
  const Index d = model.latent_dim();
  if (initial.size() != d) {
    throw Error(ErrorKind::kShape, kModule,
                "initial state has dimension " + std::to_string(initial.size()) +
                    ", expected " + std::to_string(d));
  }
  if (controls.rows() > 0 && controls.cols() != model.control_dim()) {
    throw Error(ErrorKind::kShape, kModule,
                "controls have " + std::to_string(controls.cols()) +
                    " columns, model expects " +
                    std::to_string(model.control_dim()));
  }
  const Index steps = controls.rows() + 1;
  const Index dim = model.observation_dim();

  RolloutResult out;
  out.mode = mode;
  if (mode == RolloutMode::kSample) out.seed = seed;
  out.latent.resize(steps, d);
  out.latent_variance = MatrixXd::Zero(steps, d);
  out.observations.resize(steps, dim);
  out.observation_variance.resize(steps, dim);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd state = initial;
  out.latent.row(0) = state.transpose();
  for (Index t = 1; t < steps; ++t) {
    const DynamicsPosterior next =
        dynamics_predict(state, controls.row(t - 1).transpose(), model);
    state = next.mean;
    if (mode == RolloutMode::kSample) {
      for (Index k = 0; k < d; ++k) {
        state[k] += std::sqrt(next.per_dim_variance[k]) * normal(rng);
      }
    }
    if (!state.allFinite()) {
      throw Error(ErrorKind::kRolloutDivergence, kModule,
                  "latent state became non-finite at step " + std::to_string(t));
    }
    out.latent.row(t) = state.transpose();
    out.latent_variance.row(t) = next.per_dim_variance.transpose();
  }
  for (Index t = 0; t < steps; ++t) {
    const LatentMapPosterior obs =
        latent_predict(out.latent.row(t).transpose(), model);
    out.observations.row(t) = obs.mean.transpose();
    out.observation_variance.row(t) = obs.per_dim_variance.transpose();
  }
  return out;
}

VectorXd initial_latent_state(const CgpdmModel& model,
                              const VectorXd& observation) {
  model.require_trained();
  const MatrixXd& y = model.observations();
  if (observation.size() != y.cols()) {
    throw Error(ErrorKind::kShape, kModule,
                "observation has dimension " + std::to_string(observation.size()) +
                    ", expected " + std::to_string(y.cols()));
  }
  Index best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < y.rows(); ++i) {
    const double dist = (y.row(i).transpose() - observation).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  return model.latent().row(best).transpose();
}

double mean_point_error(const MatrixXd& truth, const MatrixXd& prediction) {
  if (truth.rows() != prediction.rows() || truth.cols() != prediction.cols()) {
    throw Error(ErrorKind::kShape, kModule,
                "trajectories differ in shape (" + std::to_string(truth.rows()) +
                    "x" + std::to_string(truth.cols()) + " vs " +
                    std::to_string(prediction.rows()) + "x" +
                    std::to_string(prediction.cols()) + ")");
  }
  if (truth.cols() % 3 != 0 || truth.size() == 0) {
    throw Error(ErrorKind::kShape, kModule,
                "observation dimension must be a positive multiple of 3");
  }
  const Index points = truth.cols() / 3;
  double total = 0.0;
  for (Index t = 0; t < truth.rows(); ++t) {
    for (Index p = 0; p < points; ++p) {
      total += (truth.row(t).segment<3>(3 * p) -
                prediction.row(t).segment<3>(3 * p)).norm();
    }
  }
  return total / static_cast<double>(truth.rows() * points);
}

double frozen_baseline_error(const MatrixXd& truth) {
  const MatrixXd frozen = truth.row(0).replicate(truth.rows(), 1);
  return mean_point_error(truth, frozen);
}

TestScore score_trajectory(const CgpdmModel& model, const Trajectory& test) {
  test.validate();
  const VectorXd x0 =
      initial_latent_state(model, test.observations.row(0).transpose());
  const RolloutResult pred = rollout(model, x0, test.controls);
  return {mean_point_error(test.observations, pred.observations),
          frozen_baseline_error(test.observations)};
}

void ExperimentConfig::validate() const {
  const auto fail = [](const std::string& what) {
    throw Error(ErrorKind::kInput, kModule, what);
  };
  if (ranges_deg.empty() || train_sizes.empty() || variants.empty()) {
    fail("experiment grid has an empty axis");
  }
  if (repeats < 1) fail("repeats must be at least 1");
  if (test_count < 1) fail("at least one test trajectory is required");
  for (double r : ranges_deg) {
    if (!(r >= 0.0)) fail("ranges must be non-negative");
  }
  for (int n : train_sizes) {
    if (n < 1 || n + test_count > trajectories_per_range) {
      fail("training size " + std::to_string(n) +
           " does not fit beside the test set in " +
           std::to_string(trajectories_per_range) + " trajectories");
    }
  }
  if (steps < 2) fail("trajectories need at least 2 steps");
  if (latent_dim < 1) fail("latent dimension must be positive");
  if (max_iters < 1) fail("max_iters must be at least 1");
  if (warmup_iters < 0) fail("warmup_iters must be non-negative");
  if (threads < 0) fail("thread count must be non-negative");
}

const CellReport* ExperimentReport::find(double range_deg, int train_size,
                                         ModelVariant variant) const {
  for (const auto& c : cells) {
    if (c.range_deg == range_deg && c.train_size == train_size &&
        c.variant == variant) {
      return &c;
    }
  }
  return nullptr;
}

Interval confidence_interval(const std::vector<double>& values) {
  Interval out;
  if (values.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan};
  }
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double half = 0.0;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    half = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  out.low = out.mean - half;
  out.high = out.mean + half;
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.threads > 0) omp_set_num_threads(config.threads);

  struct RangeData {
    std::vector<Trajectory> trajectories;
    std::vector<int> test_indices;
    std::vector<int> pool;  // candidates for training
    std::vector<double> baselines;
  };
  std::vector<RangeData> ranges;
  for (double r : config.ranges_deg) {
    RangeData data;
    ControlLawParams base;
    base.steps = config.steps;
    GeneratedDataset generated = generate_dataset(
        r, config.trajectories_per_range, config.seed ^ range_key(r), {}, base);
    data.trajectories = std::move(generated.trajectories);
    std::vector<int> order(data.trajectories.size());
    std::iota(order.begin(), order.end(), 0);
    auto rng = seeded({config.seed, range_key(r), 0});
    std::shuffle(order.begin(), order.end(), rng);
    data.test_indices.assign(order.begin(), order.begin() + config.test_count);
    data.pool.assign(order.begin() + config.test_count, order.end());
    std::sort(data.test_indices.begin(), data.test_indices.end());
    std::sort(data.pool.begin(), data.pool.end());
    for (int i : data.test_indices) {
      data.baselines.push_back(
          frozen_baseline_error(data.trajectories[static_cast<std::size_t>(i)].observations));
    }
    ranges.push_back(std::move(data));
  }

  ExperimentReport report;
  report.config = config;
  struct Task {
    std::size_t cell;
    std::size_t range;
    int repeat;
  };
  std::vector<Task> tasks;
  for (std::size_t ri = 0; ri < config.ranges_deg.size(); ++ri) {
    for (int n : config.train_sizes) {
      std::vector<std::vector<int>> subsets;
      for (int rep = 0; rep < config.repeats; ++rep) {
        std::vector<int> pool = ranges[ri].pool;
        auto rng = seeded({config.seed, range_key(config.ranges_deg[ri]),
                           static_cast<std::uint64_t>(n),
                           static_cast<std::uint64_t>(rep) + 1});
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(static_cast<std::size_t>(n));
        std::sort(pool.begin(), pool.end());
        subsets.push_back(std::move(pool));
      }
      for (ModelVariant v : config.variants) {
        CellReport cell;
        cell.range_deg = config.ranges_deg[ri];
        cell.train_size = n;
        cell.variant = v;
        cell.test_indices = ranges[ri].test_indices;
        cell.baseline_errors = ranges[ri].baselines;
        cell.repeats.resize(static_cast<std::size_t>(config.repeats));
        for (int rep = 0; rep < config.repeats; ++rep) {
          cell.repeats[static_cast<std::size_t>(rep)].repeat = rep;
          cell.repeats[static_cast<std::size_t>(rep)].train_indices =
              subsets[static_cast<std::size_t>(rep)];
          tasks.push_back({report.cells.size(), ri, rep});
        }
        report.cells.push_back(std::move(cell));
      }
    }
  }

#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const Task& task = tasks[k];
    CellReport& cell = report.cells[task.cell];
    CellRepeat& slot = cell.repeats[static_cast<std::size_t>(task.repeat)];
    const RangeData& data = ranges[task.range];
    try {
      std::vector<Trajectory> train_set;
      for (int i : slot.train_indices) {
        train_set.push_back(data.trajectories[static_cast<std::size_t>(i)]);
      }
      TrainConfig tc;
      tc.latent_dim = config.latent_dim;
      tc.variant = cell.variant;
      tc.max_iters = config.max_iters;
      tc.warmup_iters = config.warmup_iters;
      tc.seed = config.seed;
      const CgpdmModel model = train(train_set, tc);
      slot.status = model.training_info().status;
      slot.iterations = model.training_info().iterations;
      slot.final_loss = model.training_info().final_loss;
      for (int i : data.test_indices) {
        slot.test_errors.push_back(
            score_trajectory(model, data.trajectories[static_cast<std::size_t>(i)])
                .rollout_error);
      }
      slot.mean_error =
          std::accumulate(slot.test_errors.begin(), slot.test_errors.end(), 0.0) /
          static_cast<double>(slot.test_errors.size());
    } catch (const std::exception& e) {
      slot.failed = true;
      slot.failure = e.what();
      slot.test_errors.clear();
    }
  }

  for (CellReport& cell : report.cells) {
    std::vector<double> means;
    for (const CellRepeat& rep : cell.repeats) {
      if (!rep.failed) means.push_back(rep.mean_error);
    }
    cell.completed = static_cast<int>(means.size());
    const Interval ci = confidence_interval(means);
    cell.mean = ci.mean;
    cell.ci_low = ci.low;
    cell.ci_high = ci.high;
    cell.baseline = std::accumulate(cell.baseline_errors.begin(),
                                    cell.baseline_errors.end(), 0.0) /
                    static_cast<double>(cell.baseline_errors.size());
  }
  return report;
}

std::string report_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "range_deg,n_train,variant,repeats,mean,ci_low,ci_high,baseline\n";
  for (const CellReport& c : report.cells) {
    out << fmt(c.range_deg) << ',' << c.train_size << ',' << to_string(c.variant)
        << ',' << c.completed << ',' << fmt(c.mean) << ',' << fmt(c.ci_low) << ','
        << fmt(c.ci_high) << ',' << fmt(c.baseline) << '\n';
  }
  return out.str();
}

std::string detail_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "range_deg,n_train,variant,repeat,status,test_index,error,baseline\n";
  for (const CellReport& c : report.cells) {
    for (const CellRepeat& rep : c.repeats) {
      for (std::size_t j = 0; j < c.test_indices.size(); ++j) {
        out << fmt(c.range_deg) << ',' << c.train_size << ','
            << to_string(c.variant) << ',' << rep.repeat << ','
            << (rep.failed ? std::string("failed") : std::string(to_string(rep.status)))
            << ',' << c.test_indices[j] << ','
            << (rep.failed ? std::string("nan") : fmt(rep.test_errors[j])) << ','
            << fmt(c.baseline_errors[j]) << '\n';
      }
    }
  }
  return out.str();
}

std::string report_svg(const ExperimentReport& report) {
  const auto& ranges = report.config.ranges_deg;
  const auto& sizes = report.config.train_sizes;
  const double panel_w = 320.0;
  const double panel_h = 240.0;
  const double margin = 50.0;
  const double width = margin + static_cast<double>(ranges.size()) * (panel_w + margin);
  const double height = panel_h + 2.0 * margin + 30.0;

  double y_max = 0.0;
  for (const CellReport& c : report.cells) {
    if (!c.failed()) y_max = std::max(y_max, c.ci_high);
    y_max = std::max(y_max, c.baseline);
  }
  if (!(y_max > 0.0)) y_max = 1.0;
  y_max *= 1.1;
  const int min_n = *std::min_element(sizes.begin(), sizes.end());
  const int max_n = *std::max_element(sizes.begin(), sizes.end());
  const double span = max_n > min_n ? max_n - min_n : 1.0;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

  std::ostringstream svg;
  svg << std::setprecision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t ri = 0; ri < ranges.size(); ++ri) {
    const double x0 = margin + static_cast<double>(ri) * (panel_w + margin);
    const double y0 = margin;
    const auto px = [&](int n) { return x0 + 20.0 + (n - min_n) / span * (panel_w - 40.0); };
    const auto py = [&](double e) { return y0 + panel_h - e / y_max * panel_h; };
    svg << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << panel_w
        << "\" height=\"" << panel_h << "\" fill=\"none\" stroke=\"#444\"/>\n";
    svg << "<text x=\"" << x0 + panel_w / 2 << "\" y=\"" << y0 - 10
        << "\" text-anchor=\"middle\">R = " << ranges[ri] << " deg</text>\n";
    for (int n : sizes) {
      svg << "<text x=\"" << px(n) << "\" y=\"" << y0 + panel_h + 16
          << "\" text-anchor=\"middle\">" << n << "</text>\n";
    }
    svg << "<text x=\"" << x0 + panel_w / 2 << "\" y=\"" << y0 + panel_h + 34
        << "\" text-anchor=\"middle\">training sequences</text>\n";
    svg << "<text x=\"" << x0 - 6 << "\" y=\"" << py(y_max / 1.1)
        << "\" text-anchor=\"end\">" << y_max / 1.1 << "</text>\n";
    svg << "<text x=\"" << x0 - 6 << "\" y=\"" << py(0.0)
        << "\" text-anchor=\"end\">0</text>\n";

    const CellReport* any = nullptr;
    for (std::size_t vi = 0; vi < report.config.variants.size(); ++vi) {
      const ModelVariant v = report.config.variants[vi];
      const char* color = colors[vi % 4];
      std::ostringstream path;
      for (int n : sizes) {
        const CellReport* c = report.find(ranges[ri], n, v);
        if (c == nullptr || c->failed()) continue;
        any = c;
        path << (path.tellp() == 0 ? "M" : " L") << px(n) << ' ' << py(c->mean);
        svg << "<line x1=\"" << px(n) << "\" y1=\"" << py(c->ci_low) << "\" x2=\""
            << px(n) << "\" y2=\"" << py(c->ci_high) << "\" stroke=\"" << color
            << "\"/>\n";
        svg << "<circle cx=\"" << px(n) << "\" cy=\"" << py(c->mean)
            << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      }
      if (path.tellp() > 0) {
        svg << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"" << color
            << "\"/>\n";
      }
      svg << "<text x=\"" << x0 + 8 << "\" y=\"" << y0 + 16 + 14.0 * static_cast<double>(vi)
          << "\" fill=\"" << color << "\">" << to_string(v) << "</text>\n";
    }
    if (any != nullptr) {
      svg << "<line x1=\"" << x0 << "\" y1=\"" << py(any->baseline) << "\" x2=\""
          << x0 + panel_w << "\" y2=\"" << py(any->baseline)
          << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
      svg << "<text x=\"" << x0 + panel_w - 4 << "\" y=\"" << py(any->baseline) - 4
          << "\" text-anchor=\"end\" fill=\"#888\">frozen mesh</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace cgpdm
