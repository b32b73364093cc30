#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cgpdm/model.hpp"
#include "cgpdm/trainer.hpp"

namespace cgpdm {

enum class RolloutMode { kMean, kSample };

std::string_view to_string(RolloutMode mode);
RolloutMode parse_rollout_mode(std::string_view text);

struct RolloutResult {
  MatrixXd latent;                // N_d x d; row 0 is the initial state
  MatrixXd observations;          // N_d x D
  MatrixXd latent_variance;       // N_d x d; row 0 is zero
  MatrixXd observation_variance;  // N_d x D
  RolloutMode mode = RolloutMode::kMean;
  std::optional<std::uint64_t> seed;
};

// Iterates the dynamics map from `initial` under `controls` ((N_d - 1) x E)
// and maps every latent state to an observation. Sample mode draws each next
// state from the per-dimension predictive Gaussian.
RolloutResult rollout(const CgpdmModel& model, const VectorXd& initial,
                      const MatrixXd& controls,
                      RolloutMode mode = RolloutMode::kMean,
                      std::uint64_t seed = 0);

// Latent coordinate of the training observation nearest to `observation`;
// the lowest index wins ties.
VectorXd initial_latent_state(const CgpdmModel& model,
                              const VectorXd& observation);

// Average Euclidean distance between corresponding 3-D points, over all rows
// and all D / 3 points of the point-major layout.
double mean_point_error(const MatrixXd& truth, const MatrixXd& prediction);

// Error of predicting every frame as the first one.
double frozen_baseline_error(const MatrixXd& truth);

struct TestScore {
  double rollout_error = 0.0;
  double baseline_error = 0.0;
};

// Rolls out the test trajectory's controls from the latent state nearest its
// first frame and scores the prediction.
TestScore score_trajectory(const CgpdmModel& model, const Trajectory& test);

struct ExperimentConfig {
  std::vector<double> ranges_deg = {30.0};
  std::vector<int> train_sizes = {5, 10, 15, 20};
  std::vector<ModelVariant> variants = {ModelVariant::kHighly,
                                        ModelVariant::kLowly};
  int repeats = 10;
  int trajectories_per_range = 50;
  int test_count = 10;
  int steps = 100;
  Index latent_dim = 3;
  int max_iters = 500;
  int warmup_iters = 200;
  std::uint64_t seed = 0;
  // 0 keeps the OpenMP default.
  int threads = 0;

  void validate() const;
};

struct CellRepeat {
  int repeat = 0;
  bool failed = false;
  std::string failure;
  std::vector<int> train_indices;      // within the range's dataset
  std::vector<double> test_errors;     // per test trajectory
  double mean_error = 0.0;             // mean over test trajectories
  TrainStatus status = TrainStatus::kNotRun;
  int iterations = 0;
  double final_loss = 0.0;
};

struct CellReport {
  double range_deg = 0.0;
  int train_size = 0;
  ModelVariant variant = ModelVariant::kHighly;
  std::vector<CellRepeat> repeats;
  std::vector<int> test_indices;
  std::vector<double> baseline_errors;  // per test trajectory
  int completed = 0;
  double mean = 0.0;  // over completed repeat-level means
  double ci_low = 0.0;
  double ci_high = 0.0;
  double baseline = 0.0;
  bool failed() const { return completed == 0; }
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<CellReport> cells;

  const CellReport* find(double range_deg, int train_size,
                         ModelVariant variant) const;
};

// Mean and normal-approximation 95% interval (mean +- 1.96 SE) of the
// repeat-level means. A single value has zero half-width.
struct Interval {
  double mean = 0.0;
  double low = 0.0;
  double high = 0.0;
};
Interval confidence_interval(const std::vector<double>& values);

// Every (range, size, repeat) draws one training subset shared by all
// variants; test trajectories are fixed per range. Cells run concurrently and
// a failed training marks only its own repeat.
ExperimentReport run_experiment(const ExperimentConfig& config);

// Columns: range_deg,n_train,variant,repeats,mean,ci_low,ci_high,baseline
std::string report_csv(const ExperimentReport& report);
// One row per (cell, repeat, test trajectory).
std::string detail_csv(const ExperimentReport& report);
// Error versus training-set size, one panel per range.
std::string report_svg(const ExperimentReport& report);

}  // namespace cgpdm
