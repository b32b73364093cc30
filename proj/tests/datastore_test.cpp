#include <gtest/gtest.h>

#include <Eigen/QR>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>

#include "cgpdm/datastore.hpp"
#include "cgpdm/dynamics_map.hpp"
#include "cgpdm/error.hpp"
#include "cgpdm/latent_map.hpp"
#include "json.hpp"
#include "support.hpp"

namespace cgpdm {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::random_matrix;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("cgpdm_datastore_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

Trajectory sample_trajectory(Index n, Index dim, Index e, std::uint64_t seed) {
  Trajectory t;
  t.observations = random_matrix(n, dim, seed, 0.1);
  t.controls = random_matrix(n - 1, e, seed + 1, 0.01);
  t.dt = 0.05;
  t.metadata["source"] = "simulated";
  t.metadata["range_deg"] = "30";
  return t;
}

CgpdmModel sample_model(ModelVariant v, std::uint64_t seed) {
  const testing::SyntheticProblem p = testing::synthetic_problem({9, 8}, 3, 6, 2, seed);
  const VectorXd offset = p.observations.colwise().mean().transpose();
  TrainingInfo info;
  info.status = TrainStatus::kMaxIterations;
  info.iterations = 3;
  info.initial_loss = 12.5;
  info.final_loss = -3.25;
  info.seed = 77;
  info.trace = {{0, 12.5, 1.0, 0.0, 1, 0}, {1, -3.25, 0.5, 1.0, 2, 0}};
  return CgpdmModel(p.latent, p.observations, offset, p.controls, p.starts,
                    testing::random_latent_params(v, 3, 6, seed + 5),
                    testing::random_dynamics_params(v, 3, 2, seed + 6), info);
}

// ---- trajectories ----

TEST(TrajectoryFile, RoundTripIsBitIdentical) {
  const TempDir dir;
  const Trajectory t = sample_trajectory(7, 6, 2, 1);
  save_trajectory(dir.path() / "a.traj", t);
  const Trajectory back = load_trajectory(dir.path() / "a.traj");
  EXPECT_EQ(back.observations, t.observations);
  EXPECT_EQ(back.controls, t.controls);
  EXPECT_EQ(back.dt, t.dt);
  EXPECT_EQ(back.metadata, t.metadata);
  EXPECT_EQ(trajectory_to_json(back), trajectory_to_json(t));
}

TEST(TrajectoryFile, SingleFrameHasNoControls) {
  Trajectory t;
  t.observations = random_matrix(1, 4, 2);
  t.controls = MatrixXd(0, 3);
  const Trajectory back = trajectory_from_json(trajectory_to_json(t));
  EXPECT_EQ(back.observations, t.observations);
  EXPECT_EQ(back.controls.rows(), 0);
  EXPECT_EQ(back.controls.cols(), 3);
}

TEST(TrajectoryFile, MismatchedRowCountNamesTheField) {
  json doc = json::parse(trajectory_to_json(sample_trajectory(5, 3, 2, 3)));
  doc["U"].erase(doc["U"].begin());
  try {
    trajectory_from_json(doc.dump());
    FAIL() << "accepted a short U";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSchema);
    EXPECT_NE(std::string(e.what()).find("U"), std::string::npos) << e.what();
  }
}

TEST(TrajectoryFile, MalformedEntriesAreSchemaErrors) {
  const std::string good = trajectory_to_json(sample_trajectory(4, 3, 2, 4));
  const auto expect_schema = [](const json& doc, const std::string& field) {
    try {
      trajectory_from_json(doc.dump());
      ADD_FAILURE() << "accepted bad " << field;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kSchema);
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  json doc = json::parse(good);
  doc["Y"][1][2] = "x";
  expect_schema(doc, "Y[1]");
  doc = json::parse(good);
  doc["schema_version"] = 99;
  expect_schema(doc, "schema_version");
  doc = json::parse(good);
  doc.erase("dt");
  expect_schema(doc, "dt");
  doc = json::parse(good);
  doc["kind"] = "cgpdm-model";
  expect_schema(doc, "kind");
  EXPECT_THROW(trajectory_from_json("{not json"), Error);
}

TEST(TrajectoryFile, MissingFileIsIoError) {
  try {
    load_trajectory("/nonexistent/cgpdm/none.traj");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

// ---- models ----

TEST(ModelFile, RoundTripPreservesPredictions) {
  const TempDir dir;
  for (ModelVariant v : {ModelVariant::kHighly, ModelVariant::kLowly}) {
    const CgpdmModel m = sample_model(v, 10);
    save_model(dir.path() / "m.cgpdm", m);
    const LoadedModel loaded = load_model(dir.path() / "m.cgpdm");
    EXPECT_TRUE(loaded.warnings.empty());
    const CgpdmModel& r = loaded.model;
    EXPECT_EQ(r.variant(), v);
    EXPECT_EQ(r.latent(), m.latent());
    EXPECT_EQ(r.sequence_starts(), m.sequence_starts());
    EXPECT_EQ(r.training_info().final_loss, m.training_info().final_loss);
    EXPECT_EQ(r.training_info().trace.size(), 2u);

    const MatrixXd xq = random_matrix(100, 3, 11);
    const MatrixXd uq = random_matrix(100, 2, 12, 0.3);
    double worst = 0.0;
    for (Index q = 0; q < 100; ++q) {
      const LatentMapPosterior a = latent_predict(xq.row(q).transpose(), m);
      const LatentMapPosterior b = latent_predict(xq.row(q).transpose(), r);
      worst = std::max({worst, testing::relative_error(MatrixXd(a.mean), MatrixXd(b.mean)),
                        testing::relative_error(a.scalar_variance, b.scalar_variance)});
      const DynamicsPosterior c = dynamics_predict(xq.row(q).transpose(), uq.row(q).transpose(), m);
      const DynamicsPosterior d = dynamics_predict(xq.row(q).transpose(), uq.row(q).transpose(), r);
      worst = std::max({worst, testing::relative_error(MatrixXd(c.mean), MatrixXd(d.mean)),
                        testing::relative_error(c.scalar_variance, d.scalar_variance)});
    }
    EXPECT_LT(worst, 1e-10) << to_string(v);
  }
}

TEST(ModelFile, VariantMismatchIsRejected) {
  const std::string text = model_to_json(sample_model(ModelVariant::kHighly, 20));
  try {
    model_from_json(text, ModelVariant::kLowly);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kVariant);
  }
  EXPECT_NO_THROW(model_from_json(text, ModelVariant::kHighly));
}

TEST(ModelFile, HashMismatchIsAWarning) {
  json doc = json::parse(model_to_json(sample_model(ModelVariant::kHighly, 30)));
  doc["data_hash"] = "0000000000000000";
  const LoadedModel loaded = model_from_json(doc.dump());
  ASSERT_EQ(loaded.warnings.size(), 1u);
  EXPECT_NE(loaded.warnings[0].find("hash"), std::string::npos);
}

TEST(ModelFile, ShapeErrorsAreSchemaErrors) {
  json doc = json::parse(model_to_json(sample_model(ModelVariant::kLowly, 40)));
  doc["X"].erase(doc["X"].begin());
  try {
    model_from_json(doc.dump());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSchema);
    EXPECT_NE(std::string(e.what()).find("X"), std::string::npos) << e.what();
  }
}

TEST(ModelFile, SerializationIsStable) {
  const CgpdmModel m = sample_model(ModelVariant::kHighly, 50);
  const std::string once = model_to_json(m);
  EXPECT_EQ(model_to_json(model_from_json(once).model), once);
}

// ---- preprocessing ----

std::vector<TimedSample> stream(const std::vector<double>& times,
                                const std::function<VectorXd(double)>& f) {
  std::vector<TimedSample> out;
  for (double t : times) out.push_back({t, f(t)});
  return out;
}

std::vector<double> irregular_times(double rate, double duration, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.2, 0.2);
  std::vector<double> times;
  const double h = 1.0 / rate;
  for (double t = 0.0; t <= duration; t += h) times.push_back(t + h * jitter(rng));
  return times;
}

TEST(Preprocess, ConstantStreams) {
  const VectorXd mesh_value = random_matrix(6, 1, 60).col(0);
  const VectorXd eff_value = random_matrix(3, 1, 61).col(0);
  const auto mesh = stream(irregular_times(30, 2.0, 62), [&](double) { return mesh_value; });
  const auto eff = stream(irregular_times(100, 2.0, 63), [&](double) { return eff_value; });
  const PreprocessedTrajectory p = preprocess_real(mesh, eff);
  ASSERT_GT(p.trajectory.length(), 2);
  for (Index r = 0; r < p.trajectory.length(); ++r) {
    EXPECT_LT((p.trajectory.observations.row(r).transpose() - mesh_value).cwiseAbs().maxCoeff(),
              1e-15);
  }
  EXPECT_EQ(p.trajectory.controls.cols(), 3);
  EXPECT_LT(p.trajectory.controls.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Preprocess, LinearSignalsRecoveredExactlyWithoutSmoothing) {
  // A moving average over irregular stamps shifts a linear signal in time,
  // so exactness holds with a one-sample window.
  const VectorXd a = random_matrix(6, 1, 70).col(0);
  const VectorXd b = random_matrix(6, 1, 71).col(0);
  const Eigen::Vector3d c(0.1, -0.2, 0.3);
  const Eigen::Vector3d g(0.05, 0.0, -0.01);
  const auto mesh = stream(irregular_times(33, 3.0, 72), [&](double t) { return VectorXd(a + t * b); });
  const auto eff = stream(irregular_times(47, 3.0, 73), [&](double t) { return VectorXd(c + t * g); });
  PreprocessOptions opt;
  opt.window = 1;
  const PreprocessedTrajectory p = preprocess_real(mesh, eff, opt);
  for (Index k = 0; k < p.trajectory.length(); ++k) {
    const double t = p.times[static_cast<std::size_t>(k)];
    EXPECT_LT((p.trajectory.observations.row(k).transpose() - (a + t * b)).cwiseAbs().maxCoeff(),
              1e-12);
  }
  for (Index k = 0; k < p.trajectory.controls.rows(); ++k) {
    EXPECT_LT((p.trajectory.controls.row(k).transpose() - g / 20.0).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Preprocess, GridIsUniform) {
  const auto mesh = stream(irregular_times(15, 4.0, 80), [](double t) { return VectorXd::Constant(3, t); });
  const auto eff = stream(irregular_times(25, 4.0, 81), [](double t) { return VectorXd::Constant(3, t); });
  const PreprocessedTrajectory p = preprocess_real(mesh, eff);
  ASSERT_EQ(static_cast<Index>(p.times.size()), p.trajectory.length());
  for (std::size_t k = 0; k < p.times.size(); ++k) {
    EXPECT_EQ(p.times[k], p.times[0] + static_cast<double>(k) * 0.05);
  }
  EXPECT_DOUBLE_EQ(p.trajectory.dt, 0.05);
  EXPECT_EQ(p.trajectory.controls.rows(), p.trajectory.length() - 1);
}

// Amplitude of the 0.5 Hz component of `y` on the grid, by least squares.
double fitted_amplitude(const std::vector<double>& times, const MatrixXd& y) {
  const Index n = static_cast<Index>(times.size());
  MatrixXd basis(n, 2);
  for (Index k = 0; k < n; ++k) {
    const double w = 2.0 * std::numbers::pi * 0.5 * times[static_cast<std::size_t>(k)];
    basis(k, 0) = std::sin(w);
    basis(k, 1) = std::cos(w);
  }
  const Eigen::Vector2d coef = basis.colPivHouseholderQr().solve(y.col(0));
  return coef.norm();
}

PreprocessedTrajectory smoothed_sinusoid(int window) {
  const auto sine = [](double t) {
    return VectorXd::Constant(3, std::sin(2.0 * std::numbers::pi * 0.5 * t));
  };
  const auto mesh = stream(irregular_times(15, 10.0, 90), sine);
  const auto eff = stream(irregular_times(15, 10.0, 91), sine);
  PreprocessOptions opt;
  opt.window = window;
  return preprocess_real(mesh, eff, opt);
}

TEST(Preprocess, SinusoidAmplitudeWithinThreePercent) {
  const PreprocessedTrajectory p = smoothed_sinusoid(3);
  // Skip the truncated-window edges.
  const std::vector<double> times(p.times.begin() + 4, p.times.end() - 4);
  const MatrixXd y = p.trajectory.observations.middleRows(4, p.trajectory.length() - 8);
  EXPECT_NEAR(fitted_amplitude(times, y), 1.0, 0.03);
}

TEST(Preprocess, DefaultWindowMatchesMovingAverageGain) {
  // A 5-sample average at 15 Hz attenuates 0.5 Hz by sin(5x) / (5 sin x),
  // x = pi * 0.5 / 15, about 4.3%.
  const PreprocessedTrajectory p = smoothed_sinusoid(5);
  const double x = std::numbers::pi * 0.5 / 15.0;
  const double gain = std::sin(5.0 * x) / (5.0 * std::sin(x));
  const std::vector<double> times(p.times.begin() + 4, p.times.end() - 4);
  const MatrixXd y = p.trajectory.observations.middleRows(4, p.trajectory.length() - 8);
  EXPECT_NEAR(fitted_amplitude(times, y), gain, 0.01);
}

TEST(Preprocess, ShortOverlapIsInsufficientData) {
  const auto mesh = stream({0.0, 0.02, 0.04, 0.06}, [](double) { return VectorXd::Zero(3); });
  const auto eff = stream({0.03, 0.05, 0.07, 0.09}, [](double) { return VectorXd::Zero(3); });
  try {
    preprocess_real(mesh, eff);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInsufficientData);
  }
}

TEST(Preprocess, NonIncreasingTimestampsRejected) {
  const auto mesh = stream({0.0, 0.5, 0.5, 1.0}, [](double) { return VectorXd::Zero(3); });
  const auto eff = stream({0.0, 0.5, 1.0}, [](double) { return VectorXd::Zero(3); });
  EXPECT_THROW(preprocess_real(mesh, eff), Error);
}

TEST(MovingAverage, CenteredAndTruncated) {
  const auto s = stream({0, 1, 2, 3, 4, 5}, [](double t) { return VectorXd::Constant(1, t * t); });
  const std::vector<VectorXd> m = moving_average(s, 3);
  EXPECT_DOUBLE_EQ(m[0][0], (0.0 + 1.0) / 2.0);
  EXPECT_DOUBLE_EQ(m[2][0], (1.0 + 4.0 + 9.0) / 3.0);
  EXPECT_DOUBLE_EQ(m[5][0], (16.0 + 25.0) / 2.0);
  EXPECT_THROW(moving_average(s, 0), Error);
}

}  // namespace
}  // namespace cgpdm
