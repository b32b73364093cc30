#pragma once

// Trajectory (.traj) and model (.cgpdm) files are JSON documents carrying a
// schema_version. Numbers are written in shortest round-trip form, so a
// save/load cycle reproduces every double exactly. See docs/file_formats.md.

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cgpdm/model.hpp"

namespace cgpdm {

inline constexpr int kTrajectorySchemaVersion = 1;
inline constexpr int kModelSchemaVersion = 1;

std::string trajectory_to_json(const Trajectory& trajectory);
// Throws kSchema naming the offending field (e.g. "U[3]") on malformed input.
Trajectory trajectory_from_json(const std::string& text);

void save_trajectory(const std::filesystem::path& path,
                     const Trajectory& trajectory);
Trajectory load_trajectory(const std::filesystem::path& path);

std::string model_to_json(const CgpdmModel& model);

struct LoadedModel {
  CgpdmModel model;
  // Non-fatal findings, such as a training-data hash that no longer matches.
  std::vector<std::string> warnings;
};

// `expected` rejects a file of the other variant with kVariant.
LoadedModel model_from_json(const std::string& text,
                            std::optional<ModelVariant> expected = {});

void save_model(const std::filesystem::path& path, const CgpdmModel& model);
LoadedModel load_model(const std::filesystem::path& path,
                       std::optional<ModelVariant> expected = {});

// Writes `contents` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

struct TimedSample {
  double time = 0.0;  // seconds
  VectorXd value;
};

struct PreprocessOptions {
  int window = 5;            // moving-average length in samples
  double target_rate = 20.0;  // Hz
};

struct PreprocessedTrajectory {
  Trajectory trajectory;
  std::vector<double> times;  // grid instants, uniform at 1 / target_rate
};

// Smooths each stream with a centered moving average (truncated at the ends),
// linearly interpolates both onto a common grid spanning their overlap and
// derives controls as consecutive differences of the effector positions.
PreprocessedTrajectory preprocess_real(const std::vector<TimedSample>& mesh,
                                       const std::vector<TimedSample>& effector,
                                       const PreprocessOptions& options = {});

// Centered moving average by sample index; exposed for testing.
std::vector<VectorXd> moving_average(const std::vector<TimedSample>& samples,
                                     int window);

}  // namespace cgpdm
