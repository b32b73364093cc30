#pragma once

// Mass-spring cloth used to generate controlled trajectories: an 8x8 grid of
// point masses hanging in the X-Z plane, its two upper corners carried by the
// end-effectors. Gravity acts along -Z.

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "cgpdm/model.hpp"

namespace cgpdm {

inline constexpr int kMeshSide = 8;
inline constexpr int kMeshPoints = kMeshSide * kMeshSide;
inline constexpr int kObservationDim = 3 * kMeshPoints;  // 192
inline constexpr int kControlDim = 6;
// Grid indices (row-major, row 0 on top) of the attached corners; the right
// effector is listed first in every control vector.
inline constexpr int kRightCorner = 0;
inline constexpr int kLeftCorner = kMeshSide - 1;

using PointMatrix = Eigen::Matrix<double, kMeshPoints, 3, Eigen::RowMajor>;
using CornerDisplacement = Eigen::Matrix<double, 2, 3, Eigen::RowMajor>;

struct ClothParams {
  double side_length = 0.3;      // m
  double point_mass = 0.005;     // kg
  double k_structural = 80.0;    // N/m
  double k_shear = 40.0;
  double k_bend = 20.0;
  double damping = 0.02;         // N s/m, on absolute velocity
  double gravity = 9.81;         // m/s^2
  int substeps = 50;
  double step_duration = 0.05;   // s per control step
  double settle_time = 2.0;      // s of pre-roll before recording

  void validate() const;
};

struct ControlLawParams {
  double amplitude = 0.01;  // m
  double gamma_deg = 0.0;
  double f_y = 0.45;        // Hz
  double f_z = 0.45;        // Hz
  int steps = 100;          // N observations
  double dt = 0.05;         // s

  void validate() const;
};

struct MeshState {
  PointMatrix positions = PointMatrix::Zero();
  PointMatrix velocities = PointMatrix::Zero();
};

enum class SpringKind { kStructural, kShear, kBend };

struct Spring {
  int a = 0;
  int b = 0;
  double rest_length = 0.0;
  double stiffness = 0.0;
  SpringKind kind = SpringKind::kStructural;
};

std::vector<Spring> build_springs(const ClothParams& params);

// (N-1) x 6 control matrix; row t holds the displacement of both
// end-effectors between steps t and t+1:
//   dX = 0
//   dY = -A cos(gamma) cos(2 pi f_Y t dt)
//   dZ =  A sin(gamma) cos(2 pi f_Z t dt)
MatrixXd control_sequence(const ControlLawParams& law);

class ClothSimulator {
 public:
  explicit ClothSimulator(ClothParams params = {});

  const ClothParams& params() const { return params_; }
  const std::vector<Spring>& springs() const { return springs_; }

  // Flat sheet hanging straight down from the corners, at rest.
  MeshState flat_start() const;
  // flat_start() after the settling pre-roll with the corners held still.
  MeshState settled_start() const;

  // Advances one control step. Corners move linearly to their displaced
  // positions over the substeps; free points follow semi-implicit Euler.
  // `step_index` only labels the blow-up error.
  MeshState step(const MeshState& state, const CornerDisplacement& corners,
                 long step_index = 0) const;

  double kinetic_energy(const MeshState& state) const;
  // Gravitational (zero at z = 0) plus elastic energy.
  double potential_energy(const MeshState& state) const;

 private:
  ClothParams params_;
  std::vector<Spring> springs_;
};

MeshState simulate_step(const MeshState& state,
                        const CornerDisplacement& corners,
                        const ClothParams& params);

// Flattened observation: point-major (x, y, z) per grid point.
Eigen::VectorXd flatten(const PointMatrix& positions);

// Trajectory of law.steps frames from the settled start.
Trajectory generate_trajectory(const ControlLawParams& law,
                               const ClothParams& cloth = {});

struct DatasetSample {
  int index = 0;
  double gamma_deg = 0.0;
  double f_y = 0.0;
  double f_z = 0.0;
  std::uint64_t seed = 0;
};

struct GeneratedDataset {
  double range_deg = 0.0;
  std::vector<Trajectory> trajectories;
  std::vector<DatasetSample> samples;
};

// gamma ~ U[-R/2, R/2] deg, f_Y, f_Z ~ U[0.3, 0.6] Hz, drawn in index order
// from a generator seeded with `seed`.
GeneratedDataset generate_dataset(double range_deg, int count,
                                  std::uint64_t seed,
                                  const ClothParams& cloth = {},
                                  const ControlLawParams& base = {});

// CSV columns: index, gamma_deg, fY_hz, fZ_hz, seed.
std::string samples_csv(const std::vector<DatasetSample>& samples);

}  // namespace cgpdm
