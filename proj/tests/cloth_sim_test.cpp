#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "cgpdm/cloth_sim.hpp"
#include "cgpdm/error.hpp"

namespace cgpdm {
namespace {

std::map<SpringKind, int> count_by_kind(const std::vector<Spring>& springs) {
  std::map<SpringKind, int> counts;
  for (const Spring& s : springs) ++counts[s.kind];
  return counts;
}

// Sheet lying in the horizontal X-Y plane, at rest.
MeshState horizontal_start(const ClothParams& p) {
  const double h = p.side_length / (kMeshSide - 1);
  MeshState s;
  for (int r = 0; r < kMeshSide; ++r) {
    for (int c = 0; c < kMeshSide; ++c) s.positions.row(r * kMeshSide + c) << c * h, r * h, 0.0;
  }
  return s;
}

double total_energy(const ClothSimulator& sim, const MeshState& s) {
  return sim.kinetic_energy(s) + sim.potential_energy(s);
}

// ---- topology ----

TEST(ClothTopology, SpringCounts) {
  const std::map<SpringKind, int> counts = count_by_kind(build_springs({}));
  EXPECT_EQ(counts.at(SpringKind::kStructural), 112);
  EXPECT_EQ(counts.at(SpringKind::kShear), 98);
  EXPECT_EQ(counts.at(SpringKind::kBend), 96);
}

TEST(ClothTopology, RestLengthsMatchGridSpacing) {
  const ClothParams p;
  const double h = p.side_length / (kMeshSide - 1);
  for (const Spring& s : build_springs(p)) {
    const double expected = s.kind == SpringKind::kStructural ? h
                            : s.kind == SpringKind::kShear    ? h * std::sqrt(2.0)
                                                              : 2.0 * h;
    EXPECT_NEAR(s.rest_length, expected, 1e-15);
  }
}

// ---- control law ----

TEST(ControlSequence, FirstStepAtZeroAngle) {
  ControlLawParams law;
  law.gamma_deg = 0.0;
  const MatrixXd u = control_sequence(law);
  ASSERT_EQ(u.rows(), 99);
  ASSERT_EQ(u.cols(), 6);
  for (int e = 0; e < 2; ++e) {
    EXPECT_EQ(u(0, 3 * e + 0), 0.0);
    EXPECT_DOUBLE_EQ(u(0, 3 * e + 1), -0.01);
    EXPECT_DOUBLE_EQ(u(0, 3 * e + 2), 0.0);
  }
}

TEST(ControlSequence, FirstStepAtRightAngle) {
  ControlLawParams law;
  law.gamma_deg = 90.0;
  const MatrixXd u = control_sequence(law);
  EXPECT_NEAR(u(0, 1), 0.0, 1e-17);
  EXPECT_DOUBLE_EQ(u(0, 2), 0.01);
}

TEST(ControlSequence, HalfPeriodSignChange) {
  ControlLawParams law;
  law.f_y = law.f_z = 0.5;
  law.gamma_deg = 20.0;
  const MatrixXd u = control_sequence(law);
  EXPECT_LT(u(0, 1), 0.0);
  EXPECT_GT(u(20, 1), 0.0);
  EXPECT_GT(u(0, 2), 0.0);
  EXPECT_LT(u(20, 2), 0.0);
  EXPECT_NEAR(u(20, 1), -u(0, 1), 1e-15);
}

TEST(ControlSequence, EffectorsShareCommandsAndXIsZero) {
  ControlLawParams law;
  law.gamma_deg = -12.0;
  law.f_y = 0.33;
  law.f_z = 0.58;
  const MatrixXd u = control_sequence(law);
  EXPECT_EQ(u.leftCols(3), u.rightCols(3));
  EXPECT_EQ(u.col(0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ControlSequence, InvalidParameters) {
  ControlLawParams law;
  law.f_y = 0.0;
  EXPECT_THROW(control_sequence(law), Error);
  law = {};
  law.amplitude = -0.01;
  EXPECT_THROW(control_sequence(law), Error);
}

// ---- integrator ----

TEST(ClothStep, EquilibriumIsPreserved) {
  ClothParams p;
  p.gravity = 0.0;
  const ClothSimulator sim(p);
  const MeshState s0 = sim.flat_start();
  const MeshState s1 = sim.step(s0, CornerDisplacement::Zero());
  EXPECT_LT((s1.positions - s0.positions).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT(s1.velocities.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ClothStep, RigidTranslationWithoutForces) {
  ClothParams p;
  p.gravity = 0.0;
  p.damping = 0.0;  // damping acts on absolute velocity
  const ClothSimulator sim(p);
  const Eigen::RowVector3d v(0.1, -0.2, 0.05);
  MeshState s0 = sim.flat_start();
  s0.velocities.rowwise() = v;
  CornerDisplacement disp;
  disp.row(0) = v * p.step_duration;
  disp.row(1) = v * p.step_duration;
  const MeshState s1 = sim.step(s0, disp);
  PointMatrix expected = s0.positions;
  expected.rowwise() += v * p.step_duration;
  EXPECT_LT((s1.positions - expected).cwiseAbs().maxCoeff(), 1e-12);
  PointMatrix v_expected = s0.velocities;
  EXPECT_LT((s1.velocities - v_expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ClothStep, EnergyDoesNotGrowWithFixedCorners) {
  // Fixed corners do no work, so mechanical energy can only be dissipated.
  const ClothParams p;
  const ClothSimulator sim(p);
  MeshState s = horizontal_start(p);
  double energy = total_energy(sim, s);
  for (int k = 0; k < 100; ++k) {
    s = sim.step(s, CornerDisplacement::Zero(), k);
    const double next = total_energy(sim, s);
    EXPECT_LE(next, energy + 1e-12) << "step " << k;
    energy = next;
  }
}

TEST(ClothStep, CornersTrackIntegratedCommands) {
  ControlLawParams law;
  law.gamma_deg = 25.0;
  law.f_y = 0.41;
  law.f_z = 0.57;
  const MatrixXd u = control_sequence(law);
  const ClothSimulator sim;
  MeshState s = sim.settled_start();
  Eigen::RowVector3d right = s.positions.row(kRightCorner);
  Eigen::RowVector3d left = s.positions.row(kLeftCorner);
  for (int t = 0; t < u.rows(); ++t) {
    CornerDisplacement disp;
    disp.row(0) = u.row(t).segment<3>(0);
    disp.row(1) = u.row(t).segment<3>(3);
    s = sim.step(s, disp, t);
    right += disp.row(0);
    left += disp.row(1);
    const double tol = 1e-12 * (t + 1);
    EXPECT_LT((s.positions.row(kRightCorner) - right).cwiseAbs().maxCoeff(), tol);
    EXPECT_LT((s.positions.row(kLeftCorner) - left).cwiseAbs().maxCoeff(), tol);
  }
}

TEST(ClothStep, KineticEnergyDecaysWhenControlsStop) {
  const ClothParams p;
  const ClothSimulator sim(p);
  MeshState s = sim.flat_start();
  s.velocities.col(1).setConstant(0.3);  // initial swing out of plane
  s.velocities.row(kRightCorner).setZero();
  s.velocities.row(kLeftCorner).setZero();
  const int per_second = static_cast<int>(std::lround(1.0 / p.step_duration));
  std::vector<double> ke;
  for (int k = 0; k <= 5 * per_second; ++k) {
    ke.push_back(sim.kinetic_energy(s));
    s = sim.step(s, CornerDisplacement::Zero(), k);
  }
  for (std::size_t t = per_second; t + per_second < ke.size(); ++t) {
    EXPECT_LT(ke[t + per_second], ke[t]) << "t = " << t;
  }
}

TEST(ClothStep, BlowUpIsReported) {
  ClothParams p;
  p.substeps = 1;
  p.k_structural = 1e9;
  const ClothSimulator sim(p);
  MeshState s = sim.flat_start();
  s.positions(10, 1) += 0.05;
  try {
    for (long k = 0; k < 200; ++k) s = sim.step(s, CornerDisplacement::Zero(), k);
    FAIL() << "no blow-up";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIntegrationBlowup);
  }
}

TEST(ClothParams, Validation) {
  ClothParams p;
  p.substeps = 0;
  EXPECT_THROW(ClothSimulator{p}, Error);
  p = {};
  p.point_mass = 0.0;
  EXPECT_THROW(ClothSimulator{p}, Error);
}

// ---- trajectories and datasets ----

TEST(GenerateTrajectory, Shapes) {
  const Trajectory t = generate_trajectory({});
  EXPECT_EQ(t.observations.rows(), 100);
  EXPECT_EQ(t.observations.cols(), 192);
  EXPECT_EQ(t.controls.rows(), 99);
  EXPECT_EQ(t.controls.cols(), 6);
  EXPECT_DOUBLE_EQ(t.dt, 0.05);
}

TEST(GenerateTrajectory, PointMajorLayout) {
  const Trajectory t = generate_trajectory({});
  const ClothSimulator sim;
  const MeshState start = sim.settled_start();
  for (int i = 0; i < kMeshPoints; ++i) {
    for (int c = 0; c < 3; ++c) EXPECT_EQ(t.observations(0, 3 * i + c), start.positions(i, c));
  }
}

TEST(GenerateTrajectory, ZeroAmplitudeSettles) {
  ControlLawParams law;
  law.amplitude = 0.0;
  const Trajectory t = generate_trajectory(law);
  const MatrixXd tail = t.observations.bottomRows(20);
  double worst = 0.0;
  for (Index r = 1; r < tail.rows(); ++r) {
    for (int i = 0; i < kMeshPoints; ++i) {
      worst = std::max(worst, (tail.row(r).segment<3>(3 * i) - tail.row(0).segment<3>(3 * i)).norm());
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(GenerateTrajectory, Deterministic) {
  ControlLawParams law;
  law.gamma_deg = 7.0;
  EXPECT_EQ(generate_trajectory(law).observations, generate_trajectory(law).observations);
}

TEST(GenerateDataset, ZeroRangeGivesZeroAngles) {
  const GeneratedDataset d = generate_dataset(0.0, 4, 3);
  ASSERT_EQ(d.samples.size(), 4u);
  for (const DatasetSample& s : d.samples) {
    EXPECT_EQ(s.gamma_deg, 0.0);
    EXPECT_GE(s.f_y, 0.3);
    EXPECT_LE(s.f_y, 0.6);
  }
}

TEST(GenerateDataset, SameSeedSameLogAndData) {
  const GeneratedDataset a = generate_dataset(30.0, 3, 11);
  const GeneratedDataset b = generate_dataset(30.0, 3, 11);
  EXPECT_EQ(samples_csv(a.samples), samples_csv(b.samples));
  for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
    EXPECT_EQ(a.trajectories[i].observations, b.trajectories[i].observations);
  }
  const GeneratedDataset c = generate_dataset(30.0, 3, 12);
  EXPECT_NE(samples_csv(a.samples), samples_csv(c.samples));
}

TEST(GenerateDataset, AnglesWithinRange) {
  const GeneratedDataset d = generate_dataset(60.0, 20, 5);
  for (const DatasetSample& s : d.samples) {
    EXPECT_GE(s.gamma_deg, -30.0);
    EXPECT_LE(s.gamma_deg, 30.0);
    EXPECT_GE(s.f_z, 0.3);
    EXPECT_LE(s.f_z, 0.6);
  }
  EXPECT_EQ(samples_csv(d.samples).substr(0, 31), "index,gamma_deg,fY_hz,fZ_hz,see");
}

TEST(GenerateDataset, RejectsNegativeRange) {
  EXPECT_THROW(generate_dataset(-1.0, 2, 1), Error);
}

}  // namespace
}  // namespace cgpdm
