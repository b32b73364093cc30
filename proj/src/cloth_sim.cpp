#include "cgpdm/cloth_sim.hpp"

#include <cmath>
#include <exception>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "cgpdm/error.hpp"

namespace cgpdm {
namespace {

constexpr const char* kModule = "cloth-sim";

int grid_index(int row, int col) { return row * kMeshSide + col; }

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::kInput, kModule, what);
}

}  // namespace

void ClothParams::validate() const {
  require(side_length > 0 && point_mass > 0 && k_structural > 0 &&
              k_shear > 0 && k_bend > 0 && step_duration > 0,
          "cloth size, mass, stiffness and step duration must be positive");
  require(damping >= 0 && gravity >= 0 && settle_time >= 0,
          "damping, gravity and settle time must be non-negative");
  require(substeps >= 1, "cloth substeps must be at least 1");
}

void ControlLawParams::validate() const {
  require(amplitude >= 0.0 && std::isfinite(amplitude),
          "control amplitude must be non-negative");
  require(f_y > 0.0 && f_z > 0.0, "oscillation frequencies must be positive");
  require(steps >= 1, "control law needs at least one step");
  require(dt > 0.0, "control timestep must be positive");
}

std::vector<Spring> build_springs(const ClothParams& params) {
  const double h = params.side_length / (kMeshSide - 1);
  std::vector<Spring> springs;
  const auto add = [&](int r0, int c0, int r1, int c1, double k, SpringKind kind) {
    if (r1 < 0 || r1 >= kMeshSide || c1 < 0 || c1 >= kMeshSide) return;
    const double rest = h * std::hypot(r1 - r0, c1 - c0);
    springs.push_back({grid_index(r0, c0), grid_index(r1, c1), rest, k, kind});
  };
  for (int r = 0; r < kMeshSide; ++r) {
    for (int c = 0; c < kMeshSide; ++c) {
      add(r, c, r, c + 1, params.k_structural, SpringKind::kStructural);
      add(r, c, r + 1, c, params.k_structural, SpringKind::kStructural);
      add(r, c, r + 1, c + 1, params.k_shear, SpringKind::kShear);
      add(r, c, r + 1, c - 1, params.k_shear, SpringKind::kShear);
      add(r, c, r, c + 2, params.k_bend, SpringKind::kBend);
      add(r, c, r + 2, c, params.k_bend, SpringKind::kBend);
    }
  }
  return springs;
}

MatrixXd control_sequence(const ControlLawParams& law) {
  law.validate();
  const double gamma = law.gamma_deg * std::numbers::pi / 180.0;
  MatrixXd u = MatrixXd::Zero(law.steps - 1, kControlDim);
  for (int t = 0; t + 1 < law.steps; ++t) {
    const double time = t * law.dt;
    const double dy =
        -law.amplitude * std::cos(gamma) * std::cos(2.0 * std::numbers::pi * law.f_y * time);
    const double dz =
        law.amplitude * std::sin(gamma) * std::cos(2.0 * std::numbers::pi * law.f_z * time);
    for (int effector = 0; effector < 2; ++effector) {
      u(t, 3 * effector + 1) = dy;
      u(t, 3 * effector + 2) = dz;
    }
  }
  return u;
}

ClothSimulator::ClothSimulator(ClothParams params)
    : params_(params), springs_(build_springs(params)) {
  params_.validate();
}

MeshState ClothSimulator::flat_start() const {
  const double h = params_.side_length / (kMeshSide - 1);
  MeshState s;
  for (int r = 0; r < kMeshSide; ++r) {
    for (int c = 0; c < kMeshSide; ++c) {
      s.positions.row(grid_index(r, c)) << c * h, 0.0, -r * h;
    }
  }
  return s;
}

MeshState ClothSimulator::settled_start() const {
  MeshState s = flat_start();
  const long steps = std::lround(params_.settle_time / params_.step_duration);
  const CornerDisplacement still = CornerDisplacement::Zero();
  for (long k = 0; k < steps; ++k) s = step(s, still, -(steps - k));
  return s;
}

MeshState ClothSimulator::step(const MeshState& state,
                               const CornerDisplacement& corners,
                               long step_index) const {
  const int substeps = params_.substeps;
  const double h = params_.step_duration / substeps;
  const double inv_mass = 1.0 / params_.point_mass;
  const int corner_ids[2] = {kRightCorner, kLeftCorner};
  Eigen::RowVector3d corner_start[2];
  for (int e = 0; e < 2; ++e) corner_start[e] = state.positions.row(corner_ids[e]);

  MeshState next = state;
  PointMatrix force;
  for (int j = 1; j <= substeps; ++j) {
    force = -params_.damping * next.velocities;
    force.col(2).array() -= params_.point_mass * params_.gravity;
    for (const Spring& s : springs_) {
      const Eigen::RowVector3d delta =
          next.positions.row(s.b) - next.positions.row(s.a);
      const double length = delta.norm();
      if (length <= 0.0) continue;
      const Eigen::RowVector3d f =
          (s.stiffness * (length - s.rest_length) / length) * delta;
      force.row(s.a) += f;
      force.row(s.b) -= f;
    }
    next.velocities += (h * inv_mass) * force;
    next.positions += h * next.velocities;

    const double fraction = static_cast<double>(j) / substeps;
    for (int e = 0; e < 2; ++e) {
      next.positions.row(corner_ids[e]) = corner_start[e] + fraction * corners.row(e);
      next.velocities.row(corner_ids[e]) = corners.row(e) / params_.step_duration;
    }
  }
  if (!next.positions.allFinite() || !next.velocities.allFinite()) {
    throw Error(ErrorKind::kIntegrationBlowup, kModule,
                "cloth state became non-finite at control step " +
                    std::to_string(step_index));
  }
  return next;
}

double ClothSimulator::kinetic_energy(const MeshState& state) const {
  return 0.5 * params_.point_mass * state.velocities.squaredNorm();
}

double ClothSimulator::potential_energy(const MeshState& state) const {
  double energy = params_.point_mass * params_.gravity * state.positions.col(2).sum();
  for (const Spring& s : springs_) {
    const double stretch =
        (state.positions.row(s.b) - state.positions.row(s.a)).norm() - s.rest_length;
    energy += 0.5 * s.stiffness * stretch * stretch;
  }
  return energy;
}

MeshState simulate_step(const MeshState& state,
                        const CornerDisplacement& corners,
                        const ClothParams& params) {
  return ClothSimulator(params).step(state, corners);
}

Eigen::VectorXd flatten(const PointMatrix& positions) {
  return Eigen::Map<const Eigen::VectorXd>(positions.data(), kObservationDim);
}

Trajectory generate_trajectory(const ControlLawParams& law,
                               const ClothParams& cloth) {
  law.validate();
  ClothParams params = cloth;
  params.step_duration = law.dt;
  const ClothSimulator sim(params);

  Trajectory traj;
  traj.dt = law.dt;
  traj.controls = control_sequence(law);
  traj.observations.resize(law.steps, kObservationDim);

  MeshState state = sim.settled_start();
  traj.observations.row(0) = flatten(state.positions).transpose();
  for (int t = 0; t + 1 < law.steps; ++t) {
    CornerDisplacement disp;
    disp.row(0) = traj.controls.row(t).segment<3>(0);
    disp.row(1) = traj.controls.row(t).segment<3>(3);
    state = sim.step(state, disp, t);
    traj.observations.row(t + 1) = flatten(state.positions).transpose();
  }

  std::ostringstream num;
  const auto fmt = [&](double v) {
    num.str("");
    num << std::setprecision(17) << v;
    return num.str();
  };
  traj.metadata["source"] = "simulated";
  traj.metadata["amplitude_m"] = fmt(law.amplitude);
  traj.metadata["gamma_deg"] = fmt(law.gamma_deg);
  traj.metadata["fY_hz"] = fmt(law.f_y);
  traj.metadata["fZ_hz"] = fmt(law.f_z);
  return traj;
}

GeneratedDataset generate_dataset(double range_deg, int count,
                                  std::uint64_t seed, const ClothParams& cloth,
                                  const ControlLawParams& base) {
  if (!(range_deg >= 0.0) || count < 0) {
    throw Error(ErrorKind::kInput, kModule,
                "range must be non-negative and count non-negative");
  }
  GeneratedDataset out;
  out.range_deg = range_deg;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(0.3, 0.6);
  std::uniform_real_distribution<double> angle(-0.5 * range_deg, 0.5 * range_deg);
  std::vector<ControlLawParams> laws;
  for (int i = 0; i < count; ++i) {
    ControlLawParams law = base;
    law.gamma_deg = range_deg > 0.0 ? angle(rng) : 0.0;
    law.f_y = freq(rng);
    law.f_z = freq(rng);
    laws.push_back(law);
    out.samples.push_back({i, law.gamma_deg, law.f_y, law.f_z, seed});
  }
  out.trajectories.resize(static_cast<std::size_t>(count));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) {
    const auto slot = static_cast<std::size_t>(i);
    try {
      Trajectory traj = generate_trajectory(laws[slot], cloth);
      std::ostringstream r;
      r << std::setprecision(17) << range_deg;
      traj.metadata["range_deg"] = r.str();
      out.trajectories[slot] = std::move(traj);
    } catch (...) {
      failures[slot] = std::current_exception();
    }
  }
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
  return out;
}

std::string samples_csv(const std::vector<DatasetSample>& samples) {
  std::ostringstream out;
  out << "index,gamma_deg,fY_hz,fZ_hz,seed\n" << std::setprecision(17);
  for (const auto& s : samples) {
    out << s.index << ',' << s.gamma_deg << ',' << s.f_y << ',' << s.f_z << ','
        << s.seed << '\n';
  }
  return out.str();
}

}  // namespace cgpdm
