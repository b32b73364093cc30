// cgpdm: dataset generation, training, rollout and evaluation from the shell.
//
//   cgpdm simulate   --range 30 --count 50 --seed 1 --out data/
//   cgpdm train      --data data/*.traj --out model.cgpdm
//   cgpdm rollout    --model model.cgpdm --controls data/traj_0003.traj
//   cgpdm evaluate   --model model.cgpdm --test test/*.traj
//   cgpdm experiment --ranges 30 --sizes 5,10 --seed 1 --out results/
//   cgpdm inspect    --model model.cgpdm
//
// Exit status: 0 on success, 1 on a library failure (one line on stderr,
// "error: [module] kind: message"), 2 on a usage error.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cgpdm/cloth_sim.hpp"
#include "cgpdm/datastore.hpp"
#include "cgpdm/error.hpp"
#include "cgpdm/eval.hpp"
#include "cgpdm/trainer.hpp"

namespace fs = std::filesystem;
using namespace cgpdm;

namespace {

fs::path default_out_dir() {
  const char* env = std::getenv("CGPDM_OUT_DIR");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path(".");
}

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

struct SimulateArgs {
  double range = 0.0;
  int count = 50;
  std::uint64_t seed = 0;
  int steps = 100;
  double amplitude = 0.01;
  std::string out;
};

struct TrainArgs {
  std::vector<std::string> data;
  std::string variant = "highly";
  int latent_dim = 3;
  int max_iters = 500;
  int warmup_iters = 200;
  double grad_tol = 1e-4;
  int memory = 10;
  std::uint64_t seed = 0;
  std::string out;
  std::string log;
};

struct RolloutArgs {
  std::string model;
  std::string controls;
  std::string mode = "mean";
  std::uint64_t seed = 0;
  std::string out;
};

struct EvaluateArgs {
  std::string model;
  std::vector<std::string> test;
  std::string out;
};

struct ExperimentArgs {
  std::vector<double> ranges = {30.0};
  std::vector<int> sizes = {5, 10, 15, 20};
  std::vector<std::string> variants = {"highly", "lowly"};
  int repeats = 10;
  int count = 50;
  int test_count = 10;
  int steps = 100;
  int latent_dim = 3;
  int max_iters = 500;
  int warmup_iters = 200;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out;
};

void run_simulate(const SimulateArgs& a) {
  const fs::path out = a.out.empty() ? default_out_dir() : fs::path(a.out);
  ControlLawParams base;
  base.steps = a.steps;
  base.amplitude = a.amplitude;
  const GeneratedDataset data = generate_dataset(a.range, a.count, a.seed, {}, base);
  for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
    std::ostringstream name;
    name << "traj_" << std::setw(4) << std::setfill('0') << i << ".traj";
    save_trajectory(out / name.str(), data.trajectories[i]);
  }
  write_text_file(out / "params.csv", samples_csv(data.samples));
  std::cout << "wrote " << data.trajectories.size() << " trajectories to "
            << out.string() << "\n";
}

void run_train(const TrainArgs& a, bool verbose) {
  const fs::path out =
      a.out.empty() ? default_out_dir() / "model.cgpdm" : fs::path(a.out);
  std::vector<Trajectory> dataset;
  for (const auto& path : a.data) dataset.push_back(load_trajectory(path));
  TrainConfig config;
  config.variant = parse_model_variant(a.variant);
  config.latent_dim = a.latent_dim;
  config.max_iters = a.max_iters;
  config.warmup_iters = a.warmup_iters;
  config.grad_tol = a.grad_tol;
  config.memory = a.memory;
  config.seed = a.seed;

  std::ostringstream log;
  log << "iteration,loss,grad_norm,step,evaluations,jitter_events\n";
  const CgpdmModel model = train(dataset, config, [&](const IterationRecord& r) {
    log << r.iteration << ',' << fmt(r.loss) << ',' << fmt(r.grad_norm) << ','
        << fmt(r.step) << ',' << r.evaluations << ',' << r.jitter_events << '\n';
    if (verbose) {
      std::cerr << "iter " << r.iteration << " loss " << r.loss << " |g| "
                << r.grad_norm << "\n";
    }
  });
  save_model(out, model);
  if (!a.log.empty()) write_text_file(a.log, log.str());
  const TrainingInfo& info = model.training_info();
  std::cout << "trained " << to_string(model.variant()) << " model on "
            << model.observations().rows() << " frames: "
            << to_string(info.status) << " after " << info.warmup_iterations
            << " + " << info.iterations << " iterations, loss "
            << info.initial_loss << " -> " << info.final_loss << "\n";
}

void run_rollout(const RolloutArgs& a) {
  const fs::path out =
      a.out.empty() ? default_out_dir() / "rollout.traj" : fs::path(a.out);
  const LoadedModel loaded = load_model(a.model);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
  const Trajectory source = load_trajectory(a.controls);
  const RolloutMode mode = parse_rollout_mode(a.mode);
  const VectorXd x0 =
      initial_latent_state(loaded.model, source.observations.row(0).transpose());
  const RolloutResult result = rollout(loaded.model, x0, source.controls, mode, a.seed);

  Trajectory predicted;
  predicted.observations = result.observations;
  predicted.controls = source.controls;
  predicted.dt = source.dt;
  predicted.metadata["source"] = "rollout";
  predicted.metadata["mode"] = std::string(to_string(mode));
  if (result.seed) predicted.metadata["seed"] = std::to_string(*result.seed);
  save_trajectory(out, predicted);
  std::cout << "wrote " << result.observations.rows() << "-step rollout to "
            << out.string() << "\n";
}

void run_evaluate(const EvaluateArgs& a) {
  const LoadedModel loaded = load_model(a.model);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
  std::ostringstream csv;
  csv << "file,error_m,baseline_m\n";
  for (const auto& path : a.test) {
    const TestScore score = score_trajectory(loaded.model, load_trajectory(path));
    csv << path << ',' << fmt(score.rollout_error) << ','
        << fmt(score.baseline_error) << '\n';
  }
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    write_text_file(a.out, csv.str());
  }
}

void run_experiment_cmd(const ExperimentArgs& a, bool verbose) {
  const fs::path out = a.out.empty() ? default_out_dir() : fs::path(a.out);
  ExperimentConfig config;
  config.ranges_deg = a.ranges;
  config.train_sizes = a.sizes;
  config.variants.clear();
  for (const auto& v : a.variants) config.variants.push_back(parse_model_variant(v));
  config.repeats = a.repeats;
  config.trajectories_per_range = a.count;
  config.test_count = a.test_count;
  config.steps = a.steps;
  config.latent_dim = a.latent_dim;
  config.max_iters = a.max_iters;
  config.warmup_iters = a.warmup_iters;
  config.seed = a.seed;
  config.threads = a.threads;
  config.validate();

  const ExperimentReport report = run_experiment(config);
  write_text_file(out / "report.csv", report_csv(report));
  write_text_file(out / "detail.csv", detail_csv(report));
  write_text_file(out / "report.svg", report_svg(report));
  for (const CellReport& c : report.cells) {
    for (const CellRepeat& r : c.repeats) {
      if (r.failed) {
        std::cerr << "warning: cell R=" << c.range_deg << " n=" << c.train_size
                  << " " << to_string(c.variant) << " repeat " << r.repeat
                  << " failed: " << r.failure << "\n";
      }
    }
  }
  if (verbose) std::cerr << report_csv(report);
  std::cout << "wrote report for " << report.cells.size() << " cells to "
            << out.string() << "\n";
}

void run_inspect(const std::string& path) {
  const LoadedModel loaded = load_model(path);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
  const CgpdmModel& m = loaded.model;
  const TrainingInfo& info = m.training_info();
  const Eigen::IOFormat row(6, Eigen::DontAlignCols, " ", " ");
  std::cout << "variant          " << to_string(m.variant()) << "\n"
            << "dimensions       d=" << m.latent_dim() << " D=" << m.observation_dim()
            << " E=" << m.control_dim() << "\n"
            << "sequences        " << m.sequence_starts().size() << " ("
            << m.latent().rows() << " frames, " << m.dynamics_data().size()
            << " transitions)\n"
            << "training         " << to_string(info.status) << ", "
            << info.warmup_iterations << " warm-up + " << info.iterations
            << " joint iterations, loss " << info.initial_loss << " -> "
            << info.final_loss << ", |grad|_inf " << info.final_grad_norm
            << ", jitter events " << info.jitter_events << "\n"
            << "latent kernel    " << m.latent_params().kernel.params().transpose().format(row)
            << "\n"
            << "latent scaling   min " << m.latent_params().w.minCoeff() << " max "
            << m.latent_params().w.maxCoeff() << "\n"
            << "dynamics kernel  "
            << m.dynamics_params().kernel.params().transpose().format(row) << "\n"
            << "dynamics scaling " << m.dynamics_params().w.transpose().format(row) << "\n"
            << "jitter           K_y " << m.latent_factor().jitter_applied << ", K_x "
            << m.dynamics_factor().jitter_applied << "\n"
            << "latent range     min "
            << m.latent().colwise().minCoeff().format(row) << " | max "
            << m.latent().colwise().maxCoeff().format(row) << "\n";
  const Index shown = std::min<Index>(m.latent().rows(), 5);
  for (Index i = 0; i < shown; ++i) {
    std::cout << "  X[" << i << "] " << m.latent().row(i).format(row) << "\n";
  }
  if (m.latent().rows() > shown) {
    std::cout << "  ... " << m.latent().rows() - shown << " more rows\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Controlled Gaussian process dynamical models"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Progress on stderr");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate cloth trajectories");
  simulate->add_option("--range", sim.range, "Movement range R in degrees")
      ->required()->check(CLI::NonNegativeNumber);
  simulate->add_option("--count", sim.count, "Number of trajectories")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "Random seed")->required();
  simulate->add_option("--steps", sim.steps, "Frames per trajectory")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--amplitude", sim.amplitude, "Control amplitude in meters")
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--out", sim.out, "Output directory (default $CGPDM_OUT_DIR or .)");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on trajectory files");
  train_cmd->add_option("--data", tr.data, "Trajectory files")
      ->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--variant", tr.variant, "highly or lowly")
      ->check(CLI::IsMember({"highly", "lowly"}));
  train_cmd->add_option("--latent-dim", tr.latent_dim, "Latent dimension d")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--max-iters", tr.max_iters, "Joint L-BFGS iterations")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--warmup-iters", tr.warmup_iters,
                        "Hyper-parameter iterations before the joint phase")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--grad-tol", tr.grad_tol, "Gradient infinity-norm tolerance")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--memory", tr.memory, "L-BFGS history length")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tr.seed, "Seed recorded with the model");
  train_cmd->add_option("--out", tr.out, "Model file (default $CGPDM_OUT_DIR/model.cgpdm)");
  train_cmd->add_option("--log", tr.log, "Training log CSV");

  RolloutArgs ro;
  auto* rollout_cmd = app.add_subcommand("rollout", "Predict a trajectory under given controls");
  rollout_cmd->add_option("--model", ro.model, "Model file")
      ->required()->check(CLI::ExistingFile);
  rollout_cmd->add_option("--controls", ro.controls,
                          "Trajectory file supplying U and the first frame")
      ->required()->check(CLI::ExistingFile);
  rollout_cmd->add_option("--mode", ro.mode, "mean or sample")
      ->check(CLI::IsMember({"mean", "sample"}));
  rollout_cmd->add_option("--seed", ro.seed, "Seed for sample mode");
  rollout_cmd->add_option("--out", ro.out, "Output trajectory (default $CGPDM_OUT_DIR/rollout.traj)");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score a model on test trajectories");
  evaluate->add_option("--model", ev.model, "Model file")
      ->required()->check(CLI::ExistingFile);
  evaluate->add_option("--test", ev.test, "Test trajectory files")
      ->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", ev.out, "CSV output (default stdout)");

  ExperimentArgs ex;
  auto* experiment = app.add_subcommand("experiment", "Run the error-versus-data grid");
  experiment->add_option("--ranges", ex.ranges, "Movement ranges in degrees")
      ->delimiter(',')->check(CLI::NonNegativeNumber);
  experiment->add_option("--sizes", ex.sizes, "Training-set sizes")
      ->delimiter(',')->check(CLI::PositiveNumber);
  experiment->add_option("--variants", ex.variants, "highly and/or lowly")
      ->delimiter(',')->check(CLI::IsMember({"highly", "lowly"}));
  experiment->add_option("--repeats", ex.repeats, "Training subsets per cell")
      ->check(CLI::PositiveNumber);
  experiment->add_option("--count", ex.count, "Trajectories generated per range")
      ->check(CLI::PositiveNumber);
  experiment->add_option("--test-count", ex.test_count, "Held-out trajectories per range")
      ->check(CLI::PositiveNumber);
  experiment->add_option("--steps", ex.steps, "Frames per trajectory")
      ->check(CLI::PositiveNumber);
  experiment->add_option("--latent-dim", ex.latent_dim, "Latent dimension d")
      ->check(CLI::PositiveNumber);
  experiment->add_option("--max-iters", ex.max_iters, "Joint L-BFGS iterations")
      ->check(CLI::PositiveNumber);
  experiment->add_option("--warmup-iters", ex.warmup_iters,
                         "Hyper-parameter iterations before the joint phase")
      ->check(CLI::NonNegativeNumber);
  experiment->add_option("--seed", ex.seed, "Random seed")->required();
  experiment->add_option("--threads", ex.threads, "Concurrent cells (0 = OpenMP default)")
      ->check(CLI::NonNegativeNumber);
  experiment->add_option("--out", ex.out, "Output directory (default $CGPDM_OUT_DIR or .)");

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "Summarize a model file");
  inspect->add_option("--model", inspect_path, "Model file")
      ->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (simulate->parsed()) run_simulate(sim);
    if (train_cmd->parsed()) run_train(tr, verbose);
    if (rollout_cmd->parsed()) run_rollout(ro);
    if (evaluate->parsed()) run_evaluate(ev);
    if (experiment->parsed()) run_experiment_cmd(ex, verbose);
    if (inspect->parsed()) run_inspect(inspect_path);
  } catch (const Error& e) {
    std::cerr << "error: [" << e.module() << "] " << to_string(e.kind()) << ": "
              << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: [cli] io: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
