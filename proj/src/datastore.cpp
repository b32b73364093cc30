#include "cgpdm/datastore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "cgpdm/error.hpp"

namespace cgpdm {
namespace {

using nlohmann::json;

constexpr const char* kModule = "datastore";

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::kSchema, kModule, path + ": " + what);
}

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) schema_error(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) schema_error(path.empty() ? key : path + "." + key, "missing field");
  return *it;
}

std::string child(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

double read_number(const json& j, const std::string& path) {
  if (!j.is_number()) schema_error(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) schema_error(path, "value is not finite");
  return v;
}

long long read_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) schema_error(path, "expected an integer");
  return j.get<long long>();
}

std::string read_string(const json& j, const std::string& path) {
  if (!j.is_string()) schema_error(path, "expected a string");
  return j.get<std::string>();
}

VectorXd read_vector(const json& j, const std::string& path, Index expected = -1) {
  if (!j.is_array()) schema_error(path, "expected an array");
  if (expected >= 0 && static_cast<Index>(j.size()) != expected) {
    schema_error(path, "expected " + std::to_string(expected) + " values, found " +
                           std::to_string(j.size()));
  }
  VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Index>(i)] = read_number(j[i], path + "[" + std::to_string(i) + "]");
  }
  return v;
}

MatrixXd read_matrix(const json& j, const std::string& path, Index rows, Index cols) {
  if (!j.is_array()) schema_error(path, "expected an array of rows");
  if (static_cast<Index>(j.size()) != rows) {
    schema_error(path, "expected " + std::to_string(rows) + " rows, found " +
                           std::to_string(j.size()));
  }
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    m.row(i) = read_vector(j[static_cast<std::size_t>(i)],
                           path + "[" + std::to_string(i) + "]", cols)
                   .transpose();
  }
  return m;
}

void check_header(const json& doc, const std::string& kind, int version) {
  const std::string found_kind = read_string(field(doc, "kind", ""), "kind");
  if (found_kind != kind) {
    schema_error("kind", "expected '" + kind + "', found '" + found_kind + "'");
  }
  const long long v = read_integer(field(doc, "schema_version", ""), "schema_version");
  if (v != version) {
    schema_error("schema_version", "unsupported version " + std::to_string(v));
  }
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kSchema, kModule, std::string("not valid JSON: ") + e.what());
  }
}

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

json trajectory_json(const Trajectory& t) {
  t.validate();
  json doc;
  doc["schema_version"] = kTrajectorySchemaVersion;
  doc["kind"] = "trajectory";
  doc["dt"] = t.dt;
  doc["N"] = t.observations.rows();
  doc["D"] = t.observations.cols();
  doc["E"] = t.controls.cols();
  doc["metadata"] = json::object();
  for (const auto& [k, v] : t.metadata) doc["metadata"][k] = v;
  doc["Y"] = matrix_to_json(t.observations);
  doc["U"] = matrix_to_json(t.controls);
  return doc;
}

// Separates the fields with line breaks and keeps each matrix row on one line,
// so files stay diff-able without the bulk of a fully indented dump.
std::string render(const json& doc) {
  std::string out = "{\n";
  bool first = true;
  for (const auto& [key, value] : doc.items()) {
    if (!first) out += ",\n";
    first = false;
    out += "  " + json(key).dump() + ": ";
    if (value.is_array() && !value.empty() && value.front().is_array()) {
      out += "[\n";
      for (std::size_t i = 0; i < value.size(); ++i) {
        out += "    " + value[i].dump();
        out += i + 1 < value.size() ? ",\n" : "\n";
      }
      out += "  ]";
    } else {
      out += value.dump();
    }
  }
  out += "\n}\n";
  return out;
}

Trajectory trajectory_from_doc(const json& doc, const std::string& base) {
  Trajectory t;
  const auto p = [&](const std::string& k) { return child(base, k); };
  t.dt = read_number(field(doc, "dt", base), p("dt"));
  if (!(t.dt > 0.0)) schema_error(p("dt"), "must be positive");
  const long long n = read_integer(field(doc, "N", base), p("N"));
  const long long dim = read_integer(field(doc, "D", base), p("D"));
  const long long e = read_integer(field(doc, "E", base), p("E"));
  if (n < 1) schema_error(p("N"), "must be at least 1");
  if (dim < 1) schema_error(p("D"), "must be at least 1");
  if (e < 0) schema_error(p("E"), "must be non-negative");
  const json& y = field(doc, "Y", base);
  if (y.is_array() && static_cast<long long>(y.size()) != n) {
    schema_error(p("Y"), "has " + std::to_string(y.size()) + " rows but N is " +
                             std::to_string(n));
  }
  t.observations = read_matrix(y, p("Y"), n, dim);
  const json& u = field(doc, "U", base);
  if (u.is_array() && static_cast<long long>(u.size()) != n - 1) {
    schema_error(p("U"), "has " + std::to_string(u.size()) +
                             " rows but N - 1 is " + std::to_string(n - 1));
  }
  t.controls = read_matrix(u, p("U"), n - 1, e);
  if (const auto it = doc.find("metadata"); it != doc.end()) {
    if (!it->is_object()) schema_error(p("metadata"), "expected an object");
    for (const auto& [k, v] : it->items()) {
      t.metadata[k] = read_string(v, p("metadata." + k));
    }
  }
  return t;
}

double moving_average_value(const std::vector<TimedSample>& s, std::size_t i,
                            int window, Index c) {
  const long back = (window - 1) / 2;
  const long ahead = window - 1 - back;
  const long lo = std::max(0L, static_cast<long>(i) - back);
  const long hi = std::min(static_cast<long>(s.size()) - 1, static_cast<long>(i) + ahead);
  double sum = 0.0;
  for (long k = lo; k <= hi; ++k) sum += s[static_cast<std::size_t>(k)].value[c];
  return sum / static_cast<double>(hi - lo + 1);
}

void check_stream(const std::vector<TimedSample>& s, const std::string& name) {
  if (s.size() < 2) {
    throw Error(ErrorKind::kInsufficientData, kModule,
                name + " stream needs at least two samples");
  }
  const Index dim = s.front().value.size();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].value.size() != dim) {
      throw Error(ErrorKind::kShape, kModule,
                  name + " sample " + std::to_string(i) + " has a different dimension");
    }
    if (!std::isfinite(s[i].time) || !s[i].value.allFinite()) {
      throw Error(ErrorKind::kInput, kModule,
                  name + " sample " + std::to_string(i) + " is not finite");
    }
    if (i > 0 && !(s[i].time > s[i - 1].time)) {
      throw Error(ErrorKind::kInput, kModule,
                  name + " timestamps must be strictly increasing (sample " +
                      std::to_string(i) + ")");
    }
  }
}

// Linear interpolation of `values` (sampled at the stream's times) at `t`,
// which must lie inside the stream's time span.
VectorXd interpolate(const std::vector<TimedSample>& s,
                     const std::vector<VectorXd>& values, double t) {
  const auto it = std::upper_bound(s.begin(), s.end(), t,
                                   [](double v, const TimedSample& x) { return v < x.time; });
  if (it == s.begin()) return values.front();
  if (it == s.end()) return values.back();
  const std::size_t hi = static_cast<std::size_t>(it - s.begin());
  const std::size_t lo = hi - 1;
  const double a = (t - s[lo].time) / (s[hi].time - s[lo].time);
  return (1.0 - a) * values[lo] + a * values[hi];
}

}  // namespace

std::string trajectory_to_json(const Trajectory& trajectory) {
  return render(trajectory_json(trajectory));
}

Trajectory trajectory_from_json(const std::string& text) {
  const json doc = parse(text);
  check_header(doc, "trajectory", kTrajectorySchemaVersion);
  return trajectory_from_doc(doc, "");
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::kIo, kModule, "cannot open '" + path.string() + "' for writing");
  }
  out << contents;
  if (!out.flush()) {
    throw Error(ErrorKind::kIo, kModule, "failed writing '" + path.string() + "'");
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, kModule, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void save_trajectory(const std::filesystem::path& path, const Trajectory& trajectory) {
  write_text_file(path, trajectory_to_json(trajectory));
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  return trajectory_from_json(read_text_file(path));
}

std::string model_to_json(const CgpdmModel& model) {
  model.require_trained();
  json doc;
  doc["schema_version"] = kModelSchemaVersion;
  doc["kind"] = "cgpdm-model";
  doc["variant"] = std::string(to_string(model.variant()));
  doc["d"] = model.latent_dim();
  doc["D"] = model.observation_dim();
  doc["E"] = model.control_dim();
  doc["latent_kernel"] = vector_to_json(model.latent_params().kernel.params());
  doc["latent_scaling"] = vector_to_json(model.latent_params().w);
  doc["dynamics_kernel"] = vector_to_json(model.dynamics_params().kernel.params());
  doc["dynamics_scaling"] = vector_to_json(model.dynamics_params().w);
  doc["sequence_starts"] = model.sequence_starts();
  doc["data_hash"] = hex64(model.data_hash());

  const TrainingInfo& info = model.training_info();
  json training;
  training["status"] = std::string(to_string(info.status));
  training["warmup_iterations"] = info.warmup_iterations;
  training["iterations"] = info.iterations;
  training["initial_loss"] = info.initial_loss;
  training["final_loss"] = info.final_loss;
  training["final_grad_norm"] = info.final_grad_norm;
  training["jitter_events"] = info.jitter_events;
  training["seed"] = info.seed;
  json trace = json::array();
  for (const IterationRecord& r : info.trace) {
    trace.push_back({r.iteration, r.loss, r.grad_norm, r.step, r.evaluations,
                     r.jitter_events});
  }
  training["trace"] = std::move(trace);
  doc["training"] = std::move(training);

  doc["observation_offset"] = vector_to_json(model.observation_offset());
  doc["X"] = matrix_to_json(model.latent());
  doc["Y"] = matrix_to_json(model.observations());
  json controls = json::array();
  for (const MatrixXd& u : model.controls()) controls.push_back(matrix_to_json(u));
  doc["U"] = std::move(controls);
  return render(doc);
}

LoadedModel model_from_json(const std::string& text, std::optional<ModelVariant> expected) {
  const json doc = parse(text);
  check_header(doc, "cgpdm-model", kModelSchemaVersion);

  ModelVariant variant;
  try {
    variant = parse_model_variant(read_string(field(doc, "variant", ""), "variant"));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kVariant) throw;
    schema_error("variant", e.what());
  }
  if (expected && *expected != variant) {
    throw Error(ErrorKind::kVariant, kModule,
                "file holds a " + std::string(to_string(variant)) + " model, expected " +
                    std::string(to_string(*expected)));
  }
  const long long d = read_integer(field(doc, "d", ""), "d");
  const long long dim = read_integer(field(doc, "D", ""), "D");
  const long long e = read_integer(field(doc, "E", ""), "E");
  if (d < 1) schema_error("d", "must be at least 1");
  if (dim < 1) schema_error("D", "must be at least 1");
  if (e < 0) schema_error("E", "must be non-negative");

  const json& starts_j = field(doc, "sequence_starts", "");
  if (!starts_j.is_array() || starts_j.empty()) {
    schema_error("sequence_starts", "expected a non-empty array");
  }
  std::vector<Index> starts;
  for (std::size_t i = 0; i < starts_j.size(); ++i) {
    starts.push_back(read_integer(starts_j[i], "sequence_starts[" + std::to_string(i) + "]"));
  }

  const json& y = field(doc, "Y", "");
  if (!y.is_array()) schema_error("Y", "expected an array of rows");
  const Index n = static_cast<Index>(y.size());
  MatrixXd observations = read_matrix(y, "Y", n, dim);
  MatrixXd latent = read_matrix(field(doc, "X", ""), "X", n, d);
  VectorXd offset = read_vector(field(doc, "observation_offset", ""), "observation_offset", dim);

  const json& u = field(doc, "U", "");
  if (!u.is_array() || u.size() != starts.size()) {
    schema_error("U", "expected one control block per sequence (" +
                          std::to_string(starts.size()) + ")");
  }
  std::vector<MatrixXd> controls;
  for (std::size_t s = 0; s < u.size(); ++s) {
    const Index end = s + 1 < starts.size() ? starts[s + 1] : n;
    const Index rows = std::max<Index>(end - starts[s] - 1, 0);
    controls.push_back(read_matrix(u[s], "U[" + std::to_string(s) + "]", rows, e));
  }

  const KernelVariant ly =
      variant == ModelVariant::kHighly ? KernelVariant::kHighlyY : KernelVariant::kLowlyY;
  const KernelVariant dx =
      variant == ModelVariant::kHighly ? KernelVariant::kHighlyX : KernelVariant::kLowlyX;
  LatentMapParams lp;
  DynamicsParams dp;
  try {
    lp.kernel = Kernel::from_params(
        ly, d, read_vector(field(doc, "latent_kernel", ""), "latent_kernel",
                           Kernel::param_count(ly, d)));
    dp.kernel = Kernel::from_params(
        dx, d + e, read_vector(field(doc, "dynamics_kernel", ""), "dynamics_kernel",
                               Kernel::param_count(dx, d + e)));
  } catch (const Error& err) {
    if (err.kind() == ErrorKind::kSchema) throw;
    schema_error("latent_kernel/dynamics_kernel", err.what());
  }
  lp.w = read_vector(field(doc, "latent_scaling", ""), "latent_scaling", dim);
  dp.w = read_vector(field(doc, "dynamics_scaling", ""), "dynamics_scaling", d);

  TrainingInfo info;
  const json& t = field(doc, "training", "");
  info.status = parse_train_status(read_string(field(t, "status", "training"), "training.status"));
  info.warmup_iterations = static_cast<int>(
      read_integer(field(t, "warmup_iterations", "training"), "training.warmup_iterations"));
  info.iterations = static_cast<int>(read_integer(field(t, "iterations", "training"), "training.iterations"));
  info.initial_loss = read_number(field(t, "initial_loss", "training"), "training.initial_loss");
  info.final_loss = read_number(field(t, "final_loss", "training"), "training.final_loss");
  info.final_grad_norm = read_number(field(t, "final_grad_norm", "training"), "training.final_grad_norm");
  info.jitter_events = read_integer(field(t, "jitter_events", "training"), "training.jitter_events");
  const json& seed = field(t, "seed", "training");
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
    schema_error("training.seed", "expected an integer");
  }
  info.seed = seed.get<std::uint64_t>();
  const json& trace = field(t, "trace", "training");
  if (!trace.is_array()) schema_error("training.trace", "expected an array");
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const std::string p = "training.trace[" + std::to_string(i) + "]";
    const json& r = trace[i];
    if (!r.is_array() || r.size() != 6) schema_error(p, "expected 6 entries");
    IterationRecord rec;
    rec.iteration = static_cast<int>(read_integer(r[0], p + "[0]"));
    rec.loss = read_number(r[1], p + "[1]");
    rec.grad_norm = read_number(r[2], p + "[2]");
    rec.step = read_number(r[3], p + "[3]");
    rec.evaluations = static_cast<int>(read_integer(r[4], p + "[4]"));
    rec.jitter_events = read_integer(r[5], p + "[5]");
    info.trace.push_back(rec);
  }

  LoadedModel out;
  try {
    out.model = CgpdmModel(std::move(latent), std::move(observations), std::move(offset),
                           std::move(controls), std::move(starts), std::move(lp),
                           std::move(dp), std::move(info));
  } catch (const Error& err) {
    if (err.kind() == ErrorKind::kNotPositiveDefinite) throw;
    schema_error("model", err.what());
  }
  const std::string stored_hash = read_string(field(doc, "data_hash", ""), "data_hash");
  const std::string actual_hash = hex64(out.model.data_hash());
  if (stored_hash != actual_hash) {
    out.warnings.push_back("training data hash mismatch: file records " + stored_hash +
                           ", data hashes to " + actual_hash);
  }
  return out;
}

void save_model(const std::filesystem::path& path, const CgpdmModel& model) {
  write_text_file(path, model_to_json(model));
}

LoadedModel load_model(const std::filesystem::path& path, std::optional<ModelVariant> expected) {
  return model_from_json(read_text_file(path), expected);
}

std::vector<VectorXd> moving_average(const std::vector<TimedSample>& samples, int window) {
  if (window < 1) {
    throw Error(ErrorKind::kInput, kModule, "moving-average window must be at least 1");
  }
  std::vector<VectorXd> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Index dim = samples[i].value.size();
    out[i].resize(dim);
    for (Index c = 0; c < dim; ++c) out[i][c] = moving_average_value(samples, i, window, c);
  }
  return out;
}

PreprocessedTrajectory preprocess_real(const std::vector<TimedSample>& mesh,
                                       const std::vector<TimedSample>& effector,
                                       const PreprocessOptions& options) {
  if (!(options.target_rate > 0.0)) {
    throw Error(ErrorKind::kInput, kModule, "target rate must be positive");
  }
  check_stream(mesh, "mesh");
  check_stream(effector, "effector");
  const double h = 1.0 / options.target_rate;
  const double start = std::max(mesh.front().time, effector.front().time);
  const double stop = std::min(mesh.back().time, effector.back().time);
  if (!(stop - start >= 2.0 * h)) {
    throw Error(ErrorKind::kInsufficientData, kModule,
                "streams overlap for less than two grid steps");
  }
  const std::vector<VectorXd> mesh_s = moving_average(mesh, options.window);
  const std::vector<VectorXd> eff_s = moving_average(effector, options.window);

  PreprocessedTrajectory out;
  // A grid point landing within round-off of the overlap end still counts.
  const long count = static_cast<long>(std::floor((stop - start) / h + 1e-9)) + 1;
  const Index dim = mesh.front().value.size();
  const Index edim = effector.front().value.size();
  MatrixXd y(count, dim);
  MatrixXd positions(count, edim);
  for (long k = 0; k < count; ++k) {
    const double t = std::min(start + static_cast<double>(k) * h, stop);
    out.times.push_back(start + static_cast<double>(k) * h);
    y.row(k) = interpolate(mesh, mesh_s, t).transpose();
    positions.row(k) = interpolate(effector, eff_s, t).transpose();
  }
  out.trajectory.observations = std::move(y);
  out.trajectory.controls = positions.bottomRows(count - 1) - positions.topRows(count - 1);
  out.trajectory.dt = h;
  out.trajectory.metadata["source"] = "real";
  std::ostringstream num;
  num << std::setprecision(17) << start;
  out.trajectory.metadata["start_time_s"] = num.str();
  return out;
}

}  // namespace cgpdm
