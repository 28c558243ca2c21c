#include "gpode/experiment.hpp"

#include "gpode/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

namespace gpode {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error(ErrorCode::Config, "key '" + key + "': not a number: '" + v + "'");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error(ErrorCode::Config, "key '" + key + "': not an integer: '" + v + "'");
  }
}

Seed parse_seed(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size() || v.front() == '-') throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error(ErrorCode::Config, "key '" + key + "': not a seed: '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string s = lower(v);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw Error(ErrorCode::Config, "key '" + key + "': not a boolean: '" + v + "'");
}

std::vector<double> parse_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(parse_double(key, s));
  return out;
}

// "BDF3" -> (BDF, 3)
std::pair<SchemeKind, int> parse_cell(const std::string& s) {
  std::size_t split = s.size();
  while (split > 0 && std::isdigit(static_cast<unsigned char>(s[split - 1]))) --split;
  if (split == 0 || split == s.size())
    throw Error(ErrorCode::Config, "suite cell '" + s + "' is not <scheme><order>");
  try {
    return {scheme_kind_from_string(s.substr(0, split)), std::stoi(s.substr(split))};
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
}

template <class F>
auto as_config_error(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults_for(const std::string& system) {
  ExperimentConfig c;
  c.system = system;
  if (system == "vdp") {
    c.x0 = {2.0, 0.0};
    c.h = 0.1;
    c.irregularity = 0.5;
    c.n_steps = 100;
    c.train_steps = 50;
  } else if (system == "dho") {
    c.x0 = {2.0, 0.0};
    c.h = 0.01;
    c.irregularity = 0.0;
    c.n_steps = 1000;
    c.train_steps = 500;
  } else if (system.rfind("csv:", 0) == 0) {
    c.n_steps = 0;
    c.train_steps = 0;
  } else {
    throw Error(ErrorCode::Config, "unknown system '" + system + "'");
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  ExperimentConfig c = std::move(base);
  std::vector<std::pair<std::string, std::string>> entries;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::Config, "line " + std::to_string(lineno) + ": expected key = value");
    entries.emplace_back(lower(trim(line.substr(0, eq))), trim(line.substr(eq + 1)));
  }
  // The system sets the defaults everything else overrides.
  for (const auto& [k, v] : entries) {
    if (k != "system") continue;
    const std::string sys = v.rfind("csv:", 0) == 0 ? v : lower(v);
    ExperimentConfig d = ExperimentConfig::defaults_for(sys);
    c.system = d.system;
    c.x0 = d.x0;
    c.h = d.h;
    c.irregularity = d.irregularity;
    c.n_steps = d.n_steps;
    c.train_steps = d.train_steps;
  }
  bool family_set = false;
  for (const auto& [k, v] : entries) {
    if (k == "system") continue;
    if (k == "x0") c.x0 = parse_doubles(k, v);
    else if (k == "t0") c.t0 = parse_double(k, v);
    else if (k == "h") c.h = parse_double(k, v);
    else if (k == "irregularity" || k == "b") c.irregularity = parse_double(k, v);
    else if (k == "n_steps") c.n_steps = parse_int(k, v);
    else if (k == "train_steps") c.train_steps = parse_int(k, v);
    else if (k == "noise_sigma") c.noise_sigma = parse_doubles(k, v);
    else if (k == "scheme") c.model.kind = as_config_error([&] { return scheme_kind_from_string(v); });
    else if (k == "order") c.model.order = static_cast<int>(parse_int(k, v));
    else if (k == "family") {
      c.model.family = as_config_error([&] { return kernel_family_from_string(v); });
      family_set = true;
    } else if (k == "noise") c.model.noise = as_config_error([&] { return noise_variant_from_string(v); });
    else if (k == "iterations") c.train.iterations = static_cast<int>(parse_int(k, v));
    else if (k == "pretrain_iterations") c.train.pretrain_iterations = static_cast<int>(parse_int(k, v));
    else if (k == "learning_rate") c.train.learning_rate = parse_double(k, v);
    else if (k == "jitter") c.train.jitter = parse_double(k, v);
    else if (k == "restarts") c.train.restarts = static_cast<int>(parse_int(k, v));
    else if (k == "patience") c.train.patience = static_cast<int>(parse_int(k, v));
    else if (k == "pretrain_euler") c.train.pretrain_euler = parse_bool(k, v);
    else if (k == "gradient") {
      const std::string s = lower(v);
      if (s == "analytic") c.train.gradient = GradientMode::Analytic;
      else if (s == "fd" || s == "finite-difference") c.train.gradient = GradientMode::FiniteDifference;
      else throw Error(ErrorCode::Config, "gradient must be analytic or fd");
    } else if (k == "integrator") {
      const std::string s = lower(v);
      if (s == "rk45") c.integrator = PredictIntegrator::RK45;
      else if (s == "training") c.integrator = PredictIntegrator::Training;
      else throw Error(ErrorCode::Config, "integrator must be rk45 or training");
    } else if (k == "mode") {
      const std::string s = lower(v);
      if (s == "ds") c.mode = PredictMode::DS;
      else if (s == "mean") c.mode = PredictMode::Mean;
      else throw Error(ErrorCode::Config, "mode must be ds or mean");
    } else if (k == "n_samples") c.n_samples = parse_int(k, v);
    else if (k == "features") c.features = parse_int(k, v);
    else if (k == "rtol") c.rtol = parse_double(k, v);
    else if (k == "atol") c.atol = parse_double(k, v);
    else if (k == "seed") c.seed = parse_seed(k, v);
    else if (k == "output_dir") c.output_dir = v;
    else if (k == "cells") {
      c.suite_cells.clear();
      for (const auto& s : split_list(v)) c.suite_cells.push_back(parse_cell(s));
    } else if (k == "seeds") {
      c.suite_seeds.clear();
      for (const auto& s : split_list(v)) c.suite_seeds.push_back(parse_seed(k, s));
    } else {
      throw Error(ErrorCode::Config, "unknown key '" + k + "'");
    }
  }
  if (!family_set && c.model.kind == SchemeKind::Taylor && c.model.family == KernelFamily::ARD)
    c.model.family = KernelFamily::TaylorIndependent;

  if (c.h <= 0.0) throw Error(ErrorCode::Config, "h must be positive");
  if (c.irregularity < 0.0 || c.irregularity >= 2.0)
    throw Error(ErrorCode::Config, "irregularity must lie in [0, 2)");
  if (c.system.rfind("csv:", 0) != 0) {
    if (c.n_steps < 2) throw Error(ErrorCode::Config, "n_steps must be at least 2");
    if (c.train_steps < 2 || c.train_steps > c.n_steps)
      throw Error(ErrorCode::Config, "train_steps must lie in [2, n_steps]");
  }
  if (c.model.order < 1) throw Error(ErrorCode::Config, "order must be positive");
  if (c.n_samples < 1 || c.features < 1)
    throw Error(ErrorCode::Config, "n_samples and features must be positive");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Config, "cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string to_config_string(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "system = " << c.system << '\n'
     << "x0 = " << join(c.x0) << '\n'
     << "t0 = " << fmt(c.t0) << '\n'
     << "h = " << fmt(c.h) << '\n'
     << "irregularity = " << fmt(c.irregularity) << '\n'
     << "n_steps = " << c.n_steps << '\n'
     << "train_steps = " << c.train_steps << '\n'
     << "noise_sigma = " << join(c.noise_sigma) << '\n'
     << "scheme = " << to_string(c.model.kind) << '\n'
     << "order = " << c.model.order << '\n'
     << "family = " << to_string(c.model.family) << '\n'
     << "noise = " << to_string(c.model.noise) << '\n'
     << "iterations = " << c.train.iterations << '\n'
     << "pretrain_iterations = " << c.train.pretrain_iterations << '\n'
     << "learning_rate = " << fmt(c.train.learning_rate) << '\n'
     << "jitter = " << fmt(c.train.jitter) << '\n'
     << "restarts = " << c.train.restarts << '\n'
     << "patience = " << c.train.patience << '\n'
     << "pretrain_euler = " << (c.train.pretrain_euler ? "true" : "false") << '\n'
     << "gradient = " << (c.train.gradient == GradientMode::Analytic ? "analytic" : "fd") << '\n'
     << "integrator = " << (c.integrator == PredictIntegrator::RK45 ? "rk45" : "training") << '\n'
     << "mode = " << (c.mode == PredictMode::DS ? "ds" : "mean") << '\n'
     << "n_samples = " << c.n_samples << '\n'
     << "features = " << c.features << '\n'
     << "rtol = " << fmt(c.rtol) << '\n'
     << "atol = " << fmt(c.atol) << '\n'
     << "seed = " << c.seed << '\n';
  if (!c.suite_cells.empty()) {
    os << "cells = ";
    for (std::size_t i = 0; i < c.suite_cells.size(); ++i)
      os << (i ? "," : "") << to_string(c.suite_cells[i].first) << c.suite_cells[i].second;
    os << '\n';
  }
  if (!c.suite_seeds.empty()) {
    os << "seeds = ";
    for (std::size_t i = 0; i < c.suite_seeds.size(); ++i) os << (i ? "," : "") << c.suite_seeds[i];
    os << '\n';
  }
  return os.str();
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  // The output directory is not part of the experiment's identity.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : to_config_string(config)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

double mse(const Trajectory& pred, const Trajectory& ref) {
  if (!(pred.grid == ref.grid) || pred.dim() != ref.dim())
    throw Error(ErrorCode::InvalidGrid, "prediction and reference grids differ");
  return (pred.states - ref.states).squaredNorm() / static_cast<double>(pred.states.size());
}

Vector rmse_over_time(const Trajectory& pred, const Trajectory& ref) {
  if (!(pred.grid == ref.grid) || pred.dim() != ref.dim())
    throw Error(ErrorCode::InvalidGrid, "prediction and reference grids differ");
  return ((pred.states - ref.states).rowwise().squaredNorm() / static_cast<double>(pred.dim()))
      .cwiseSqrt();
}

ExperimentData prepare_data(const ExperimentConfig& config) {
  ExperimentData d;
  if (config.system.rfind("csv:", 0) == 0) {
    d.reference = load_csv(config.system.substr(4));
    d.observed = d.reference;
    d.simulated = false;
    const Index train = config.train_steps > 0 ? config.train_steps : d.observed.size() / 2;
    if (train < 2 || train > d.observed.size())
      throw Error(ErrorCode::Config, "train_steps does not fit the CSV trajectory");
    d.train = d.observed.slice(0, train);
    return d;
  }
  const DynamicsField field = system_by_name(config.system);
  Vector x0 = Vector::Zero(field.dim);
  if (!config.x0.empty()) {
    if (static_cast<Index>(config.x0.size()) != field.dim)
      throw Error(ErrorCode::Config, "x0 has the wrong dimension");
    x0 = Eigen::Map<const Vector>(config.x0.data(), field.dim);
  }
  const TimeGrid grid = config.irregularity > 0.0
                            ? irregular_grid(config.t0, config.n_steps, config.h,
                                             config.irregularity, derive_seed(config.seed, 1))
                            : TimeGrid::uniform(config.t0, config.h, config.n_steps);
  d.reference = simulate_reference(field, x0, grid);
  Vector sigma = Vector::Constant(field.dim, 1e-4);
  if (!config.noise_sigma.empty()) {
    if (config.noise_sigma.size() == 1)
      sigma.setConstant(config.noise_sigma.front());
    else if (static_cast<Index>(config.noise_sigma.size()) == field.dim)
      sigma = Eigen::Map<const Vector>(config.noise_sigma.data(), field.dim);
    else
      throw Error(ErrorCode::Config, "noise_sigma has the wrong dimension");
  }
  d.observed = add_noise(d.reference, sigma, derive_seed(config.seed, 2));
  d.train = d.observed.slice(0, config.train_steps);
  return d;
}

TrainConfig training_config(const ExperimentConfig& config) {
  TrainConfig t = config.train;
  t.seed = derive_seed(config.seed, 3);
  return t;
}

namespace {

[[noreturn]] void rethrow_with_stage(const std::string& stage, const Error& e) {
  throw Error(e.code(), stage + ": " + e.what());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  os << text;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

void write_artifacts(const ExperimentConfig& config, const ExperimentResult& r) {
  const auto& dir = config.output_dir;
  std::filesystem::create_directories(dir);
  save_csv(r.prediction, dir / "predictions.csv");
  save_csv(Trajectory(r.prediction.grid, r.variance), dir / "variance.csv");
  {
    std::ostringstream os;
    os << "t,rmse\n" << std::setprecision(17);
    for (Index n = 0; n < r.report.rmse.size(); ++n)
      os << r.prediction.grid[n] << ',' << r.report.rmse(n) << '\n';
    write_text(dir / "rmse_over_time.csv", os.str());
  }
  nlohmann::json m;
  m["mse"] = r.report.mse;
  m["mse_data"] = r.report.mse_data;
  m["failed_samples"] = r.report.failed_samples;
  m["used_samples"] = r.report.used_samples;
  m["seed"] = r.report.seed;
  m["config_hash"] = hex(r.report.config_hash);
  m["learned_sigma"] = r.report.learned_sigma;
  write_text(dir / "metrics.json", m.dump(2) + "\n");
  save_model(r.model, dir / "model.json");
  nlohmann::json t;
  t["wall_time_seconds"] = r.report.wall_time;
  write_text(dir / "timing.json", t.dump(2) + "\n");
  write_text(dir / "config.txt", to_config_string(config));
}

}  // namespace

ExperimentResult predict_and_score(const ExperimentConfig& config, const ExperimentData& data,
                                   TrainedModel model) {
  ExperimentResult r;
  const TimeGrid& grid = data.observed.grid;
  const Index n_init = std::min<Index>(data.observed.size(), 4);
  const Matrix init = data.observed.states.topRows(n_init);
  PredictSpec spec;
  spec.integrator = config.integrator;
  spec.features = config.features;
  spec.rk45.rtol = config.rtol;
  spec.rk45.atol = config.atol;
  try {
    if (config.mode == PredictMode::DS) {
      const EnsembleResult e =
          ds_rollout_ensemble(model, config.n_samples, grid, init, spec, derive_seed(config.seed, 4));
      r.prediction = Trajectory(grid, e.mean);
      r.variance = e.variance;
      r.report.failed_samples = e.failed;
      r.report.used_samples = e.used;
    } else {
      const RolloutResult m = mean_rollout(model, grid, init, spec);
      if (!m.ok())
        throw Error(ErrorCode::SolverFailure,
                    "mean rollout failed at step " + std::to_string(m.failed_step));
      r.prediction = m.trajectory;
      r.variance = Matrix::Zero(grid.size(), data.observed.dim());
      r.report.used_samples = 1;
    }
  } catch (const Error& e) {
    rethrow_with_stage("predict", e);
  }
  r.report.mse = mse(r.prediction, data.reference);
  r.report.mse_data = mse(r.prediction, data.observed);
  r.report.rmse = rmse_over_time(r.prediction, data.reference);
  r.report.seed = config.seed;
  r.report.config_hash = config_hash(config);
  for (const auto& dim : model.dims) r.report.learned_sigma.push_back(dim.sigma());
  r.model = std::move(model);
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& config, bool write,
                                const TrainedModel* pretrained) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentData data;
  try {
    data = prepare_data(config);
  } catch (const Error& e) {
    rethrow_with_stage("simulate", e);
  }
  TrainedModel model;
  try {
    model = train_model(data.train, config.model, training_config(config), pretrained);
  } catch (const Error& e) {
    rethrow_with_stage("train", e);
  }
  ExperimentResult r = predict_and_score(config, data, std::move(model));
  r.report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (write) write_artifacts(config, r);
  return r;
}

std::string SuiteTable::format() const {
  std::ostringstream os;
  os << "scheme  order  MSE mean (std)        failed/runs\n";
  for (const auto& c : cells) {
    os << std::left << std::setw(8) << to_string(c.kind) << std::setw(7) << c.order;
    std::ostringstream v;
    if (c.failed_runs == static_cast<Index>(c.mse.size()))
      v << "failed";
    else
      v << std::fixed << std::setprecision(3) << c.mean << " (" << c.stddev << ")";
    os << std::setw(22) << v.str() << c.failed_runs << '/' << c.mse.size() << '\n';
  }
  return os.str();
}

SuiteTable run_suite(const ExperimentConfig& config, bool write) {
  SuiteTable table;
  table.seeds = config.suite_seeds.empty() ? std::vector<Seed>{config.seed} : config.suite_seeds;
  auto cells = config.suite_cells;
  if (cells.empty()) cells.emplace_back(config.model.kind, config.model.order);
  for (const auto& [kind, order] : cells) {
    SuiteCell c;
    c.kind = kind;
    c.order = order;
    table.cells.push_back(c);
  }
  for (Seed seed : table.seeds) {
    ExperimentConfig base = config;
    base.seed = seed;
    std::optional<TrainedModel> euler;
    try {
      const ExperimentData data = prepare_data(base);
      ModelSpec euler_spec{SchemeKind::AB, 1, KernelFamily::ARD, config.model.noise};
      euler = train_model(data.train, euler_spec, training_config(base));
    } catch (const Error&) {
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      ExperimentConfig cfg = base;
      cfg.model.kind = cells[i].first;
      cfg.model.order = cells[i].second;
      if (cfg.model.kind == SchemeKind::Taylor && cfg.model.family == KernelFamily::ARD)
        cfg.model.family = KernelFamily::TaylorIndependent;
      if (cfg.model.kind != SchemeKind::Taylor) cfg.model.family = KernelFamily::ARD;
      cfg.output_dir = config.output_dir / (to_string(cfg.model.kind) + std::to_string(cfg.model.order)) /
                       ("seed" + std::to_string(seed));
      double value = std::numeric_limits<double>::quiet_NaN();
      try {
        value = run_experiment(cfg, write, euler ? &*euler : nullptr).report.mse;
      } catch (const Error&) {
        ++table.cells[i].failed_runs;
      }
      table.cells[i].mse.push_back(value);
    }
  }
  for (auto& c : table.cells) {
    std::vector<double> ok;
    for (double v : c.mse)
      if (std::isfinite(v)) ok.push_back(v);
    if (ok.empty()) {
      c.mean = c.stddev = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double s = 0.0;
    for (double v : ok) s += v;
    c.mean = s / static_cast<double>(ok.size());
    double ss = 0.0;
    for (double v : ok) ss += (v - c.mean) * (v - c.mean);
    c.stddev = ok.size() > 1 ? std::sqrt(ss / static_cast<double>(ok.size() - 1)) : 0.0;
  }
  return table;
}

}  // namespace gpode
