#pragma once

#include "gpode/common.hpp"
#include "gpode/dynsys.hpp"
#include "gpode/gpcore.hpp"
#include "gpode/integrate.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gpode {

enum class PredictMode { DS, Mean };

/// End-to-end experiment description. Read from a flat `key = value` file;
/// see README for the key list.
struct ExperimentConfig {
  std::string system = "dho";  // dho | vdp | csv:<path>
  std::vector<double> x0 = {2.0, 0.0};
  double t0 = 0.0;
  double h = 0.01;
  double irregularity = 0.0;   // b; 0 gives a uniform grid
  Index n_steps = 1000;
  Index train_steps = 500;     // points used for training
  std::vector<double> noise_sigma;  // empty: 1e-4 per dimension
  ModelSpec model;
  TrainConfig train;
  PredictIntegrator integrator = PredictIntegrator::RK45;
  PredictMode mode = PredictMode::DS;
  Index n_samples = 256;
  Index features = 256;
  double rtol = 1e-6;
  double atol = 1e-8;
  Seed seed = 0;
  std::filesystem::path output_dir = "out";
  // Suite only.
  std::vector<std::pair<SchemeKind, int>> suite_cells;
  std::vector<Seed> suite_seeds;

  /// Defaults for the named system (grid, split, initial state).
  static ExperimentConfig defaults_for(const std::string& system);
};

/// Throws Error(Config) on unknown keys or malformed values.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_config_string(const ExperimentConfig& config);
std::uint64_t config_hash(const ExperimentConfig& config);

double mse(const Trajectory& pred, const Trajectory& ref);
Vector rmse_over_time(const Trajectory& pred, const Trajectory& ref);

/// Everything an experiment needs before training.
struct ExperimentData {
  Trajectory reference;  // clean (for csv input: the raw data)
  Trajectory observed;   // noisy
  Trajectory train;      // observed[0, train_steps)
  bool simulated = true;
};

ExperimentData prepare_data(const ExperimentConfig& config);
/// Training settings with the experiment's training seed stream.
TrainConfig training_config(const ExperimentConfig& config);

struct MetricsReport {
  double mse = 0.0;        // vs clean reference
  double mse_data = 0.0;   // vs observed (noisy) data
  Vector rmse;             // per time step vs reference
  Index failed_samples = 0;
  Index used_samples = 0;
  double wall_time = 0.0;  // seconds; not written to metrics.json
  Seed seed = 0;
  std::uint64_t config_hash = 0;
  std::vector<double> learned_sigma;
};

struct ExperimentResult {
  MetricsReport report;
  Trajectory prediction;
  Matrix variance;
  TrainedModel model;
};

/// Runs simulate -> transform -> train -> sample -> rollout -> score. With
/// write_artifacts, writes predictions.csv, variance.csv, rmse_over_time.csv,
/// metrics.json, model.json and timing.json under config.output_dir.
/// `pretrained` lets callers share the explicit-Euler stage.
ExperimentResult run_experiment(const ExperimentConfig& config, bool write_artifacts = true,
                                const TrainedModel* pretrained = nullptr);

/// Prediction step alone, for an already trained model.
ExperimentResult predict_and_score(const ExperimentConfig& config, const ExperimentData& data,
                                   TrainedModel model);

struct SuiteCell {
  SchemeKind kind = SchemeKind::AB;
  int order = 1;
  std::vector<double> mse;  // one per seed; NaN for failed runs
  Index failed_runs = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

struct SuiteTable {
  std::vector<SuiteCell> cells;
  std::vector<Seed> seeds;

  std::string format() const;
};

/// Runs run_experiment for every (scheme, order) cell and seed. The
/// explicit-Euler pretraining is shared between cells of the same seed.
SuiteTable run_suite(const ExperimentConfig& config, bool write_artifacts = true);

}  // namespace gpode
