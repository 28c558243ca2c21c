#pragma once

#include "gpode/common.hpp"
#include "gpode/dynsys.hpp"
#include "gpode/gpcore.hpp"
#include "gpode/mscoef.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace gpode {

using FieldFn = std::function<Vector(const Vector&)>;

enum class RolloutStatus { Ok, SolverFailure };

struct SolverStats {
  Index steps = 0;
  Index rejected = 0;
  Index implicit_iterations = 0;
  Index evaluations = 0;
};

struct RolloutResult {
  Trajectory trajectory;
  SolverStats stats;
  RolloutStatus status = RolloutStatus::Ok;
  Index failed_step = -1;

  bool ok() const noexcept { return status == RolloutStatus::Ok; }
};

struct ImplicitSolveConfig {
  double tolerance = 1e-10;  // relative
  int max_iterations = 50;
};

struct Rk45Config {
  double rtol = 1e-6;
  double atol = 1e-8;
  double safety = 0.9;
  double min_factor = 0.2;
  double max_factor = 5.0;
  Index max_steps = 1'000'000;
  /// Abort when |x| exceeds this (diverging learned dynamics).
  double blowup = 1e8;
};

/// Multistep rollout on `grid`. `init` holds the first M + 1 states (rows).
/// Implicit steps use damped Newton with a finite-difference Jacobian,
/// started from an explicit-Euler predictor.
RolloutResult rollout_multistep(const FieldFn& field, SchemeKind kind, int order,
                                const TimeGrid& grid, const Matrix& init,
                                const ImplicitSolveConfig& solve = {});
RolloutResult rollout_multistep(const FieldFn& field, const MultistepScheme& scheme,
                                const Matrix& init, const ImplicitSolveConfig& solve = {});

/// x_{n+1} = x_n + sum_l h_n^l / l! f^l(x_n).
RolloutResult rollout_taylor(const std::vector<FieldFn>& levels, const TimeGrid& grid,
                             const Vector& x0);
/// Same with all levels from one callable returning a P x d matrix.
RolloutResult rollout_taylor(const std::function<Matrix(const Vector&)>& levels,
                             const TimeGrid& grid, const Vector& x0);

/// Dormand-Prince 5(4) with standard step control. Every grid time is hit
/// exactly by capping the step.
RolloutResult rk45(const FieldFn& field, const TimeGrid& output, const Vector& x0,
                   const Rk45Config& config = {});

enum class PredictIntegrator { RK45, Training };

struct PredictSpec {
  PredictIntegrator integrator = PredictIntegrator::RK45;
  Rk45Config rk45;
  ImplicitSolveConfig implicit;
  Index features = 256;
};

/// Rolls out an arbitrary field per the prediction spec. For Training the
/// model's own scheme is used on `grid` (`field_levels` supplies Taylor
/// levels). `init` holds at least the M + 1 bootstrap states.
RolloutResult predict_rollout(const TrainedModel& model, const FieldFn& field,
                              const std::function<Matrix(const Vector&)>& field_levels,
                              const TimeGrid& grid, const Matrix& init,
                              const PredictSpec& spec);

struct EnsembleResult {
  Matrix mean;      // N x d
  Matrix variance;  // N x d
  Index used = 0;
  Index failed = 0;
  std::vector<Index> failed_samples;
};

/// Draws n_samples posterior dynamics, rolls each out and aggregates the
/// pointwise mean and variance over the successful rollouts. Throws
/// EnsembleFailure when more than half of the samples fail.
EnsembleResult ds_rollout_ensemble(const TrainedModel& model, Index n_samples,
                                   const TimeGrid& grid, const Matrix& init,
                                   const PredictSpec& spec, Seed seed);

/// Rollout of the posterior mean dynamics.
RolloutResult mean_rollout(const TrainedModel& model, const TimeGrid& grid, const Matrix& init,
                           const PredictSpec& spec);

}  // namespace gpode
