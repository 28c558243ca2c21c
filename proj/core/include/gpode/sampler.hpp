#pragma once

#include "gpode/common.hpp"
#include "gpode/gpcore.hpp"
#include "gpode/kernels.hpp"

#include <random>
#include <vector>

namespace gpode {

/// One posterior function draw for one output dimension: an RFF prior path
/// per level plus the Matheron correction folded onto the data points,
///   f^l(x) = phi_l(x).w_l + sum_p c_l[p] k_l(x, X_p).
struct SampledDimension {
  std::vector<RFFBasis> bases;
  std::vector<Vector> weights;
  std::vector<Vector> point_coefs;
  Vector correction;  // v = (K + Lambda)^-1 (Y - F w - eps), one entry per row
  Matrix points;
  KernelSpec kernel;
  std::vector<LevelKernel> level_kernels;
  // Weights folded with the feature scales, split into cos and sin halves.
  std::vector<Vector> cos_weights;
  std::vector<Vector> sin_weights;

  double eval(int level, const Vector& x) const;
  double eval_prior(int level, const Vector& x) const;
};

/// An evaluable vector field drawn from the posterior. Immutable and safe to
/// evaluate concurrently.
struct SampledDynamics {
  Pipeline pipeline = Pipeline::Multistep;
  int num_levels = 1;
  std::vector<SampledDimension> dims;

  Index dim() const noexcept { return static_cast<Index>(dims.size()); }
  /// f(x) (level 1).
  Vector eval_field(const Vector& x) const { return eval_level(1, x); }
  Vector eval_level(int level, const Vector& x) const;
  /// num_levels x d matrix of all Taylor levels.
  Matrix eval_levels(const Vector& x) const;
  Vector operator()(const Vector& x) const { return eval_field(x); }
};

SampledDynamics draw_multistep(const TrainedModel& model, Index S, std::mt19937_64& rng);
SampledDynamics draw_taylor(const TrainedModel& model, Index S, std::mt19937_64& rng);
/// Dispatches on the model pipeline.
SampledDynamics draw(const TrainedModel& model, Index S, Seed seed);

/// eps ~ N(0, noise + jitter I) for one dimension's dataset.
Vector draw_noise(const DimensionPosterior& dim, std::mt19937_64& rng);

}  // namespace gpode
