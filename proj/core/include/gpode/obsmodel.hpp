#pragma once

#include "gpode/common.hpp"
#include "gpode/dynsys.hpp"
#include "gpode/mscoef.hpp"

#include <string>

namespace gpode {

enum class NoiseVariant { Full, DiagTimeVarying, IIDConstant };

std::string to_string(NoiseVariant v);
NoiseVariant noise_variant_from_string(const std::string& name);

/// Covariance of the transformed observation noise. The structure is stored
/// for unit state noise and scaled by sigma2 = sigma_u^2, so training can
/// move sigma_u without rebuilding it.
struct NoiseModel {
  NoiseVariant variant = NoiseVariant::DiagTimeVarying;
  Matrix unit_full;   // Full only
  Vector unit_diag;   // DiagTimeVarying / IIDConstant (constant entries)
  double sigma2 = 0.0;

  Index size() const noexcept;
  NoiseModel with_sigma2(double s2) const;
  /// sigma2 * structure as a dense matrix.
  Matrix covariance() const;
  Vector diagonal() const;
  /// Adds sigma2 * structure to `K` in place.
  void add_to(Matrix& K) const;
};

enum class Pipeline { Multistep, Taylor };

/// GP observations of one output dimension u.
///
/// Multistep: Y_n = sum_j a(n, j) x_{n+j,u}, modeled as
///   sum_j b(n, j) f_u(x_{n+j}) + eps_n.
/// Taylor: Y_n = x_{n+1,u} - x_{n,u}, modeled as
///   sum_l h_n^l / l! f_u^l(x_n) + eps_n.
struct TransformedDataset {
  Pipeline pipeline = Pipeline::Multistep;
  Index output_dim = 0;
  Vector Y;
  Matrix points;   // trajectory states used as GP inputs, N x d
  Matrix a;        // multistep only
  Matrix b;        // multistep only; rows x (M+1)
  Vector steps;    // h_n per row
  SchemeKind kind = SchemeKind::AB;
  int order = 1;
  NoiseModel noise;

  Index rows() const noexcept { return Y.size(); }
  Index input_dim() const noexcept { return points.cols(); }
  /// Number of consecutive points each row touches (M + 1, or 1 for Taylor).
  Index window() const noexcept;
  /// Row weights of level `level` (1-based): b for multistep (level 1 only),
  /// h_n^l / l! as a rows x 1 matrix for Taylor.
  Matrix level_weights(int level) const;
  /// Recomputes Y from the stored points (a-combination or differences).
  Vector recompute_observations() const;
};

TransformedDataset multistep_observations(const Trajectory& traj,
                                          const MultistepScheme& scheme, Index u);
TransformedDataset taylor_observations(const Trajectory& traj, Index u);

/// Sigma_y = sigma^2 At At^T with At(n, n + j) = a(n, j) (Full), its diagonal
/// sigma^2 sum_j a(n, j)^2 (DiagTimeVarying), or the first row's value for
/// every row (IIDConstant).
NoiseModel multistep_noise(const MultistepScheme& scheme, double sigma,
                           NoiseVariant variant);
/// Tridiagonal 2 sigma^2 / -sigma^2 for N - 1 differences of N points.
NoiseModel taylor_noise(Index n_points, double sigma, NoiseVariant variant);

}  // namespace gpode
