#pragma once

#include "gpode/common.hpp"

#include <functional>
#include <random>
#include <span>

namespace gpode {

/// Squared-exponential ARD hyperparameters. Positivity comes only from the
/// exp map: the stored values are logs.
struct ARDHypers {
  double log_signal_variance = 0.0;
  Vector log_lengthscales;

  static ARDHypers from_values(double signal_variance, const Vector& lengthscales);

  Index dim() const noexcept { return log_lengthscales.size(); }
  double signal_variance() const { return std::exp(log_signal_variance); }
  double lengthscale(Index j) const { return std::exp(log_lengthscales(j)); }
  Vector lengthscales() const { return log_lengthscales.array().exp().matrix(); }
};

using KernelFn = std::function<double(const Vector&, const Vector&)>;

/// sf2 * exp(-sum_j (x_j - y_j)^2 / (2 l_j^2))
double ard_eval(const ARDHypers& h, const Vector& x, const Vector& y);

// Kernels of the Lie derivatives f^2 = (df/dx) f and f^3 for ARD base
// kernels. `base[j]` holds the hypers of the base kernel k_1^j of state
// dimension j, `i` selects the output dimension.
double taylor_adapted_k2(std::span<const ARDHypers> base, Index i, const Vector& x,
                         const Vector& y);
double taylor_adapted_k3(std::span<const ARDHypers> base, Index i, const Vector& x,
                         const Vector& y);
/// Levels 1..3; level 1 is the plain ARD kernel of dimension i.
double taylor_adapted_kernel(std::span<const ARDHypers> base, Index i, int level,
                             const Vector& x, const Vector& y);

/// One step of the Lie-derivative kernel recursion,
///   k_{l+1}(x, y) = sum_j d/dx_j d/dy_j [k_l(x, y)] k_1^j(x, y),
/// with the mixed derivative taken by central differences. The step in
/// coordinate j is rel_step times the smallest base lengthscale j.
double lie_kernel_step(const KernelFn& k_level, std::span<const ARDHypers> base,
                       const Vector& x, const Vector& y, double rel_step = 1e-4);

/// Random Fourier features phi_k(x) = sqrt(c_k / S) (cos w_k.x, sin w_k.x).
/// For the ARD kernel c_k = sf2 and w_k ~ N(0, diag(l)^-2). The cos block
/// comes first, then the sin block.
struct RFFBasis {
  Matrix frequencies;  // S x d
  Vector amplitudes;   // c_k, length S

  Index count() const noexcept { return frequencies.rows(); }
  Index feature_dim() const noexcept { return 2 * frequencies.rows(); }
  Vector features(const Vector& x) const;
  /// Features of many points at once; returns rows(X) x 2S.
  Matrix features(const Matrix& points) const;
};

RFFBasis sample_rff(const ARDHypers& h, Index S, std::mt19937_64& rng);
RFFBasis sample_rff(const ARDHypers& h, Index S, Seed seed);

/// Features for the adapted Taylor kernel of the given level. Frequencies are
/// drawn through the spectral form of the Lie recursion: each level adds an
/// independent draw from a uniformly chosen base spectrum j and multiplies the
/// amplitude by d sf2_j (w_j)^2.
RFFBasis sample_rff_adapted(std::span<const ARDHypers> base, Index i, int level, Index S,
                            std::mt19937_64& rng);

}  // namespace gpode
