#pragma once

#include "gpode/common.hpp"
#include "gpode/mscoef.hpp"

#include <vector>

namespace gpode {

/// Smoothness constants and scheme data for the GP error bounds. C, L and E
/// are supplied by the caller; they cannot be estimated from data.
struct BoundInputs {
  double rkhs_norm = 0.0;            // C
  std::vector<double> level_norms;   // C_l (Taylor)
  double lie_bound = 0.0;            // L (multistep) or E (Taylor)
  double tau = 0.0;                  // lambda = 1 + tau
  int steps = 1;                     // M
  int order = 1;                     // P
  double max_step = 0.0;             // max(h)
  double coef_sum = 0.0;             // worst-row sum_j |a_jn| + |b_jn|
  Index n_points = 0;                // N
};

/// max_n sum_j |a(n, j)| + |b(n, j)|
double worst_coefficient_sum(const MultistepScheme& scheme);

/// Fills steps, order, max_step, coef_sum and n_points from a scheme.
BoundInputs bound_inputs_from_scheme(const MultistepScheme& scheme);

/// ||((K + tau I)^-1 + I)^-1||_2 by power iteration. Throws InvalidArgument
/// when K + tau I is not SPD.
double regularized_norm(const Matrix& K, double tau, int iterations = 2000, double tol = 1e-12);

/// C_eps = L M^{P+1} max(h)^{P+1} / (P+1)! (N - M) sum_j (|a| + |b|)
double multistep_c_eps(const BoundInputs& in);
/// C_eps = (N - 1) max(h)^{P+1} / (P+1)! E
double taylor_c_eps(const BoundInputs& in);

/// sigma(x) (C + C_eps (1 + tau)^{-1/2} sqrt(||((K + tau I)^-1 + I)^-1||_2))
double multistep_bound(const BoundInputs& in, const Matrix& K, double posterior_std);
/// Same outer form with C = sqrt(sum_l C_l^2).
double taylor_bound(const BoundInputs& in, const Matrix& K, double posterior_std);

}  // namespace gpode
