#include "gpode/bounds.hpp"

#include "gpode/error.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace gpode {

double worst_coefficient_sum(const MultistepScheme& scheme) {
  return (scheme.a.cwiseAbs() + scheme.b.cwiseAbs()).rowwise().sum().maxCoeff();
}

BoundInputs bound_inputs_from_scheme(const MultistepScheme& scheme) {
  BoundInputs in;
  in.steps = scheme.steps;
  in.order = scheme.order;
  in.max_step = scheme.grid.max_step();
  in.coef_sum = worst_coefficient_sum(scheme);
  in.n_points = scheme.grid.size();
  return in;
}

double regularized_norm(const Matrix& K, double tau, int iterations, double tol) {
  if (tau < 0.0) throw Error(ErrorCode::InvalidArgument, "tau must be nonnegative");
  const Index n = K.rows();
  Matrix A = K;
  A.diagonal().array() += tau;
  Eigen::LLT<Matrix> check(A);
  if (check.info() != Eigen::Success)
    throw Error(ErrorCode::InvalidArgument, "K + tau I is not positive definite");
  // (A^-1 + I)^-1 = A (A + I)^-1 has eigenvalues a / (1 + a), which crowd
  // near 1; iterating on A keeps the spectral gap and the map is monotone.
  Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector w = A * v;
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const bool done = std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next));
    lambda = next;
    if (done) break;
  }
  return lambda / (1.0 + lambda);
}

namespace {

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

double outer_form(double C, double c_eps, const BoundInputs& in, const Matrix& K,
                  double posterior_std) {
  if (in.rkhs_norm < 0.0 || in.lie_bound < 0.0 || in.tau < 0.0)
    throw Error(ErrorCode::InvalidArgument, "bound constants must be nonnegative");
  return posterior_std *
         (C + c_eps / std::sqrt(1.0 + in.tau) * std::sqrt(regularized_norm(K, in.tau)));
}

}  // namespace

double multistep_c_eps(const BoundInputs& in) {
  const int p1 = in.order + 1;
  return in.lie_bound * std::pow(static_cast<double>(in.steps), p1) * std::pow(in.max_step, p1) /
         factorial(p1) * static_cast<double>(in.n_points - in.steps) * in.coef_sum;
}

double taylor_c_eps(const BoundInputs& in) {
  const int p1 = in.order + 1;
  return static_cast<double>(in.n_points - 1) * std::pow(in.max_step, p1) / factorial(p1) *
         in.lie_bound;
}

double multistep_bound(const BoundInputs& in, const Matrix& K, double posterior_std) {
  return outer_form(in.rkhs_norm, multistep_c_eps(in), in, K, posterior_std);
}

double taylor_bound(const BoundInputs& in, const Matrix& K, double posterior_std) {
  double c2 = 0.0;
  for (double c : in.level_norms) c2 += c * c;
  return outer_form(std::sqrt(c2), taylor_c_eps(in), in, K, posterior_std);
}

}  // namespace gpode
