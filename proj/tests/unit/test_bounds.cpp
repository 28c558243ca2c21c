#include "gpode/bounds.hpp"
#include "gpode/error.hpp"

#include <gtest/gtest.h>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace gpode;

namespace {

Matrix random_spd(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix A(n, n);
  for (Index i = 0; i < A.size(); ++i) A(i) = normal(rng);
  return A * A.transpose() / static_cast<double>(n);
}

BoundInputs simple_inputs() {
  BoundInputs in;
  in.rkhs_norm = 2.0;
  in.lie_bound = 1.0;
  in.tau = 0.5;
  in.steps = 1;
  in.order = 1;
  in.max_step = 0.1;
  in.coef_sum = 2.1;
  in.n_points = 11;
  return in;
}

}  // namespace

TEST(CEps, MultistepHandExample) {
  EXPECT_NEAR(multistep_c_eps(simple_inputs()), 0.105, 1e-15);
}

TEST(CEps, TaylorHandExample) {
  BoundInputs in = simple_inputs();
  in.lie_bound = 2.0;
  EXPECT_NEAR(taylor_c_eps(in), 0.1, 1e-15);
  in.lie_bound = 0.0;
  EXPECT_EQ(taylor_c_eps(in), 0.0);
}

TEST(RegularizedNorm, MatchesEigenOracle) {
  std::mt19937_64 rng(1);
  for (double tau : {0.0, 0.3, 2.0}) {
    const Matrix K = random_spd(15, rng) + 1e-3 * Matrix::Identity(15, 15);
    const Matrix Kt = K + tau * Matrix::Identity(15, 15);
    const Matrix target = (Kt.inverse() + Matrix::Identity(15, 15)).inverse();
    const double oracle =
        Eigen::SelfAdjointEigenSolver<Matrix>(target).eigenvalues().cwiseAbs().maxCoeff();
    EXPECT_NEAR(regularized_norm(K, tau), oracle, 1e-8);
  }
  EXPECT_THROW(regularized_norm(-Matrix::Identity(3, 3), 0.5), Error);
}

TEST(Bound, LieZeroLeavesRkhsTerm) {
  std::mt19937_64 rng(2);
  const Matrix K = random_spd(10, rng);
  BoundInputs in = simple_inputs();
  in.lie_bound = 0.0;
  EXPECT_NEAR(multistep_bound(in, K, 0.3), 0.3 * 2.0, 1e-14);
}

TEST(Bound, OuterForm) {
  std::mt19937_64 rng(3);
  const Matrix K = random_spd(10, rng);
  const BoundInputs in = simple_inputs();
  const double expect =
      0.4 * (2.0 + 0.105 / std::sqrt(1.5) * std::sqrt(regularized_norm(K, 0.5)));
  EXPECT_NEAR(multistep_bound(in, K, 0.4), expect, 1e-12);
}

TEST(Bound, MonotoneInLieAndStep) {
  std::mt19937_64 rng(4);
  const Matrix K = random_spd(12, rng);
  BoundInputs in = simple_inputs();
  double prev = 0.0;
  for (double L : {0.0, 0.5, 1.0, 4.0}) {
    in.lie_bound = L;
    const double b = multistep_bound(in, K, 0.2);
    EXPECT_GE(b, prev);
    prev = b;
  }
  prev = 0.0;
  for (double h : {0.01, 0.05, 0.1, 0.3}) {
    in.max_step = h;
    const double b = multistep_bound(in, K, 0.2);
    EXPECT_GE(b, prev);
    prev = b;
  }
}

TEST(Bound, TaylorDecreasesWithOrder) {
  std::mt19937_64 rng(5);
  const Matrix K = random_spd(12, rng);
  BoundInputs in = simple_inputs();
  in.level_norms = {1.0, 0.5};
  in.lie_bound = 3.0;
  double prev = 1e300;
  for (int P = 1; P <= 4; ++P) {
    in.order = P;
    const double b = taylor_bound(in, K, 0.2);
    EXPECT_LT(b, prev);
    prev = b;
  }
  in.lie_bound = 0.0;
  EXPECT_NEAR(taylor_bound(in, K, 0.2), 0.2 * std::sqrt(1.25), 1e-14);
}

TEST(Bound, InputsFromScheme) {
  const auto s = generate_scheme(SchemeKind::AB, 1, TimeGrid::uniform(0, 0.1, 10));
  EXPECT_NEAR(worst_coefficient_sum(s), 2.1, 1e-12);
  const BoundInputs in = bound_inputs_from_scheme(s);
  EXPECT_EQ(in.steps, 1);
  EXPECT_EQ(in.order, 1);
  EXPECT_EQ(in.n_points, 11);
  EXPECT_NEAR(in.max_step, 0.1, 1e-12);
}

TEST(Bound, RejectsNegativeInputs) {
  const Matrix K = Matrix::Identity(3, 3);
  BoundInputs in = simple_inputs();
  in.tau = -1.0;
  EXPECT_THROW(multistep_bound(in, K, 0.1), Error);
}
