#include "gpode/error.hpp"
#include "gpode/obsmodel.hpp"

#include <gtest/gtest.h>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace gpode;

namespace {

Trajectory line_traj(std::initializer_list<double> xs, double h = 0.1) {
  Matrix s(static_cast<Index>(xs.size()), 1);
  Index i = 0;
  for (double v : xs) s(i++, 0) = v;
  return Trajectory(TimeGrid::uniform(0.0, h, s.rows() - 1), s);
}

TimeGrid random_grid(Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> step(0.05, 0.2);
  std::vector<double> t{0.0};
  for (Index i = 1; i < n; ++i) t.push_back(t.back() + step(rng));
  return TimeGrid(t);
}

// Dense A~ with A~(n, n + j) = a(n, j).
Matrix dense_a(const MultistepScheme& s) {
  Matrix A = Matrix::Zero(s.rows(), s.grid.size());
  for (Index n = 0; n < s.rows(); ++n)
    for (Index j = 0; j <= s.steps; ++j) A(n, n + j) = s.a(n, j);
  return A;
}

}  // namespace

TEST(Observations, EulerDifferences) {
  const Trajectory t = line_traj({1, 3, 7});
  const auto ds = multistep_observations(t, generate_scheme(SchemeKind::AB, 1, t.grid), 0);
  ASSERT_EQ(ds.rows(), 2);
  EXPECT_NEAR(ds.Y(0), 2.0, 1e-14);
  EXPECT_NEAR(ds.Y(1), 4.0, 1e-14);
  const auto ty = taylor_observations(t, 0);
  EXPECT_DOUBLE_EQ(ty.Y(0), 2.0);
  EXPECT_DOUBLE_EQ(ty.Y(1), 4.0);
}

TEST(Observations, Bdf2HandExample) {
  const Trajectory t = line_traj({0, 1, 4});
  const auto ds = multistep_observations(t, generate_scheme(SchemeKind::BDF, 2, t.grid), 0);
  ASSERT_EQ(ds.rows(), 1);
  EXPECT_NEAR(ds.Y(0), 8.0 / 3.0, 1e-12);
}

TEST(Observations, ConstantTrajectoryGivesZero) {
  const Trajectory t = line_traj({2.5, 2.5, 2.5, 2.5, 2.5, 2.5});
  for (auto kind : {SchemeKind::AB, SchemeKind::AM, SchemeKind::BDF})
    for (int order = 1; order <= 3; ++order) {
      const auto ds = multistep_observations(t, generate_scheme(kind, order, t.grid), 0);
      EXPECT_LE(ds.Y.cwiseAbs().maxCoeff(), 1e-12);
    }
  EXPECT_TRUE(taylor_observations(t, 0).Y.isZero());
}

TEST(Observations, TaylorEqualsAb1AndReproducible) {
  std::mt19937_64 rng(1);
  const TimeGrid g = random_grid(15, rng);
  Matrix s = Matrix::Random(15, 2);
  const Trajectory t(g, s);
  for (Index u = 0; u < 2; ++u) {
    const auto ms = multistep_observations(t, generate_scheme(SchemeKind::AB, 1, g), u);
    const auto ty = taylor_observations(t, u);
    EXPECT_LE((ms.Y - ty.Y).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(ms.recompute_observations(), ms.Y);
    EXPECT_EQ(ty.recompute_observations(), ty.Y);
  }
  const auto bdf = multistep_observations(t, generate_scheme(SchemeKind::BDF, 3, g), 1);
  EXPECT_EQ(bdf.recompute_observations(), bdf.Y);
}

TEST(Observations, Errors) {
  const Trajectory t = line_traj({1, 2, 3});
  EXPECT_THROW(multistep_observations(t, generate_scheme(SchemeKind::AB, 3, TimeGrid::uniform(0, 0.1, 5)), 0),
               Error);
  Trajectory single;
  single.states = Matrix::Ones(1, 1);
  try {
    taylor_observations(single, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TrajectoryTooShort);
  }
}

TEST(Observations, LocalErrorShrinksWithOrder) {
  // Residual |Y_n - sum_j b f(x_{n+j})| on exact x(t) = sin t, f = cos t.
  auto residual = [](SchemeKind kind, int order, double h) {
    const TimeGrid g = irregular_grid(0.0, 40, h, 0.5, 3);
    Matrix s(g.size(), 1);
    for (Index n = 0; n < g.size(); ++n) s(n, 0) = std::sin(g[n]);
    const auto sch = generate_scheme(kind, order, g);
    const auto ds = multistep_observations(Trajectory(g, s), sch, 0);
    double worst = 0.0;
    for (Index n = 0; n < ds.rows(); ++n) {
      double model = 0.0;
      for (Index j = 0; j <= sch.steps; ++j) model += sch.b(n, j) * std::cos(g[n + j]);
      worst = std::max(worst, std::abs(ds.Y(n) - model));
    }
    return worst;
  };
  for (auto kind : {SchemeKind::AB, SchemeKind::AM, SchemeKind::BDF}) {
    double prev = 1e300;
    for (int order = 1; order <= 3; ++order) {
      const double r = residual(kind, order, 0.05);
      EXPECT_LT(r, prev) << to_string(kind) << order;
      prev = r;
      // Halving h scales the local error by about 2^(P+1).
      const double ratio = r / residual(kind, order, 0.025);
      EXPECT_GT(ratio, std::pow(2.0, order + 1) * 0.5) << to_string(kind) << order;
    }
  }
}

TEST(Noise, EulerDiagAndFull) {
  const TimeGrid g = TimeGrid::uniform(0, 0.1, 6);
  const auto s = generate_scheme(SchemeKind::AB, 1, g);
  const auto diag = multistep_noise(s, 0.3, NoiseVariant::DiagTimeVarying);
  EXPECT_LE((diag.diagonal().array() - 2 * 0.09).abs().maxCoeff(), 1e-15);
  const auto full = multistep_noise(s, 0.3, NoiseVariant::Full);
  const Matrix C = full.covariance();
  for (Index n = 0; n < C.rows(); ++n)
    for (Index m = 0; m < C.cols(); ++m) {
      const double expect = n == m ? 0.18 : (std::abs(n - m) == 1 ? -0.09 : 0.0);
      EXPECT_NEAR(C(n, m), expect, 1e-15);
    }
  EXPECT_LE((C - taylor_noise(7, 0.3, NoiseVariant::Full).covariance()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Noise, FullMatchesDenseProduct) {
  std::mt19937_64 rng(2);
  for (auto kind : {SchemeKind::AB, SchemeKind::AM, SchemeKind::BDF})
    for (int order = 1; order <= 3; ++order) {
      const auto s = generate_scheme(kind, order, random_grid(40, rng));
      const Matrix A = dense_a(s);
      const Matrix oracle = 0.25 * A * A.transpose();
      const auto full = multistep_noise(s, 0.5, NoiseVariant::Full);
      EXPECT_LE((full.covariance() - oracle).cwiseAbs().maxCoeff(), 1e-13);
      EXPECT_LE((multistep_noise(s, 0.5, NoiseVariant::DiagTimeVarying).diagonal() -
                 oracle.diagonal())
                    .cwiseAbs()
                    .maxCoeff(),
                1e-13);
      const auto iid = multistep_noise(s, 0.5, NoiseVariant::IIDConstant);
      EXPECT_TRUE((iid.diagonal().array() == iid.diagonal()(0)).all());
      EXPECT_NEAR(iid.diagonal()(0), oracle(0, 0), 1e-13);
      EXPECT_TRUE(full.covariance().isApprox(full.covariance().transpose()));
    }
}

TEST(Noise, TaylorFullExampleAndSpectrum) {
  const Matrix C = taylor_noise(3, 1.0, NoiseVariant::Full).covariance();
  EXPECT_EQ(C, (Matrix(2, 2) << 2, -1, -1, 2).finished());
  const Index R = 12;
  const auto full = taylor_noise(R + 1, 0.7, NoiseVariant::Full);
  const double lmin =
      Eigen::SelfAdjointEigenSolver<Matrix>(full.covariance()).eigenvalues().minCoeff();
  // Tridiagonal Toeplitz: 2 - 2 cos(k pi / (R + 1)), smallest at k = 1.
  const double oracle = 0.49 * (2.0 - 2.0 * std::cos(M_PI / (R + 1)));
  EXPECT_NEAR(lmin, oracle, 1e-12);
  EXPECT_GT(lmin, 0.0);
  EXPECT_EQ(taylor_noise(R + 1, 0.7, NoiseVariant::DiagTimeVarying).diagonal(),
            full.covariance().diagonal());
}

TEST(Noise, AddToAndRescale) {
  const auto s = generate_scheme(SchemeKind::BDF, 2, TimeGrid::uniform(0, 0.1, 8));
  for (auto v : {NoiseVariant::Full, NoiseVariant::DiagTimeVarying, NoiseVariant::IIDConstant}) {
    const auto nm = multistep_noise(s, 1.0, v).with_sigma2(4.0);
    Matrix K = Matrix::Zero(nm.size(), nm.size());
    nm.add_to(K);
    EXPECT_LE((K - nm.covariance()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NEAR(nm.diagonal()(0), 4.0 * multistep_noise(s, 1.0, v).diagonal()(0), 1e-14);
  }
  EXPECT_THROW(multistep_noise(s, -1.0, NoiseVariant::Full), Error);
  EXPECT_EQ(noise_variant_from_string("Full"), NoiseVariant::Full);
  EXPECT_THROW(noise_variant_from_string("bogus"), Error);
}
