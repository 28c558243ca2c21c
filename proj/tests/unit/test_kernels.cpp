#include "gpode/kernels.hpp"

#include <gtest/gtest.h>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <vector>

using namespace gpode;

namespace {

std::vector<ARDHypers> random_base(Index d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> sf2(0.5, 2.0), ls(0.6, 1.8);
  std::vector<ARDHypers> base;
  for (Index j = 0; j < d; ++j) {
    Vector l(d);
    for (Index k = 0; k < d; ++k) l(k) = ls(rng);
    base.push_back(ARDHypers::from_values(sf2(rng), l));
  }
  return base;
}

Vector random_point(Index d, std::mt19937_64& rng, double scale = 0.7) {
  std::normal_distribution<double> n(0.0, scale);
  Vector x(d);
  for (Index k = 0; k < d; ++k) x(k) = n(rng);
  return x;
}

// Test-side recursion oracle: sum_j d2/dx_j dy_j k(x, y) * k_1^j(x, y), with a
// nine-point-free four-point central difference in each coordinate.
template <class K>
double fd_recursion(const K& k, const std::vector<ARDHypers>& base, const Vector& x,
                    const Vector& y, double delta) {
  double total = 0.0;
  for (Index j = 0; j < x.size(); ++j) {
    Vector e = Vector::Zero(x.size());
    e(j) = delta;
    const double mixed =
        (k(x + e, y + e) - k(x + e, y - e) - k(x - e, y + e) + k(x - e, y - e)) /
        (4.0 * delta * delta);
    total += mixed * ard_eval(base[static_cast<std::size_t>(j)], x, y);
  }
  return total;
}

double min_eig(const Matrix& K) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(K, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

}  // namespace

TEST(Ard, Examples) {
  const auto h = ARDHypers::from_values(1.0, Vector::Ones(2));
  Vector x(2), y(2);
  x << 1.0, 0.0;
  y << 0.0, 0.0;
  EXPECT_NEAR(ard_eval(h, x, y), 0.60653066, 1e-8);
  const auto h2 = ARDHypers::from_values(2.5, Vector::Constant(2, 0.3));
  EXPECT_DOUBLE_EQ(ard_eval(h2, x, x), 2.5);
}

TEST(Ard, SymmetryAndStationarity) {
  std::mt19937_64 rng(1);
  const auto base = random_base(3, rng);
  for (int t = 0; t < 50; ++t) {
    const Vector x = random_point(3, rng), y = random_point(3, rng), s = random_point(3, rng, 3.0);
    EXPECT_DOUBLE_EQ(ard_eval(base[0], x, y), ard_eval(base[0], y, x));
    EXPECT_NEAR(ard_eval(base[0], x + s, y + s), ard_eval(base[0], x, y), 1e-12);
    for (int level = 2; level <= 3; ++level) {
      const double k = taylor_adapted_kernel(base, 1, level, x, y);
      EXPECT_NEAR(taylor_adapted_kernel(base, 1, level, y, x), k, 1e-12 * (1 + std::abs(k)));
      EXPECT_NEAR(taylor_adapted_kernel(base, 1, level, x + s, y + s), k,
                  1e-9 * (1 + std::abs(k)));
    }
  }
}

TEST(Adapted, K2AtZeroOffset) {
  std::mt19937_64 rng(2);
  const auto base = random_base(3, rng);
  const Vector x = random_point(3, rng);
  for (Index i = 0; i < 3; ++i) {
    double expect = 0.0;
    for (Index j = 0; j < 3; ++j) {
      const double lij = base[static_cast<std::size_t>(i)].lengthscale(j);
      expect += base[static_cast<std::size_t>(j)].signal_variance() / (lij * lij);
    }
    expect *= base[static_cast<std::size_t>(i)].signal_variance();
    EXPECT_NEAR(taylor_adapted_k2(base, i, x, x), expect, 1e-12 * expect);
  }
}

TEST(Adapted, MatchesFiniteDifferenceRecursion) {
  std::mt19937_64 rng(3);
  int checked = 0;
  for (Index d = 1; d <= 3; ++d) {
    for (int t = 0; t < 40; ++t) {
      const auto base = random_base(d, rng);
      const Index i = static_cast<Index>(rng() % static_cast<std::uint64_t>(d));
      const Vector x = random_point(d, rng), y = random_point(d, rng);
      const double delta = 1e-4;
      auto k1 = [&](const Vector& a, const Vector& b) {
        return ard_eval(base[static_cast<std::size_t>(i)], a, b);
      };
      auto k2 = [&](const Vector& a, const Vector& b) { return taylor_adapted_k2(base, i, a, b); };
      const double fd2 = fd_recursion(k1, base, x, y, delta);
      const double fd3 = fd_recursion(k2, base, x, y, delta);
      // Absolute floor relative to the zero-offset value guards sign changes.
      const double s2 = taylor_adapted_k2(base, i, x, x);
      const double s3 = std::abs(taylor_adapted_k3(base, i, x, x));
      EXPECT_LE(std::abs(taylor_adapted_k2(base, i, x, y) - fd2),
                1e-4 * std::max(std::abs(fd2), 1e-3 * s2))
          << "d=" << d;
      EXPECT_LE(std::abs(taylor_adapted_k3(base, i, x, y) - fd3),
                1e-4 * std::max(std::abs(fd3), 1e-3 * s3))
          << "d=" << d;
      EXPECT_NEAR(lie_kernel_step(k1, base, x, y), fd2, 1e-4 * std::max(std::abs(fd2), 1e-3 * s2));
      ++checked;
    }
  }
  EXPECT_EQ(checked, 120);
}

TEST(Adapted, K3AtZeroOffsetMatchesOracle) {
  std::mt19937_64 rng(4);
  const auto base = random_base(2, rng);
  const Vector x = random_point(2, rng);
  auto k2 = [&](const Vector& a, const Vector& b) { return taylor_adapted_k2(base, 0, a, b); };
  const double fd = fd_recursion(k2, base, x, x, 1e-4);
  EXPECT_NEAR(taylor_adapted_k3(base, 0, x, x), fd, 1e-4 * std::abs(fd));
}

TEST(Adapted, GramsArePsd) {
  std::mt19937_64 rng(5);
  for (Index d = 1; d <= 3; ++d) {
    const auto base = random_base(d, rng);
    const Index n = 30;
    std::vector<Vector> pts;
    for (Index p = 0; p < n; ++p) pts.push_back(random_point(d, rng, 1.5));
    for (int level = 1; level <= 3; ++level) {
      Matrix K(n, n);
      for (Index p = 0; p < n; ++p)
        for (Index q = 0; q < n; ++q)
          K(p, q) = taylor_adapted_kernel(base, 0, level, pts[static_cast<std::size_t>(p)],
                                          pts[static_cast<std::size_t>(q)]);
      EXPECT_GE(min_eig(K), -1e-8 * K.diagonal().maxCoeff()) << "d=" << d << " level=" << level;
    }
  }
}

TEST(LieStep, ZeroKernelAndPsd) {
  std::mt19937_64 rng(6);
  const auto base = random_base(2, rng);
  const KernelFn zero = [](const Vector&, const Vector&) { return 0.0; };
  EXPECT_EQ(lie_kernel_step(zero, base, random_point(2, rng), random_point(2, rng)), 0.0);

  const KernelFn k1 = [&](const Vector& a, const Vector& b) { return ard_eval(base[0], a, b); };
  std::vector<Vector> pts;
  for (int p = 0; p < 20; ++p) pts.push_back(random_point(2, rng, 1.5));
  Matrix K(20, 20);
  for (int p = 0; p < 20; ++p)
    for (int q = 0; q < 20; ++q) K(p, q) = lie_kernel_step(k1, base, pts[p], pts[q]);
  K = 0.5 * (K + K.transpose());
  EXPECT_GE(min_eig(K), -1e-8 * K.diagonal().maxCoeff());
}

TEST(Rff, PythagoreanIdentity) {
  const auto h = ARDHypers::from_values(1.7, Vector::Constant(2, 0.8));
  const RFFBasis basis = sample_rff(h, 64, Seed{9});
  std::mt19937_64 rng(7);
  for (int t = 0; t < 10; ++t) {
    const Vector phi = basis.features(random_point(2, rng));
    ASSERT_EQ(phi.size(), 128);
    EXPECT_NEAR(phi.squaredNorm(), 1.7, 1e-12);
  }
}

TEST(Rff, DeterministicAndBatchConsistent) {
  const auto h = ARDHypers::from_values(1.0, Vector::Constant(3, 0.5));
  EXPECT_EQ(sample_rff(h, 32, Seed{4}).frequencies, sample_rff(h, 32, Seed{4}).frequencies);
  const RFFBasis basis = sample_rff(h, 32, Seed{4});
  std::mt19937_64 rng(8);
  Matrix pts(5, 3);
  for (Index p = 0; p < 5; ++p) pts.row(p) = random_point(3, rng).transpose();
  const Matrix batch = basis.features(pts);
  for (Index p = 0; p < 5; ++p)
    EXPECT_LE((batch.row(p).transpose() - basis.features(Vector(pts.row(p).transpose())))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
}

TEST(Rff, MonteCarloMatchesArd) {
  const auto h = ARDHypers::from_values(1.3, (Vector(2) << 0.7, 1.2).finished());
  std::mt19937_64 rng(10);
  const RFFBasis basis = sample_rff(h, 4096, Seed{11});
  int checked = 0;
  while (checked < 30) {
    const Vector x = random_point(2, rng), y = random_point(2, rng);
    const double k = ard_eval(h, x, y);
    if (k < 0.1 * 1.3) continue;
    EXPECT_NEAR(basis.features(x).dot(basis.features(y)), k, 0.05 * k);
    ++checked;
  }
}

TEST(Rff, ErrorShrinksLikeInverseSqrtS) {
  const auto h = ARDHypers::from_values(1.0, Vector::Ones(2));
  std::mt19937_64 rng(12);
  std::vector<std::pair<Vector, Vector>> pairs;
  for (int t = 0; t < 20; ++t) pairs.emplace_back(random_point(2, rng), random_point(2, rng));
  std::vector<double> rms;
  for (Index S : {256, 1024, 4096}) {
    double acc = 0.0;
    int count = 0;
    for (Seed s = 0; s < 20; ++s) {
      const RFFBasis basis = sample_rff(h, S, s + 100);
      for (const auto& [x, y] : pairs) {
        const double e = basis.features(x).dot(basis.features(y)) - ard_eval(h, x, y);
        acc += e * e;
        ++count;
      }
    }
    rms.push_back(std::sqrt(acc / count));
  }
  // Each 4x increase of S should halve the error; allow generous MC slack.
  EXPECT_GT(rms[0] / rms[1], 1.4);
  EXPECT_LT(rms[0] / rms[1], 2.9);
  EXPECT_GT(rms[1] / rms[2], 1.4);
  EXPECT_LT(rms[1] / rms[2], 2.9);
}

TEST(Rff, AdaptedFeaturesMatchK2) {
  std::mt19937_64 rng(13);
  const auto base = random_base(2, rng);
  std::mt19937_64 frng(14);
  const RFFBasis basis = sample_rff_adapted(base, 0, 2, 200000, frng);
  const Vector x = random_point(2, rng, 0.3), y = random_point(2, rng, 0.3);
  const double k = taylor_adapted_k2(base, 0, x, y);
  EXPECT_NEAR(basis.features(x).dot(basis.features(y)), k, 0.05 * std::abs(k));
}
