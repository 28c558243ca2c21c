#include "gpode/error.hpp"
#include "gpode/sampler.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace gpode;

namespace {

// Ten points of x' = -sin(x) in one dimension.
Trajectory toy_traj(Index n = 10) {
  DynamicsField f{[](const Vector& x) { return Vector((-x.array().sin()).matrix()); }, 1, "toy"};
  return simulate_reference(f, Vector::Constant(1, 2.5), TimeGrid::uniform(0.0, 0.3, n - 1));
}

TrainedModel toy_model(const ModelSpec& spec, double sigma, int levels = 1) {
  const Trajectory t = toy_traj();
  TrainedModel m;
  m.spec = spec;
  auto ds = make_datasets(t, spec)[0];
  KernelSpec k;
  k.output_dim = 0;
  k.num_levels = levels;
  k.family = spec.pipeline() == Pipeline::Taylor ? KernelFamily::TaylorIndependent : KernelFamily::ARD;
  for (int l = 0; l < levels; ++l)
    k.levels.push_back(ARDHypers::from_values(1.0 / (l + 1), Vector::Constant(1, 0.8 + 0.2 * l)));
  m.dims.push_back(condition(ds, k, std::log(sigma), 1e-10));
  return m;
}

struct Moments {
  Vector mean;
  Matrix cov;
};

Moments empirical(const TrainedModel& m, int level, const Matrix& pts, int draws, Index S, Seed seed) {
  const Index T = pts.rows();
  Matrix vals(draws, T);
  for (int s = 0; s < draws; ++s) {
    const SampledDynamics f = draw(m, S, derive_seed(seed, static_cast<std::uint64_t>(s)));
    for (Index t = 0; t < T; ++t) vals(s, t) = f.eval_level(level, pts.row(t).transpose())(0);
  }
  Moments mo;
  mo.mean = vals.colwise().mean().transpose();
  const Matrix c = vals.rowwise() - mo.mean.transpose();
  mo.cov = c.transpose() * c / (draws - 1.0);
  return mo;
}

Matrix test_points() {
  Matrix pts(5, 1);
  pts << -0.5, 0.4, 1.2, 2.0, 3.5;
  return pts;
}

}  // namespace

TEST(Sampler, MatchesExactPosteriorMoments) {
  const TrainedModel m = toy_model(ModelSpec{SchemeKind::BDF, 2}, 0.05);
  const Matrix pts = test_points();
  Vector mean;
  Matrix cov;
  joint_posterior(m.dims[0], 1, pts, mean, cov);
  const int draws = 4096;
  const Moments mo = empirical(m, 1, pts, draws, 1024, 1);
  for (Index t = 0; t < pts.rows(); ++t) {
    const double sd = std::sqrt(cov(t, t));
    EXPECT_LE(std::abs(mo.mean(t) - mean(t)), 3.0 * sd / std::sqrt(draws) + 1e-6) << t;
    EXPECT_NEAR(mo.cov(t, t), cov(t, t), 0.15 * cov(t, t)) << t;
  }
}

TEST(Sampler, FullNoiseVariantMoments) {
  const TrainedModel m = toy_model(ModelSpec{SchemeKind::AM, 3, KernelFamily::ARD, NoiseVariant::Full}, 0.05);
  const Matrix pts = test_points();
  Vector mean;
  Matrix cov;
  joint_posterior(m.dims[0], 1, pts, mean, cov);
  const int draws = 4096;
  const Moments mo = empirical(m, 1, pts, draws, 512, 2);
  for (Index t = 0; t < pts.rows(); ++t) {
    EXPECT_LE(std::abs(mo.mean(t) - mean(t)), 3.0 * std::sqrt(cov(t, t) / draws) + 1e-6);
    EXPECT_NEAR(mo.cov(t, t), cov(t, t), 0.15 * cov(t, t));
  }
}

TEST(Sampler, TaylorLevelMeans) {
  const TrainedModel m = toy_model(ModelSpec{SchemeKind::Taylor, 2}, 0.02, 2);
  const Matrix pts = test_points();
  for (int level = 1; level <= 2; ++level) {
    Vector mean;
    Matrix cov;
    joint_posterior(m.dims[0], level, pts, mean, cov);
    const int draws = 2048;
    const Moments mo = empirical(m, level, pts, draws, 512, 3);
    for (Index t = 0; t < pts.rows(); ++t) {
      EXPECT_LE(std::abs(mo.mean(t) - mean(t)), 3.0 * std::sqrt(cov(t, t) / draws) + 1e-6)
          << "level " << level << " point " << t;
      EXPECT_NEAR(mo.cov(t, t), cov(t, t), 0.15 * cov(t, t));
    }
  }
}

TEST(Sampler, TaylorP1MatchesAb1) {
  const TrainedModel ms = toy_model(ModelSpec{SchemeKind::AB, 1}, 0.05);
  const TrainedModel ty = toy_model(ModelSpec{SchemeKind::Taylor, 1}, 0.05);
  for (Seed s = 0; s < 5; ++s) {
    const auto a = draw(ms, 64, s);
    const auto b = draw(ty, 64, s);
    for (double x : {-1.0, 0.3, 2.2})
      EXPECT_NEAR(a(Vector::Constant(1, x))(0), b(Vector::Constant(1, x))(0), 1e-12);
  }
}

TEST(Sampler, PriorPathInTheNoDataLimit) {
  // A far-away dataset leaves the correction without influence near the origin.
  TrainedModel m = toy_model(ModelSpec{SchemeKind::AB, 1}, 0.05);
  const auto f = draw(m, 256, Seed{4});
  const Vector far = Vector::Constant(1, 60.0);
  EXPECT_NEAR(f(far)(0), f.dims[0].eval_prior(1, far), 1e-12);
}

TEST(Sampler, DeterministicAndFunctionConsistent) {
  const TrainedModel m = toy_model(ModelSpec{SchemeKind::BDF, 3}, 0.05);
  const auto a = draw(m, 128, Seed{9});
  const auto b = draw(m, 128, Seed{9});
  const auto c = draw(m, 128, Seed{10});
  const Vector x = Vector::Constant(1, 0.7);
  EXPECT_EQ(a(x), b(x));
  EXPECT_NE(a(x), c(x));
  // Evaluation order does not matter: interleave other points and repeat.
  const double first = a(x)(0);
  for (double y : {3.0, -2.0, 0.1}) a(Vector::Constant(1, y));
  EXPECT_EQ(a(x)(0), first);
  EXPECT_EQ(a.dims[0].correction.size(), m.dims[0].data.rows());
}

TEST(Sampler, PipelineMismatchThrows) {
  const TrainedModel m = toy_model(ModelSpec{SchemeKind::AB, 2}, 0.05);
  std::mt19937_64 rng(1);
  EXPECT_THROW(draw_taylor(m, 16, rng), Error);
  EXPECT_THROW(draw(m, 0, Seed{1}), Error);
}

TEST(Sampler, NoiseDrawCovariance) {
  const TrainedModel m = toy_model(ModelSpec{SchemeKind::BDF, 2, KernelFamily::ARD, NoiseVariant::Full}, 0.1);
  const auto& dim = m.dims[0];
  std::mt19937_64 rng(5);
  const int n = 20000;
  const Index R = dim.data.rows();
  Matrix acc = Matrix::Zero(R, R);
  for (int s = 0; s < n; ++s) {
    const Vector e = draw_noise(dim, rng);
    acc += e * e.transpose();
  }
  acc /= n;
  const Matrix target = dim.noise().covariance();
  const double scale = target.diagonal().maxCoeff();
  EXPECT_LE((acc - target).cwiseAbs().maxCoeff(), 0.05 * scale);
}
