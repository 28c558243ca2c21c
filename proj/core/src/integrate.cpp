#include "gpode/integrate.hpp"

#include "gpode/error.hpp"
#include "gpode/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace gpode {

namespace {

bool blown_up(const Vector& x, double limit) {
  return !x.allFinite() || x.lpNorm<Eigen::Infinity>() > limit;
}

RolloutResult partial(const TimeGrid& grid, const Matrix& states, Index computed,
                      SolverStats stats, Index failed_step) {
  RolloutResult r;
  r.stats = stats;
  r.status = RolloutStatus::SolverFailure;
  r.failed_step = failed_step;
  const Index keep = std::max<Index>(computed, 2);
  if (keep <= grid.size() && states.topRows(keep).allFinite())
    r.trajectory = Trajectory(grid.slice(0, keep), states.topRows(keep));
  return r;
}

Matrix fd_jacobian(const FieldFn& f, const Vector& x, const Vector& fx, SolverStats& stats) {
  const Index d = x.size();
  Matrix J(d, d);
  for (Index k = 0; k < d; ++k) {
    const double delta = 1e-7 * std::max(1.0, std::abs(x(k)));
    Vector xp = x;
    xp(k) += delta;
    J.col(k) = (f(xp) - fx) / delta;
    ++stats.evaluations;
  }
  return J;
}

}  // namespace

RolloutResult rollout_multistep(const FieldFn& field, SchemeKind kind, int order,
                                const TimeGrid& grid, const Matrix& init,
                                const ImplicitSolveConfig& solve) {
  return rollout_multistep(field, generate_scheme(kind, order, grid), init, solve);
}

RolloutResult rollout_multistep(const FieldFn& field, const MultistepScheme& scheme,
                                const Matrix& init, const ImplicitSolveConfig& solve) {
  const TimeGrid& grid = scheme.grid;
  const Index M = scheme.steps;
  const Index N = grid.size();
  if (init.rows() < M + 1)
    throw Error(ErrorCode::InvalidArgument, "multistep rollout needs M + 1 initial states");
  const Index d = init.cols();
  Matrix X(N, d);
  X.topRows(M + 1) = init.topRows(M + 1);
  Matrix F(N, d);
  SolverStats stats;
  for (Index p = 0; p <= M; ++p) {
    F.row(p) = field(X.row(p).transpose()).transpose();
    ++stats.evaluations;
  }

  for (Index n = 1; n + M < N; ++n) {
    const Index target = n + M;
    Vector rhs = Vector::Zero(d);
    for (Index j = 0; j < M; ++j)
      rhs += scheme.b(n, j) * F.row(n + j).transpose() - scheme.a(n, j) * X.row(n + j).transpose();
    const double aM = scheme.a(n, M);
    const double bM = scheme.b(n, M);
    Vector x;
    if (bM == 0.0) {
      x = rhs / aM;
    } else {
      // Damped Newton on g(x) = aM x - bM f(x) - rhs from an Euler predictor.
      x = X.row(target - 1).transpose() + grid.step(target - 1) * F.row(target - 1).transpose();
      Vector fx = field(x);
      ++stats.evaluations;
      Vector g = aM * x - bM * fx - rhs;
      bool converged = false;
      for (int it = 0; it < solve.max_iterations && g.allFinite(); ++it) {
        ++stats.implicit_iterations;
        Matrix J = -bM * fd_jacobian(field, x, fx, stats);
        J.diagonal().array() += aM;
        const Vector dx = J.partialPivLu().solve(-g);
        if (!dx.allFinite()) break;
        double alpha = 1.0;
        Vector xn, fn, gn;
        const double g0 = g.norm();
        for (int k = 0; k < 12; ++k, alpha *= 0.5) {
          xn = x + alpha * dx;
          fn = field(xn);
          ++stats.evaluations;
          gn = aM * xn - bM * fn - rhs;
          if (gn.allFinite() && gn.norm() <= (1.0 - 1e-4 * alpha) * g0) break;
        }
        x = xn;
        fx = fn;
        g = gn;
        if (alpha * dx.norm() <= solve.tolerance * (1.0 + x.norm()) || g.norm() == 0.0) {
          converged = true;
          break;
        }
      }
      if (!converged) return partial(grid, X, target, stats, target);
    }
    if (blown_up(x, 1e8)) return partial(grid, X, target, stats, target);
    X.row(target) = x.transpose();
    F.row(target) = field(x).transpose();
    ++stats.evaluations;
    ++stats.steps;
  }
  RolloutResult r;
  r.stats = stats;
  r.trajectory = Trajectory(grid, std::move(X));
  return r;
}

RolloutResult rollout_taylor(const std::function<Matrix(const Vector&)>& levels,
                             const TimeGrid& grid, const Vector& x0) {
  const Index N = grid.size();
  const Index d = x0.size();
  Matrix X(N, d);
  X.row(0) = x0.transpose();
  SolverStats stats;
  for (Index n = 0; n + 1 < N; ++n) {
    const Vector x = X.row(n).transpose();
    const Matrix L = levels(x);
    ++stats.evaluations;
    const double h = grid.step(n);
    Vector next = x;
    double w = 1.0;
    for (Index l = 0; l < L.rows(); ++l) {
      w *= h / static_cast<double>(l + 1);
      next += w * L.row(l).transpose();
    }
    if (blown_up(next, 1e8)) return partial(grid, X, n + 1, stats, n + 1);
    X.row(n + 1) = next.transpose();
    ++stats.steps;
  }
  RolloutResult r;
  r.stats = stats;
  r.trajectory = Trajectory(grid, std::move(X));
  return r;
}

RolloutResult rollout_taylor(const std::vector<FieldFn>& levels, const TimeGrid& grid,
                             const Vector& x0) {
  return rollout_taylor(
      [&levels, d = x0.size()](const Vector& x) {
        Matrix L(static_cast<Index>(levels.size()), d);
        for (std::size_t l = 0; l < levels.size(); ++l)
          L.row(static_cast<Index>(l)) = levels[l](x).transpose();
        return L;
      },
      grid, x0);
}

RolloutResult rk45(const FieldFn& field, const TimeGrid& output, const Vector& x0,
                   const Rk45Config& cfg) {
  // Dormand-Prince 5(4) tableau.
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  (void)c2, (void)c3, (void)c4, (void)c5;

  const Index N = output.size();
  const Index d = x0.size();
  const double span = output.back() - output.front();
  Matrix X(N, d);
  X.row(0) = x0.transpose();
  SolverStats stats;

  Vector x = x0;
  Vector k1 = field(x);
  ++stats.evaluations;
  auto scale = [&](const Vector& a, const Vector& b) {
    return (cfg.atol + cfg.rtol * a.cwiseAbs().cwiseMax(b.cwiseAbs()).array()).matrix();
  };
  auto rms = [d](const Vector& v) { return std::sqrt(v.squaredNorm() / static_cast<double>(d)); };

  // Initial step (Hairer, Norsett and Wanner).
  double h;
  {
    const Vector sc = scale(x, x);
    const double d0 = rms(x.cwiseQuotient(sc));
    const double d1 = rms(k1.cwiseQuotient(sc));
    if (d1 <= 1e-15) {
      h = span;
    } else {
      double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
      h0 = std::min(h0, span);
      const Vector k2 = field(x + h0 * k1);
      ++stats.evaluations;
      const double d2 = rms((k2 - k1).cwiseQuotient(sc)) / h0;
      const double m = std::max(d1, d2);
      const double h1 = m <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 0.2);
      h = std::min(100.0 * h0, h1);
    }
  }

  double t = output.front();
  Index total_steps = 0;
  for (Index k = 1; k < N; ++k) {
    const double target = output[k];
    while (t < target) {
      if (++total_steps > cfg.max_steps) return partial(output, X, k, stats, k);
      const double remaining = target - t;
      const bool last = h >= remaining * (1.0 - 1e-12);
      const double step = last ? remaining : h;
      if (step < 1e-14 * span) return partial(output, X, k, stats, k);

      const Vector k2 = field(x + step * (a21 * k1));
      const Vector k3 = field(x + step * (a31 * k1 + a32 * k2));
      const Vector k4 = field(x + step * (a41 * k1 + a42 * k2 + a43 * k3));
      const Vector k5 = field(x + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const Vector k6 = field(x + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      const Vector xn = x + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const Vector k7 = field(xn);
      stats.evaluations += 6;
      const Vector err =
          step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const double en = rms(err.cwiseQuotient(scale(x, xn)));

      if (!std::isfinite(en)) {
        ++stats.rejected;
        h = step * cfg.min_factor;
        continue;
      }
      double factor = en == 0.0 ? cfg.max_factor : cfg.safety * std::pow(en, -0.2);
      factor = std::clamp(factor, cfg.min_factor, cfg.max_factor);
      if (en <= 1.0) {
        x = xn;
        k1 = k7;
        t = last ? target : t + step;
        ++stats.steps;
        if (blown_up(x, cfg.blowup)) return partial(output, X, k, stats, k);
        // A capped step says nothing about the step size the controller wants.
        h = last ? std::max(h, step * factor) : step * factor;
      } else {
        ++stats.rejected;
        h = step * std::min(1.0, factor);
      }
    }
    X.row(k) = x.transpose();
  }
  RolloutResult r;
  r.stats = stats;
  r.trajectory = Trajectory(output, std::move(X));
  return r;
}

RolloutResult predict_rollout(const TrainedModel& model, const FieldFn& field,
                              const std::function<Matrix(const Vector&)>& field_levels,
                              const TimeGrid& grid, const Matrix& init, const PredictSpec& spec) {
  if (spec.integrator == PredictIntegrator::RK45)
    return rk45(field, grid, init.row(0).transpose(), spec.rk45);
  if (model.spec.pipeline() == Pipeline::Taylor)
    return rollout_taylor(field_levels, grid, init.row(0).transpose());
  return rollout_multistep(field, model.spec.kind, model.spec.order, grid, init, spec.implicit);
}

EnsembleResult ds_rollout_ensemble(const TrainedModel& model, Index n_samples,
                                   const TimeGrid& grid, const Matrix& init,
                                   const PredictSpec& spec, Seed seed) {
  if (n_samples < 1) throw Error(ErrorCode::InvalidArgument, "need at least one sample");
  EnsembleResult out;
  const Index N = grid.size();
  const Index d = init.cols();
  Matrix sum = Matrix::Zero(N, d);
  Matrix sum_sq = Matrix::Zero(N, d);
  for (Index s = 0; s < n_samples; ++s) {
    bool ok = false;
    try {
      const SampledDynamics f = draw(model, spec.features, derive_seed(seed, static_cast<std::uint64_t>(s)));
      const RolloutResult r = predict_rollout(
          model, [&f](const Vector& x) { return f.eval_field(x); },
          [&f](const Vector& x) { return f.eval_levels(x); }, grid, init, spec);
      if (r.ok()) {
        sum += r.trajectory.states;
        sum_sq += r.trajectory.states.cwiseProduct(r.trajectory.states);
        ok = true;
      }
    } catch (const Error&) {
    }
    if (ok) {
      ++out.used;
    } else {
      ++out.failed;
      out.failed_samples.push_back(s);
    }
  }
  if (2 * out.failed > n_samples)
    throw Error(ErrorCode::EnsembleFailure, std::to_string(out.failed) + " of " +
                                                std::to_string(n_samples) +
                                                " sampled rollouts failed");
  const double n = static_cast<double>(out.used);
  out.mean = sum / n;
  out.variance = (sum_sq / n - out.mean.cwiseProduct(out.mean)).cwiseMax(0.0);
  return out;
}

RolloutResult mean_rollout(const TrainedModel& model, const TimeGrid& grid, const Matrix& init,
                           const PredictSpec& spec) {
  const int P = model.num_levels();
  std::vector<std::vector<PointExpansion>> exps(model.dims.size());
  for (std::size_t u = 0; u < model.dims.size(); ++u) {
    const auto& dim = model.dims[u];
    const Index n_points = dim.data.rows() + dim.data.window() - 1;
    for (int l = 1; l <= P; ++l)
      exps[u].push_back({dim.data.points.topRows(n_points),
                         fold_to_points(dim.data.level_weights(l), dim.fact.alpha, n_points),
                         dim.kernel, l});
  }
  std::vector<std::vector<LevelKernel>> kernels(model.dims.size());
  for (std::size_t u = 0; u < model.dims.size(); ++u)
    for (int l = 1; l <= P; ++l) kernels[u].emplace_back(model.dims[u].kernel, l);
  const Index D = model.state_dim();
  auto levels = [&](const Vector& x) {
    Matrix L(P, D);
    for (std::size_t u = 0; u < exps.size(); ++u)
      for (int l = 0; l < P; ++l) {
        const auto& e = exps[u][static_cast<std::size_t>(l)];
        L(l, static_cast<Index>(u)) = kernels[u][static_cast<std::size_t>(l)].expand(e.points, e.coefs, x);
      }
    return L;
  };
  auto field = [&](const Vector& x) -> Vector { return levels(x).row(0).transpose(); };
  return predict_rollout(model, field, levels, grid, init, spec);
}

}  // namespace gpode
