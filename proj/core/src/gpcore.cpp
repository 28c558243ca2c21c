#include "gpode/gpcore.hpp"

#include "gpode/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace gpode {

std::string to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::ARD: return "ard";
    case KernelFamily::TaylorIndependent: return "independent";
    case KernelFamily::TaylorAdapted: return "adapted";
  }
  return "?";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "ard") return KernelFamily::ARD;
  if (s == "independent") return KernelFamily::TaylorIndependent;
  if (s == "adapted") return KernelFamily::TaylorAdapted;
  throw Error(ErrorCode::InvalidArgument, "unknown kernel family '" + name + "'");
}

double KernelSpec::eval(int level, const Vector& x, const Vector& y) const {
  switch (family) {
    case KernelFamily::ARD:
      if (level != 1) throw Error(ErrorCode::InvalidArgument, "ARD kernels have one level");
      return ard_eval(levels.front(), x, y);
    case KernelFamily::TaylorIndependent:
      return ard_eval(levels.at(static_cast<std::size_t>(level - 1)), x, y);
    case KernelFamily::TaylorAdapted:
      return taylor_adapted_kernel(base, output_dim, level, x, y);
  }
  return 0.0;
}

double KernelSpec::base_signal_variance() const {
  if (family == KernelFamily::TaylorAdapted)
    return base.at(static_cast<std::size_t>(output_dim)).signal_variance();
  return levels.front().signal_variance();
}

LevelKernel::LevelKernel(const KernelSpec& spec, int level)
    : level_(level), output_dim_(spec.output_dim) {
  if (level < 1 || level > spec.num_levels)
    throw Error(ErrorCode::InvalidArgument, "kernel level out of range");
  if (spec.family == KernelFamily::TaylorAdapted && level > 1) {
    base_ = spec.base;
    return;
  }
  const ARDHypers& h = spec.family == KernelFamily::TaylorAdapted
                           ? spec.base.at(static_cast<std::size_t>(spec.output_dim))
                           : spec.levels.at(static_cast<std::size_t>(level - 1));
  ard_ = true;
  sf2_ = h.signal_variance();
  inv_l2_ = (-2.0 * h.log_lengthscales.array()).exp().matrix();
}

double LevelKernel::operator()(const Vector& x, const Vector& y) const {
  if (!ard_) return taylor_adapted_kernel(base_, output_dim_, level_, x, y);
  double q = 0.0;
  for (Index j = 0; j < x.size(); ++j) {
    const double r = x(j) - y(j);
    q += r * r * inv_l2_(j);
  }
  return sf2_ * std::exp(-0.5 * q);
}

Matrix LevelKernel::gram(const Matrix& points) const {
  const Index n = points.rows();
  Matrix G(n, n);
  if (ard_) {
    const Index d = points.cols();
    for (Index p = 0; p < n; ++p) {
      G(p, p) = sf2_;
      for (Index q = p + 1; q < n; ++q) {
        double s = 0.0;
        for (Index j = 0; j < d; ++j) {
          const double r = points(p, j) - points(q, j);
          s += r * r * inv_l2_(j);
        }
        G(p, q) = G(q, p) = sf2_ * std::exp(-0.5 * s);
      }
    }
    return G;
  }
  for (Index p = 0; p < n; ++p) {
    const Vector xp = points.row(p).transpose();
    for (Index q = p; q < n; ++q) G(p, q) = G(q, p) = (*this)(xp, points.row(q).transpose());
  }
  return G;
}

double LevelKernel::expand(const Matrix& points, const Vector& coefs, const Vector& x) const {
  if (ard_) {
    Eigen::ArrayXd q = Eigen::ArrayXd::Zero(coefs.size());
    for (Index j = 0; j < points.cols(); ++j)
      q += (points.col(j).head(coefs.size()).array() - x(j)).square() * inv_l2_(j);
    return sf2_ * (coefs.array() * (-0.5 * q).exp()).sum();
  }
  double acc = 0.0;
  for (Index p = 0; p < coefs.size(); ++p)
    if (coefs(p) != 0.0) acc += coefs(p) * (*this)(x, points.row(p).transpose());
  return acc;
}

double PointExpansion::eval(const Vector& x) const {
  return LevelKernel(kernel, level).expand(points, coefs, x);
}

Vector fold_to_points(const Matrix& weights, const Vector& v, Index n_points) {
  Vector c = Vector::Zero(n_points);
  for (Index n = 0; n < weights.rows(); ++n)
    for (Index j = 0; j < weights.cols(); ++j) c(n + j) += weights(n, j) * v(n);
  return c;
}

namespace {

// K += sum_{j,i} (W_j W_i^T) .* G[j:j+R, i:i+R]
void accumulate(const Matrix& W, const Matrix& G, Matrix& K) {
  const Index R = W.rows();
  const Index w = W.cols();
  for (Index j = 0; j < w; ++j)
    for (Index i = 0; i < w; ++i)
      K.array() += (W.col(j) * W.col(i).transpose()).array() * G.block(j, i, R, R).array();
}

// Adjoint of `accumulate`: P(p, q) = sum_{j,i} W(p-j, j) W(q-i, i) Q(p-j, q-i),
// so that sum(Q .* accumulate(W, dG)) = sum(P .* dG).
Matrix adjoint_accumulate(const Matrix& W, const Matrix& Q) {
  const Index R = W.rows();
  const Index w = W.cols();
  Matrix P = Matrix::Zero(R + w - 1, R + w - 1);
  for (Index j = 0; j < w; ++j)
    for (Index i = 0; i < w; ++i)
      P.block(j, i, R, R).array() += (W.col(j) * W.col(i).transpose()).array() * Q.array();
  return P;
}

Index used_points(const TransformedDataset& data) { return data.rows() + data.window() - 1; }

int level_count(const KernelSpec& k) {
  return k.family == KernelFamily::ARD ? 1 : k.num_levels;
}

}  // namespace

Matrix gram(const TransformedDataset& data, const KernelSpec& kernel) {
  const Index R = data.rows();
  const Matrix pts = data.points.topRows(used_points(data));
  Matrix K = Matrix::Zero(R, R);
  for (int l = 1; l <= level_count(kernel); ++l)
    accumulate(data.level_weights(l), LevelKernel(kernel, l).gram(pts), K);
  return K;
}

namespace {

Matrix point_gram(const KernelFn& k, const Matrix& pts) {
  const Index n = pts.rows();
  Matrix G(n, n);
  for (Index p = 0; p < n; ++p)
    for (Index q = p; q < n; ++q) G(p, q) = G(q, p) = k(pts.row(p).transpose(), pts.row(q).transpose());
  return G;
}

}  // namespace

Matrix gram_multistep(const KernelFn& k, const TransformedDataset& data) {
  if (data.pipeline != Pipeline::Multistep)
    throw Error(ErrorCode::InvalidArgument, "gram_multistep needs a multistep dataset");
  Matrix K = Matrix::Zero(data.rows(), data.rows());
  accumulate(data.b, point_gram(k, data.points.topRows(used_points(data))), K);
  return K;
}

Matrix gram_taylor(const std::vector<KernelFn>& level_kernels, const TransformedDataset& data) {
  if (data.pipeline != Pipeline::Taylor)
    throw Error(ErrorCode::InvalidArgument, "gram_taylor needs a Taylor dataset");
  Matrix K = Matrix::Zero(data.rows(), data.rows());
  const Matrix pts = data.points.topRows(used_points(data));
  for (std::size_t l = 0; l < level_kernels.size(); ++l)
    accumulate(data.level_weights(static_cast<int>(l + 1)), point_gram(level_kernels[l], pts), K);
  return K;
}

Vector cross(const TransformedDataset& data, const KernelSpec& kernel, int level,
             const Vector& x_star) {
  const LevelKernel k(kernel, level);
  const Matrix W = data.level_weights(level);
  Vector kp(used_points(data));
  for (Index p = 0; p < kp.size(); ++p) kp(p) = k(x_star, data.points.row(p).transpose());
  Vector out = Vector::Zero(data.rows());
  for (Index n = 0; n < data.rows(); ++n)
    for (Index j = 0; j < W.cols(); ++j) out(n) += W(n, j) * kp(n + j);
  return out;
}

Vector cross_multistep(const KernelFn& k, const TransformedDataset& data, const Vector& x_star) {
  Vector out = Vector::Zero(data.rows());
  for (Index n = 0; n < data.rows(); ++n)
    for (Index j = 0; j < data.b.cols(); ++j)
      out(n) += data.b(n, j) * k(x_star, data.points.row(n + j).transpose());
  return out;
}

Vector cross_taylor(const KernelFn& k_level, int level, const TransformedDataset& data,
                    const Vector& x_star) {
  const Matrix W = data.level_weights(level);
  Vector out(data.rows());
  for (Index n = 0; n < data.rows(); ++n)
    out(n) = W(n, 0) * k_level(x_star, data.points.row(n).transpose());
  return out;
}

double gaussian_nll(const Eigen::LLT<Matrix>& llt, const Vector& Y, Vector* alpha) {
  const Vector a = llt.solve(Y);
  const Matrix& L = llt.matrixLLT();
  double logdet_half = 0.0;
  for (Index i = 0; i < L.rows(); ++i) logdet_half += std::log(L(i, i));
  const double n = static_cast<double>(Y.size());
  if (alpha) *alpha = a;
  return 0.5 * Y.dot(a) + logdet_half + 0.5 * n * std::log(2.0 * std::numbers::pi);
}

Factorization factorize(const Matrix& K, const NoiseModel& noise, const Vector& Y, double jitter) {
  Matrix Ky = K;
  noise.add_to(Ky);
  Factorization f;
  double j = jitter;
  for (int attempt = 0; attempt <= 3; ++attempt, j *= 10.0) {
    Matrix A = Ky;
    A.diagonal().array() += j;
    f.llt.compute(A);
    if (f.llt.info() != Eigen::Success) continue;
    if (!f.llt.matrixLLT().diagonal().allFinite()) continue;
    f.jitter = j;
    f.nll = gaussian_nll(f.llt, Y, &f.alpha);
    if (std::isfinite(f.nll)) return f;
  }
  throw Error(ErrorCode::FactorizationFailed,
              "Cholesky of K + noise failed after 3 jitter escalations (last jitter " +
                  std::to_string(j / 10.0) + ")");
}

double nll(const Matrix& K, const NoiseModel& noise, const Vector& Y, double jitter) {
  return factorize(K, noise, Y, jitter).nll;
}

std::vector<TransformedDataset> make_datasets(const Trajectory& traj, const ModelSpec& spec) {
  std::vector<TransformedDataset> out;
  if (spec.pipeline() == Pipeline::Taylor) {
    const NoiseModel noise = taylor_noise(traj.size(), 1.0, spec.noise);
    for (Index u = 0; u < traj.dim(); ++u) {
      auto ds = taylor_observations(traj, u);
      ds.order = spec.order;
      ds.noise = noise;
      out.push_back(std::move(ds));
    }
    return out;
  }
  const MultistepScheme scheme = generate_scheme(spec.kind, spec.order, traj.grid);
  const NoiseModel noise = multistep_noise(scheme, 1.0, spec.noise);
  for (Index u = 0; u < traj.dim(); ++u) {
    auto ds = multistep_observations(traj, scheme, u);
    ds.noise = noise;
    out.push_back(std::move(ds));
  }
  return out;
}

namespace {

void append(std::vector<double>& v, const ARDHypers& h) {
  v.push_back(h.log_signal_variance);
  for (Index j = 0; j < h.dim(); ++j) v.push_back(h.log_lengthscales(j));
}

void extract(const Vector& theta, Index& pos, ARDHypers& h) {
  h.log_signal_variance = theta(pos++);
  for (Index j = 0; j < h.dim(); ++j) h.log_lengthscales(j) = theta(pos++);
}

}  // namespace

Vector pack_parameters(const KernelSpec& kernel, double log_sigma) {
  std::vector<double> v;
  if (kernel.family == KernelFamily::TaylorAdapted)
    append(v, kernel.base.at(static_cast<std::size_t>(kernel.output_dim)));
  else
    for (const auto& h : kernel.levels) append(v, h);
  v.push_back(log_sigma);
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

void unpack_parameters(const Vector& theta, KernelSpec& kernel, double& log_sigma) {
  Index pos = 0;
  if (kernel.family == KernelFamily::TaylorAdapted)
    extract(theta, pos, kernel.base.at(static_cast<std::size_t>(kernel.output_dim)));
  else
    for (auto& h : kernel.levels) extract(theta, pos, h);
  if (pos + 1 != theta.size())
    throw Error(ErrorCode::DimensionMismatch, "parameter vector has the wrong length");
  log_sigma = theta(pos);
}

double nll_at(const TransformedDataset& data, const KernelSpec& structure, const Vector& theta,
              double jitter_rel, GradientMode mode, Vector* grad) {
  KernelSpec kernel = structure;
  double log_sigma = 0.0;
  unpack_parameters(theta, kernel, log_sigma);
  const NoiseModel noise = data.noise.with_sigma2(std::exp(2.0 * log_sigma));

  const Index R = data.rows();
  const int L = level_count(kernel);
  const Matrix pts = data.points.topRows(used_points(data));
  std::vector<Matrix> grams;
  Matrix K = Matrix::Zero(R, R);
  for (int l = 1; l <= L; ++l) {
    grams.push_back(LevelKernel(kernel, l).gram(pts));
    accumulate(data.level_weights(l), grams.back(), K);
  }
  const double jitter = jitter_rel * std::max(K.diagonal().maxCoeff(), 1e-300);
  const Factorization f = factorize(K, noise, data.Y, jitter);
  if (!grad) return f.nll;

  const Index P = theta.size();
  grad->resize(P);
  if (mode == GradientMode::FiniteDifference || kernel.family == KernelFamily::TaylorAdapted) {
    constexpr double step = 1e-5;
    for (Index p = 0; p < P; ++p) {
      Vector tp = theta, tm = theta;
      tp(p) += step;
      tm(p) -= step;
      (*grad)(p) = (nll_at(data, structure, tp, jitter_rel, mode, nullptr) -
                    nll_at(data, structure, tm, jitter_rel, mode, nullptr)) /
                   (2.0 * step);
    }
    return f.nll;
  }

  // d nll / d theta = 1/2 tr((Ky^-1 - alpha alpha^T) dKy / d theta)
  Matrix Q = f.llt.solve(Matrix::Identity(R, R));
  Q.noalias() -= f.alpha * f.alpha.transpose();
  Index pos = 0;
  const Index d = pts.cols();
  for (int l = 1; l <= L; ++l) {
    const Matrix Padj = adjoint_accumulate(data.level_weights(l), Q);
    const Matrix& G = grams[static_cast<std::size_t>(l - 1)];
    const ARDHypers& h = kernel.levels[static_cast<std::size_t>(l - 1)];
    const Matrix PG = Padj.cwiseProduct(G);
    (*grad)(pos++) = 0.5 * PG.sum();
    for (Index c = 0; c < d; ++c) {
      const double inv_l2 = std::exp(-2.0 * h.log_lengthscales(c));
      double acc = 0.0;
      for (Index q = 0; q < pts.rows(); ++q)
        for (Index p = 0; p < pts.rows(); ++p) {
          const double r = pts(p, c) - pts(q, c);
          acc += PG(p, q) * r * r * inv_l2;
        }
      (*grad)(pos++) = 0.5 * acc;
    }
  }
  // dLambda / dlog sigma = 2 Lambda
  if (noise.variant == NoiseVariant::Full)
    (*grad)(pos) = Q.cwiseProduct(noise.unit_full).sum() * noise.sigma2;
  else
    (*grad)(pos) = Q.diagonal().dot(noise.unit_diag) * noise.sigma2;
  return f.nll;
}

DimensionPosterior condition(TransformedDataset data, KernelSpec kernel, double log_sigma,
                             double jitter_rel) {
  DimensionPosterior dp;
  const Matrix K = gram(data, kernel);
  const double jitter = jitter_rel * std::max(K.diagonal().maxCoeff(), 1e-300);
  dp.fact = factorize(K, data.noise.with_sigma2(std::exp(2.0 * log_sigma)), data.Y, jitter);
  dp.data = std::move(data);
  dp.kernel = std::move(kernel);
  dp.log_sigma = log_sigma;
  return dp;
}

namespace {

constexpr double kLogBound = 25.0;

struct FitResult {
  Vector theta;
  double nll = std::numeric_limits<double>::infinity();
};

FitResult adam_fit(const TransformedDataset& data, const KernelSpec& structure, Vector theta,
                   const TrainConfig& config) {
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double lr = config.learning_rate;
  Vector m = Vector::Zero(theta.size());
  Vector v = Vector::Zero(theta.size());
  FitResult best;
  best.theta = theta;
  Vector g;
  int since_improvement = 0;
  long t = 0;
  for (int it = 0; it < config.iterations; ++it) {
    double f = std::numeric_limits<double>::infinity();
    try {
      f = nll_at(data, structure, theta, config.jitter, config.gradient, &g);
    } catch (const Error&) {
    }
    if (!std::isfinite(f) || !g.allFinite()) {
      if (it == 0) {
        std::ostringstream os;
        os << "non-finite nll at initial hypers [" << theta.transpose() << "]";
        throw Error(ErrorCode::NonFiniteLikelihood, os.str());
      }
      theta = best.theta;
      lr *= 0.5;
      m.setZero();
      v.setZero();
      t = 0;
      continue;
    }
    if (f < best.nll - 1e-6 * (std::abs(best.nll) + 1e-12) || !std::isfinite(best.nll)) {
      since_improvement = 0;
    } else if (config.patience > 0 && ++since_improvement >= config.patience) {
      if (f < best.nll) best = {theta, f};
      break;
    }
    if (f < best.nll) best = {theta, f};
    ++t;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    theta = theta.cwiseMax(-kLogBound).cwiseMin(kLogBound);
  }
  if (!std::isfinite(best.nll))
    best.nll = nll_at(data, structure, best.theta, config.jitter, config.gradient, nullptr);
  return best;
}

}  // namespace

TrainedModel train(std::vector<TransformedDataset> datasets, const ModelSpec& spec,
                   const std::vector<KernelSpec>& init_kernels,
                   const std::vector<double>& init_log_sigma, const TrainConfig& config) {
  if (datasets.empty()) throw Error(ErrorCode::InvalidArgument, "no datasets to train on");
  if (init_kernels.size() != datasets.size() || init_log_sigma.size() != datasets.size())
    throw Error(ErrorCode::DimensionMismatch, "one initial kernel per dimension required");
  const std::size_t D = datasets.size();

  auto fit_dim = [&](std::size_t u) {
    const KernelSpec& structure = init_kernels[u];
    const Vector theta0 = pack_parameters(structure, init_log_sigma[u]);
    FitResult best = adam_fit(datasets[u], structure, theta0, config);
    std::mt19937_64 rng(config.seed * 1000003ULL + u * 7919ULL + 17ULL);
    std::normal_distribution<double> normal(0.0, 0.5);
    for (int r = 1; r < config.restarts; ++r) {
      Vector start = theta0;
      for (Index p = 0; p < start.size(); ++p) start(p) += normal(rng);
      try {
        FitResult cand = adam_fit(datasets[u], structure, start, config);
        if (cand.nll < best.nll) best = cand;
      } catch (const Error&) {
      }
    }
    KernelSpec kernel = structure;
    double log_sigma = 0.0;
    unpack_parameters(best.theta, kernel, log_sigma);
    return condition(datasets[u], kernel, log_sigma, config.jitter);
  };

  std::vector<std::future<DimensionPosterior>> jobs;
  for (std::size_t u = 0; u < D; ++u) jobs.push_back(std::async(std::launch::async, fit_dim, u));
  TrainedModel model;
  model.spec = spec;
  model.seed = config.seed;
  for (auto& j : jobs) model.dims.push_back(j.get());
  return model;
}

void default_initialization(const std::vector<TransformedDataset>& euler_data,
                            std::vector<KernelSpec>& kernels, std::vector<double>& log_sigma) {
  kernels.clear();
  log_sigma.clear();
  for (const auto& ds : euler_data) {
    const Index d = ds.input_dim();
    const Matrix& X = ds.points;
    Vector ls(d);
    for (Index j = 0; j < d; ++j) {
      const double mean = X.col(j).mean();
      const double sd = std::sqrt((X.col(j).array() - mean).square().mean());
      ls(j) = std::max(sd, 1e-3);
    }
    const Vector rate = ds.Y.array() / ds.steps.array();
    const double rmean = rate.mean();
    const double sf2 = std::max((rate.array() - rmean).square().mean(), 1e-6);
    // Noise level from differences of consecutive observations, which
    // cancel the smooth part of the signal.
    double sigma = 1e-3;
    if (ds.rows() > 2) {
      const Vector dy = ds.Y.tail(ds.rows() - 1) - ds.Y.head(ds.rows() - 1);
      sigma = std::sqrt(dy.squaredNorm() / static_cast<double>(dy.size()) / 6.0);
    }
    const double xscale = ls.maxCoeff();
    sigma = std::clamp(sigma, 1e-4 * xscale, 0.5 * xscale);

    KernelSpec k;
    k.family = KernelFamily::ARD;
    k.num_levels = 1;
    k.output_dim = ds.output_dim;
    k.levels.push_back(ARDHypers::from_values(sf2, ls));
    kernels.push_back(std::move(k));
    log_sigma.push_back(std::log(sigma));
  }
}

std::uint64_t trajectory_hash(const Trajectory& traj) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](double v) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  };
  for (double t : traj.grid.times()) mix(t);
  for (Index n = 0; n < traj.size(); ++n)
    for (Index u = 0; u < traj.dim(); ++u) mix(traj.states(n, u));
  return h;
}

namespace {

std::vector<KernelSpec> target_kernels(const TrainedModel& euler, const ModelSpec& spec) {
  std::vector<ARDHypers> base;
  for (const auto& dim : euler.dims) base.push_back(dim.kernel.levels.front());
  std::vector<KernelSpec> out;
  for (std::size_t u = 0; u < euler.dims.size(); ++u) {
    KernelSpec k;
    k.output_dim = static_cast<Index>(u);
    if (spec.pipeline() == Pipeline::Multistep) {
      k.family = KernelFamily::ARD;
      k.num_levels = 1;
      k.levels = {base[u]};
    } else if (spec.family == KernelFamily::TaylorAdapted) {
      if (spec.order > 3)
        throw Error(ErrorCode::UnsupportedScheme, "adapted Taylor kernels stop at order 3");
      k.family = KernelFamily::TaylorAdapted;
      k.num_levels = spec.order;
      k.base = base;
    } else {
      k.family = KernelFamily::TaylorIndependent;
      k.num_levels = spec.order;
      k.levels.assign(static_cast<std::size_t>(spec.order), base[u]);
    }
    out.push_back(std::move(k));
  }
  return out;
}

bool is_euler(const ModelSpec& spec) {
  return spec.order == 1 && (spec.kind == SchemeKind::AB || spec.kind == SchemeKind::Taylor) &&
         spec.family != KernelFamily::TaylorAdapted;
}

}  // namespace

TrainedModel train_model(const Trajectory& traj, const ModelSpec& spec, const TrainConfig& config,
                         const TrainedModel* pretrained) {
  const std::uint64_t hash = trajectory_hash(traj);
  ModelSpec euler_spec{SchemeKind::AB, 1, KernelFamily::ARD, spec.noise};

  TrainedModel euler;
  if (pretrained) {
    if (pretrained->data_hash != hash)
      throw Error(ErrorCode::ModelDataMismatch, "pretrained model was fit to different data");
    euler = *pretrained;
  } else {
    auto euler_data = make_datasets(traj, euler_spec);
    std::vector<KernelSpec> k0;
    std::vector<double> s0;
    default_initialization(euler_data, k0, s0);
    TrainConfig pre = config;
    pre.iterations = config.pretrain_euler ? config.pretrain_iterations : 0;
    euler = pre.iterations > 0 ? train(std::move(euler_data), euler_spec, k0, s0, pre)
                               : [&] {
                                   TrainedModel m;
                                   m.spec = euler_spec;
                                   for (std::size_t u = 0; u < euler_data.size(); ++u)
                                     m.dims.push_back(condition(euler_data[u], k0[u], s0[u], config.jitter));
                                   return m;
                                 }();
    euler.data_hash = hash;
    euler.seed = config.seed;
  }

  if (is_euler(spec) && spec.kind == SchemeKind::AB) {
    euler.spec = spec;
    return euler;
  }

  auto data = make_datasets(traj, spec);
  std::vector<double> s0;
  for (const auto& dim : euler.dims) s0.push_back(dim.log_sigma);
  TrainedModel model = train(std::move(data), spec, target_kernels(euler, spec), s0, config);
  model.data_hash = hash;
  model.seed = config.seed;
  return model;
}

PosteriorMoments posterior(const TrainedModel& model, const Vector& x_star, int level) {
  PosteriorMoments pm;
  const Index D = model.state_dim();
  pm.mean.resize(D);
  pm.variance.resize(D);
  for (Index u = 0; u < D; ++u) {
    const auto& dim = model.dims[static_cast<std::size_t>(u)];
    const Vector c = cross(dim.data, dim.kernel, level, x_star);
    pm.mean(u) = c.dot(dim.fact.alpha);
    const Vector v = dim.fact.llt.matrixL().solve(c);
    const double prior = dim.kernel.eval(level, x_star, x_star);
    pm.variance(u) = std::max(0.0, prior - v.squaredNorm());
  }
  return pm;
}

void joint_posterior(const DimensionPosterior& dim, int level, const Matrix& points, Vector& mean,
                     Matrix& cov) {
  const Index T = points.rows();
  Matrix C(dim.data.rows(), T);
  for (Index t = 0; t < T; ++t) C.col(t) = cross(dim.data, dim.kernel, level, points.row(t).transpose());
  mean = C.transpose() * dim.fact.alpha;
  const Matrix V = dim.fact.llt.matrixL().solve(C);
  cov.resize(T, T);
  const LevelKernel k(dim.kernel, level);
  for (Index a = 0; a < T; ++a)
    for (Index b = 0; b < T; ++b) cov(a, b) = k(points.row(a).transpose(), points.row(b).transpose());
  cov.noalias() -= V.transpose() * V;
}

namespace {

nlohmann::json hypers_to_json(const ARDHypers& h) {
  return {{"log_signal_variance", h.log_signal_variance},
          {"log_lengthscales", std::vector<double>(h.log_lengthscales.data(),
                                                   h.log_lengthscales.data() + h.dim())}};
}

ARDHypers hypers_from_json(const nlohmann::json& j) {
  ARDHypers h;
  h.log_signal_variance = j.at("log_signal_variance").get<double>();
  const auto ls = j.at("log_lengthscales").get<std::vector<double>>();
  h.log_lengthscales = Eigen::Map<const Vector>(ls.data(), static_cast<Index>(ls.size()));
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

}  // namespace

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "gpode-model-1";
  j["kind"] = to_string(model.spec.kind);
  j["order"] = model.spec.order;
  j["family"] = to_string(model.spec.family);
  j["noise"] = to_string(model.spec.noise);
  j["seed"] = model.seed;
  j["data_hash"] = hex(model.data_hash);
  nlohmann::json dims = nlohmann::json::array();
  for (const auto& dim : model.dims) {
    nlohmann::json dj;
    dj["log_sigma"] = dim.log_sigma;
    dj["kernel_family"] = to_string(dim.kernel.family);
    dj["num_levels"] = dim.kernel.num_levels;
    dj["levels"] = nlohmann::json::array();
    for (const auto& h : dim.kernel.levels) dj["levels"].push_back(hypers_to_json(h));
    dj["base"] = nlohmann::json::array();
    for (const auto& h : dim.kernel.base) dj["base"].push_back(hypers_to_json(h));
    dims.push_back(dj);
  }
  j["dims"] = dims;
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path.string());
  os << j.dump(2) << '\n';
}

TrainedModel load_model(const std::filesystem::path& path, const Trajectory& traj,
                        double jitter_rel) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, std::string("malformed model file: ") + e.what());
  }
  TrainedModel model;
  model.spec.kind = scheme_kind_from_string(j.at("kind").get<std::string>());
  model.spec.order = j.at("order").get<int>();
  model.spec.family = kernel_family_from_string(j.at("family").get<std::string>());
  model.spec.noise = noise_variant_from_string(j.at("noise").get<std::string>());
  model.seed = j.at("seed").get<Seed>();
  model.data_hash = std::stoull(j.at("data_hash").get<std::string>(), nullptr, 16);
  if (trajectory_hash(traj) != model.data_hash)
    throw Error(ErrorCode::ModelDataMismatch,
                "training data hash does not match the model file " + path.string());
  auto data = make_datasets(traj, model.spec);
  const auto& dims = j.at("dims");
  if (dims.size() != data.size())
    throw Error(ErrorCode::ModelDataMismatch, "model dimension does not match data");
  for (std::size_t u = 0; u < data.size(); ++u) {
    const auto& dj = dims[u];
    KernelSpec k;
    k.family = kernel_family_from_string(dj.at("kernel_family").get<std::string>());
    k.num_levels = dj.at("num_levels").get<int>();
    k.output_dim = static_cast<Index>(u);
    for (const auto& h : dj.at("levels")) k.levels.push_back(hypers_from_json(h));
    for (const auto& h : dj.at("base")) k.base.push_back(hypers_from_json(h));
    model.dims.push_back(condition(data[u], k, dj.at("log_sigma").get<double>(), jitter_rel));
  }
  return model;
}

}  // namespace gpode
