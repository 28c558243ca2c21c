#include "gpode/sampler.hpp"

#include "gpode/error.hpp"

#include <cmath>

namespace gpode {

double SampledDimension::eval_prior(int level, const Vector& x) const {
  const auto l = static_cast<std::size_t>(level - 1);
  const Vector proj = bases.at(l).frequencies * x;
  const Vector& wc = cos_weights[l];
  const Vector& ws = sin_weights[l];
  double acc = 0.0;
  for (Index k = 0; k < proj.size(); ++k) acc += wc(k) * std::cos(proj(k)) + ws(k) * std::sin(proj(k));
  return acc;
}

double SampledDimension::eval(int level, const Vector& x) const {
  const auto l = static_cast<std::size_t>(level - 1);
  return eval_prior(level, x) + level_kernels[l].expand(points, point_coefs[l], x);
}

Vector SampledDynamics::eval_level(int level, const Vector& x) const {
  Vector out(dim());
  for (Index u = 0; u < dim(); ++u) out(u) = dims[static_cast<std::size_t>(u)].eval(level, x);
  return out;
}

Matrix SampledDynamics::eval_levels(const Vector& x) const {
  Matrix out(num_levels, dim());
  for (int l = 1; l <= num_levels; ++l) out.row(l - 1) = eval_level(l, x).transpose();
  return out;
}

Vector draw_noise(const DimensionPosterior& dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  const Index R = dim.data.rows();
  Vector z(R);
  for (Index i = 0; i < R; ++i) z(i) = normal(rng);
  const NoiseModel noise = dim.noise();
  if (noise.variant == NoiseVariant::Full) {
    Matrix S = noise.covariance();
    S.diagonal().array() += dim.fact.jitter;
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success)
      throw Error(ErrorCode::FactorizationFailed, "noise covariance is not positive definite");
    return llt.matrixL() * z;
  }
  return ((noise.diagonal().array() + dim.fact.jitter).sqrt() * z.array()).matrix();
}

namespace {

RFFBasis level_basis(const KernelSpec& k, int level, Index S, std::mt19937_64& rng) {
  switch (k.family) {
    case KernelFamily::ARD: return sample_rff(k.levels.front(), S, rng);
    case KernelFamily::TaylorIndependent:
      return sample_rff(k.levels.at(static_cast<std::size_t>(level - 1)), S, rng);
    case KernelFamily::TaylorAdapted:
      return sample_rff_adapted(k.base, k.output_dim, level, S, rng);
  }
  return {};
}

SampledDimension draw_dimension(const DimensionPosterior& dim, int num_levels, Index S,
                                std::mt19937_64& rng) {
  const TransformedDataset& data = dim.data;
  const Index R = data.rows();
  const Index n_points = R + data.window() - 1;
  SampledDimension sd;
  sd.kernel = dim.kernel;
  sd.points = data.points.topRows(n_points);

  std::normal_distribution<double> normal;
  Vector prior_at_rows = Vector::Zero(R);
  for (int l = 1; l <= num_levels; ++l) {
    RFFBasis basis = level_basis(dim.kernel, l, S, rng);
    Vector w(basis.feature_dim());
    for (Index k = 0; k < w.size(); ++k) w(k) = normal(rng);
    const Vector path = basis.features(sd.points) * w;
    const Matrix W = data.level_weights(l);
    for (Index n = 0; n < R; ++n)
      for (Index j = 0; j < W.cols(); ++j) prior_at_rows(n) += W(n, j) * path(n + j);
    const Index nf = basis.count();
    const Vector scale = (basis.amplitudes / static_cast<double>(nf)).cwiseSqrt();
    sd.cos_weights.push_back(scale.cwiseProduct(w.head(nf)));
    sd.sin_weights.push_back(scale.cwiseProduct(w.tail(nf)));
    sd.bases.push_back(std::move(basis));
    sd.weights.push_back(std::move(w));
  }
  const Vector eps = draw_noise(dim, rng);
  sd.correction = dim.fact.llt.solve(data.Y - prior_at_rows - eps);
  for (int l = 1; l <= num_levels; ++l) {
    sd.point_coefs.push_back(fold_to_points(data.level_weights(l), sd.correction, n_points));
    sd.level_kernels.emplace_back(dim.kernel, l);
  }
  return sd;
}

SampledDynamics draw_pipeline(const TrainedModel& model, Pipeline pipeline, Index S,
                              std::mt19937_64& rng) {
  if (S < 1) throw Error(ErrorCode::InvalidArgument, "need at least one feature");
  if (model.spec.pipeline() != pipeline)
    throw Error(ErrorCode::InvalidArgument, "model pipeline does not match the sampler");
  SampledDynamics out;
  out.pipeline = pipeline;
  out.num_levels = model.num_levels();
  for (const auto& dim : model.dims) out.dims.push_back(draw_dimension(dim, out.num_levels, S, rng));
  return out;
}

}  // namespace

SampledDynamics draw_multistep(const TrainedModel& model, Index S, std::mt19937_64& rng) {
  return draw_pipeline(model, Pipeline::Multistep, S, rng);
}

SampledDynamics draw_taylor(const TrainedModel& model, Index S, std::mt19937_64& rng) {
  return draw_pipeline(model, Pipeline::Taylor, S, rng);
}

SampledDynamics draw(const TrainedModel& model, Index S, Seed seed) {
  std::mt19937_64 rng(seed);
  return draw_pipeline(model, model.spec.pipeline(), S, rng);
}

}  // namespace gpode
