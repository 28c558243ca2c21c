#include "gpode/obsmodel.hpp"

#include "gpode/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace gpode {

std::string to_string(NoiseVariant v) {
  switch (v) {
    case NoiseVariant::Full: return "full";
    case NoiseVariant::DiagTimeVarying: return "diag";
    case NoiseVariant::IIDConstant: return "iid";
  }
  return "?";
}

NoiseVariant noise_variant_from_string(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "full") return NoiseVariant::Full;
  if (s == "diag" || s == "diagonal") return NoiseVariant::DiagTimeVarying;
  if (s == "iid" || s == "constant") return NoiseVariant::IIDConstant;
  throw Error(ErrorCode::InvalidArgument, "unknown noise variant '" + name + "'");
}

Index NoiseModel::size() const noexcept {
  return variant == NoiseVariant::Full ? unit_full.rows() : unit_diag.size();
}

NoiseModel NoiseModel::with_sigma2(double s2) const {
  NoiseModel out = *this;
  out.sigma2 = s2;
  return out;
}

Matrix NoiseModel::covariance() const {
  if (variant == NoiseVariant::Full) return sigma2 * unit_full;
  return (sigma2 * unit_diag).asDiagonal();
}

Vector NoiseModel::diagonal() const {
  if (variant == NoiseVariant::Full) return sigma2 * unit_full.diagonal();
  return sigma2 * unit_diag;
}

void NoiseModel::add_to(Matrix& K) const {
  if (variant == NoiseVariant::Full)
    K.noalias() += sigma2 * unit_full;
  else
    K.diagonal() += sigma2 * unit_diag;
}

Index TransformedDataset::window() const noexcept {
  return pipeline == Pipeline::Multistep ? b.cols() : 1;
}

Matrix TransformedDataset::level_weights(int level) const {
  if (pipeline == Pipeline::Multistep) {
    if (level != 1) throw Error(ErrorCode::InvalidArgument, "multistep datasets have one level");
    return b;
  }
  if (level < 1) throw Error(ErrorCode::InvalidArgument, "Taylor levels start at 1");
  double fact = 1.0;
  for (int l = 2; l <= level; ++l) fact *= l;
  return (steps.array().pow(level) / fact).matrix();
}

Vector TransformedDataset::recompute_observations() const {
  const Index R = pipeline == Pipeline::Multistep ? a.rows() : points.rows() - 1;
  Vector y(R);
  if (pipeline == Pipeline::Multistep) {
    for (Index n = 0; n < R; ++n) {
      double acc = 0.0;
      for (Index j = 0; j < a.cols(); ++j) acc += a(n, j) * points(n + j, output_dim);
      y(n) = acc;
    }
  } else {
    for (Index n = 0; n < R; ++n) y(n) = points(n + 1, output_dim) - points(n, output_dim);
  }
  return y;
}

TransformedDataset multistep_observations(const Trajectory& traj, const MultistepScheme& scheme,
                                          Index u) {
  const Index M = scheme.steps;
  if (traj.size() < M + 1)
    throw Error(ErrorCode::TrajectoryTooShort,
                "trajectory has " + std::to_string(traj.size()) + " points, scheme needs " +
                    std::to_string(M + 1));
  if (scheme.rows() != traj.size() - M)
    throw Error(ErrorCode::DimensionMismatch, "scheme was generated for a different grid");
  if (u < 0 || u >= traj.dim()) throw Error(ErrorCode::DimensionMismatch, "dimension out of range");
  TransformedDataset ds;
  ds.pipeline = Pipeline::Multistep;
  ds.output_dim = u;
  ds.points = traj.states;
  ds.a = scheme.a;
  ds.b = scheme.b;
  ds.kind = scheme.kind;
  ds.order = scheme.order;
  ds.steps.resize(scheme.rows());
  for (Index n = 0; n < scheme.rows(); ++n) ds.steps(n) = traj.grid.step(n + M - 1);
  ds.Y = ds.recompute_observations();
  return ds;
}

TransformedDataset taylor_observations(const Trajectory& traj, Index u) {
  if (traj.size() < 2) throw Error(ErrorCode::TrajectoryTooShort, "need at least 2 points");
  if (u < 0 || u >= traj.dim()) throw Error(ErrorCode::DimensionMismatch, "dimension out of range");
  TransformedDataset ds;
  ds.pipeline = Pipeline::Taylor;
  ds.output_dim = u;
  ds.points = traj.states;
  ds.kind = SchemeKind::Taylor;
  ds.steps.resize(traj.size() - 1);
  for (Index n = 0; n + 1 < traj.size(); ++n) ds.steps(n) = traj.grid.step(n);
  ds.Y = ds.recompute_observations();
  return ds;
}

NoiseModel multistep_noise(const MultistepScheme& scheme, double sigma, NoiseVariant variant) {
  if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
  const Index R = scheme.rows();
  const Index M = scheme.steps;
  NoiseModel nm;
  nm.variant = variant;
  nm.sigma2 = sigma * sigma;
  switch (variant) {
    case NoiseVariant::Full: {
      // Sigma_y = At At^T, At(n, n + j) = a(n, j); banded with half width M.
      nm.unit_full = Matrix::Zero(R, R);
      for (Index n = 0; n < R; ++n)
        for (Index m = std::max<Index>(0, n - M); m <= std::min<Index>(R - 1, n + M); ++m) {
          double acc = 0.0;
          for (Index j = 0; j <= M; ++j) {
            const Index i = n + j - m;  // column n + j of At in row m
            if (i >= 0 && i <= M) acc += scheme.a(n, j) * scheme.a(m, i);
          }
          nm.unit_full(n, m) = acc;
        }
      break;
    }
    case NoiseVariant::DiagTimeVarying:
      nm.unit_diag = scheme.a.rowwise().squaredNorm();
      break;
    case NoiseVariant::IIDConstant:
      nm.unit_diag = Vector::Constant(R, scheme.a.row(0).squaredNorm());
      break;
  }
  return nm;
}

NoiseModel taylor_noise(Index n_points, double sigma, NoiseVariant variant) {
  if (n_points < 2) throw Error(ErrorCode::TrajectoryTooShort, "need at least 2 points");
  if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
  const Index R = n_points - 1;
  NoiseModel nm;
  nm.variant = variant;
  nm.sigma2 = sigma * sigma;
  if (variant == NoiseVariant::Full) {
    nm.unit_full = Matrix::Zero(R, R);
    for (Index n = 0; n < R; ++n) {
      nm.unit_full(n, n) = 2.0;
      if (n + 1 < R) nm.unit_full(n, n + 1) = nm.unit_full(n + 1, n) = -1.0;
    }
  } else {
    nm.unit_diag = Vector::Constant(R, 2.0);
  }
  return nm;
}

}  // namespace gpode
