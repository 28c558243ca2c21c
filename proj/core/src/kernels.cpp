#include "gpode/kernels.hpp"

#include "gpode/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gpode {

ARDHypers ARDHypers::from_values(double signal_variance, const Vector& lengthscales) {
  if (!(signal_variance > 0.0) || (lengthscales.array() <= 0.0).any())
    throw Error(ErrorCode::InvalidArgument, "ARD hyperparameters must be positive");
  ARDHypers h;
  h.log_signal_variance = std::log(signal_variance);
  h.log_lengthscales = lengthscales.array().log().matrix();
  return h;
}

double ard_eval(const ARDHypers& h, const Vector& x, const Vector& y) {
  double q = 0.0;
  for (Index j = 0; j < x.size(); ++j) {
    const double r = (x(j) - y(j)) / h.lengthscale(j);
    q += r * r;
  }
  return h.signal_variance() * std::exp(-0.5 * q);
}

namespace {

void check_base(std::span<const ARDHypers> base, Index i, const Vector& x) {
  if (static_cast<Index>(base.size()) != x.size() || i < 0 || i >= x.size())
    throw Error(ErrorCode::DimensionMismatch, "adapted kernels need one base kernel per dimension");
}

}  // namespace

double taylor_adapted_k2(std::span<const ARDHypers> base, Index i, const Vector& x,
                         const Vector& y) {
  check_base(base, i, x);
  const Index d = x.size();
  const Vector li = base[static_cast<std::size_t>(i)].lengthscales();
  double sum = 0.0;
  for (Index j = 0; j < d; ++j) {
    const auto& bj = base[static_cast<std::size_t>(j)];
    const Vector lj = bj.lengthscales();
    const double lij2 = li(j) * li(j);
    const double rj = x(j) - y(j);
    double q = 0.0;
    for (Index k = 0; k < d; ++k) {
      const double r = x(k) - y(k);
      q += r * r * (1.0 / (li(k) * li(k)) + 1.0 / (lj(k) * lj(k)));
    }
    sum += bj.signal_variance() / (lij2 * lij2) * (lij2 - rj * rj) * std::exp(-0.5 * q);
  }
  return base[static_cast<std::size_t>(i)].signal_variance() * sum;
}

double taylor_adapted_k3(std::span<const ARDHypers> base, Index i, const Vector& x,
                         const Vector& y) {
  check_base(base, i, x);
  const Index d = x.size();
  const Vector r = x - y;
  const Vector inv_li2 = base[static_cast<std::size_t>(i)].lengthscales().array().square().inverse();
  Matrix inv_l2(d, d);  // row j: 1 / l_{j,k}^2 of base kernel j
  for (Index j = 0; j < d; ++j)
    inv_l2.row(j) = base[static_cast<std::size_t>(j)].lengthscales().array().square().inverse().matrix().transpose();

  double total = 0.0;
  for (Index l = 0; l < d; ++l) {
    const double sl2 = base[static_cast<std::size_t>(l)].signal_variance();
    for (Index j = 0; j < d; ++j) {
      const double sj2 = base[static_cast<std::size_t>(j)].signal_variance();
      const double lij2 = 1.0 / inv_li2(j);
      const double cj = sj2 / (lij2 * lij2);
      // L = harmonic combination of the (i, j) lengthscales along l.
      const double L = 1.0 / (inv_li2(l) + inv_l2(j, l));
      double poly;
      if (j == l) {
        const double r2 = r(l) * r(l);
        poly = r2 * r2 / (L * L) - (5.0 / L + lij2 / (L * L)) * r2 + 2.0 + lij2 / L;
      } else {
        poly = (lij2 - r(j) * r(j)) * (L - r(l) * r(l)) / (L * L);
      }
      double q = 0.0;
      for (Index k = 0; k < d; ++k) q += r(k) * r(k) * (inv_li2(k) + inv_l2(j, k) + inv_l2(l, k));
      total += sl2 * cj * poly * std::exp(-0.5 * q);
    }
  }
  return base[static_cast<std::size_t>(i)].signal_variance() * total;
}

double taylor_adapted_kernel(std::span<const ARDHypers> base, Index i, int level,
                             const Vector& x, const Vector& y) {
  switch (level) {
    case 1: return ard_eval(base[static_cast<std::size_t>(i)], x, y);
    case 2: return taylor_adapted_k2(base, i, x, y);
    case 3: return taylor_adapted_k3(base, i, x, y);
    default:
      throw Error(ErrorCode::UnsupportedScheme, "adapted Taylor kernels exist for levels 1..3");
  }
}

double lie_kernel_step(const KernelFn& k_level, std::span<const ARDHypers> base, const Vector& x,
                       const Vector& y, double rel_step) {
  const Index d = x.size();
  if (static_cast<Index>(base.size()) != d)
    throw Error(ErrorCode::DimensionMismatch, "need one base kernel per dimension");
  double total = 0.0;
  Vector xp = x, xm = x, yp = y, ym = y;
  for (Index j = 0; j < d; ++j) {
    double lmin = std::numeric_limits<double>::infinity();
    for (const auto& b : base) lmin = std::min(lmin, b.lengthscale(j));
    const double delta = rel_step * lmin;
    xp(j) = x(j) + delta;
    xm(j) = x(j) - delta;
    yp(j) = y(j) + delta;
    ym(j) = y(j) - delta;
    const double mixed =
        (k_level(xp, yp) - k_level(xp, ym) - k_level(xm, yp) + k_level(xm, ym)) / (4.0 * delta * delta);
    xp(j) = xm(j) = x(j);
    yp(j) = ym(j) = y(j);
    total += mixed * ard_eval(base[static_cast<std::size_t>(j)], x, y);
  }
  return total;
}

Vector RFFBasis::features(const Vector& x) const {
  const Index S = count();
  Vector out(2 * S);
  const Vector proj = frequencies * x;
  const double inv_s = 1.0 / static_cast<double>(S);
  for (Index k = 0; k < S; ++k) {
    const double scale = std::sqrt(amplitudes(k) * inv_s);
    out(k) = scale * std::cos(proj(k));
    out(S + k) = scale * std::sin(proj(k));
  }
  return out;
}

Matrix RFFBasis::features(const Matrix& points) const {
  const Index S = count();
  const Matrix proj = points * frequencies.transpose();  // n x S
  const Eigen::RowVectorXd scale =
      (amplitudes.array() / static_cast<double>(S)).sqrt().matrix().transpose();
  Matrix out(points.rows(), 2 * S);
  out.leftCols(S) = (proj.array().cos().rowwise() * scale.array()).matrix();
  out.rightCols(S) = (proj.array().sin().rowwise() * scale.array()).matrix();
  return out;
}

RFFBasis sample_rff(const ARDHypers& h, Index S, std::mt19937_64& rng) {
  if (S < 1) throw Error(ErrorCode::InvalidArgument, "need at least one feature");
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index d = h.dim();
  RFFBasis basis;
  basis.frequencies.resize(S, d);
  for (Index k = 0; k < S; ++k)
    for (Index j = 0; j < d; ++j) basis.frequencies(k, j) = normal(rng) / h.lengthscale(j);
  basis.amplitudes = Vector::Constant(S, h.signal_variance());
  return basis;
}

RFFBasis sample_rff(const ARDHypers& h, Index S, Seed seed) {
  std::mt19937_64 rng(seed);
  return sample_rff(h, S, rng);
}

RFFBasis sample_rff_adapted(std::span<const ARDHypers> base, Index i, int level, Index S,
                            std::mt19937_64& rng) {
  if (S < 1) throw Error(ErrorCode::InvalidArgument, "need at least one feature");
  if (level < 1) throw Error(ErrorCode::InvalidArgument, "level must be >= 1");
  const Index d = static_cast<Index>(base.size());
  if (i < 0 || i >= d) throw Error(ErrorCode::DimensionMismatch, "output dimension out of range");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<Index> pick(0, d - 1);
  RFFBasis basis;
  basis.frequencies.resize(S, d);
  basis.amplitudes.resize(S);
  for (Index k = 0; k < S; ++k) {
    const auto& bi = base[static_cast<std::size_t>(i)];
    Vector w(d);
    for (Index c = 0; c < d; ++c) w(c) = normal(rng) / bi.lengthscale(c);
    double amp = bi.signal_variance();
    for (int l = 1; l < level; ++l) {
      const Index j = pick(rng);
      const auto& bj = base[static_cast<std::size_t>(j)];
      amp *= static_cast<double>(d) * bj.signal_variance() * w(j) * w(j);
      for (Index c = 0; c < d; ++c) w(c) += normal(rng) / bj.lengthscale(c);
    }
    basis.frequencies.row(k) = w.transpose();
    basis.amplitudes(k) = amp;
  }
  return basis;
}

}  // namespace gpode
