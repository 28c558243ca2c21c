#include "gpode/mscoef.hpp"

#include "gpode/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace gpode {

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::AB: return "AB";
    case SchemeKind::AM: return "AM";
    case SchemeKind::BDF: return "BDF";
    case SchemeKind::Taylor: return "Taylor";
  }
  return "?";
}

SchemeKind scheme_kind_from_string(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "ab") return SchemeKind::AB;
  if (s == "am") return SchemeKind::AM;
  if (s == "bdf") return SchemeKind::BDF;
  if (s == "taylor") return SchemeKind::Taylor;
  throw Error(ErrorCode::UnsupportedScheme, "unknown scheme kind '" + name + "'");
}

int steps_for(SchemeKind kind, int order) {
  if (order < 1 || order > 3)
    throw Error(ErrorCode::UnsupportedScheme,
                to_string(kind) + " order " + std::to_string(order) + " is not supported (1..3)");
  switch (kind) {
    case SchemeKind::AB:
    case SchemeKind::BDF: return order;
    case SchemeKind::AM: return order == 3 ? 2 : 1;
    case SchemeKind::Taylor: break;
  }
  throw Error(ErrorCode::UnsupportedScheme, "Taylor integrators have no multistep coefficients");
}

namespace {

// Which coefficients are unknown in one window, and the fixed values of the
// rest. Unknown a's and b's are solved from the order conditions.
struct Template {
  Vector a_fixed;
  Vector b_fixed;
  std::vector<int> a_free;
  std::vector<int> b_free;
};

Template make_template(SchemeKind kind, int order, int M) {
  Template t;
  t.a_fixed = Vector::Zero(M + 1);
  t.b_fixed = Vector::Zero(M + 1);
  t.a_fixed(M) = 1.0;
  switch (kind) {
    case SchemeKind::AB:
      t.a_fixed(M - 1) = -1.0;
      for (int j = 0; j < M; ++j) t.b_free.push_back(j);
      break;
    case SchemeKind::AM:
      t.a_fixed(M - 1) = -1.0;
      if (order == 1) {
        t.b_free.push_back(M);  // implicit Euler: b = (0, h)
      } else {
        for (int j = 0; j <= M; ++j) t.b_free.push_back(j);
      }
      break;
    case SchemeKind::BDF:
      for (int j = 0; j < M; ++j) t.a_free.push_back(j);
      t.b_free.push_back(M);
      break;
    case SchemeKind::Taylor: break;
  }
  return t;
}

// Condition p on the scaled monomial q(t) = tau^p, tau = (t - t_n) / s:
//   sum_j a_j tau_j^p - sum_j (b_j / s) p tau_j^{p-1} = 0.
double monomial(double tau, int p) { return p == 0 ? 1.0 : std::pow(tau, p); }
double dmonomial(double tau, int p) { return p == 0 ? 0.0 : p * (p == 1 ? 1.0 : std::pow(tau, p - 1)); }

}  // namespace

MultistepScheme generate_scheme(SchemeKind kind, int order, const TimeGrid& grid) {
  const int M = steps_for(kind, order);
  if (grid.size() < M + 1)
    throw Error(ErrorCode::GridTooShort, "grid has " + std::to_string(grid.size()) +
                                             " points, scheme needs at least " +
                                             std::to_string(M + 1));
  const Template tmpl = make_template(kind, order, M);
  const Index rows = grid.size() - M;
  const int n_unknown = static_cast<int>(tmpl.a_free.size() + tmpl.b_free.size());

  MultistepScheme scheme;
  scheme.kind = kind;
  scheme.order = order;
  scheme.steps = M;
  scheme.grid = grid;
  scheme.a.resize(rows, M + 1);
  scheme.b.resize(rows, M + 1);

  std::vector<double> tau(static_cast<std::size_t>(M + 1));
  for (Index n = 0; n < rows; ++n) {
    const double s = (grid[n + M] - grid[n]) / M;
    for (int j = 0; j <= M; ++j) tau[static_cast<std::size_t>(j)] = (grid[n + j] - grid[n]) / s;

    // Conditions with no unknown coefficient (p = 0 for the Adams families)
    // hold by construction and are dropped.
    Matrix A(order + 1, n_unknown);
    Vector rhs(order + 1);
    int eq = 0;
    for (int p = 0; p <= order; ++p) {
      Eigen::RowVectorXd row(n_unknown);
      int c = 0;
      for (int j : tmpl.a_free) row(c++) = monomial(tau[static_cast<std::size_t>(j)], p);
      // Unknown b's enter as scaled bt = b / s.
      for (int j : tmpl.b_free) row(c++) = -dmonomial(tau[static_cast<std::size_t>(j)], p);
      double known = 0.0;
      for (int j = 0; j <= M; ++j) {
        known += tmpl.a_fixed(j) * monomial(tau[static_cast<std::size_t>(j)], p);
        known -= (tmpl.b_fixed(j) / s) * dmonomial(tau[static_cast<std::size_t>(j)], p);
      }
      if (row.cwiseAbs().maxCoeff() == 0.0) continue;
      A.row(eq) = row;
      rhs(eq) = -known;
      ++eq;
    }
    if (eq != n_unknown)
      throw Error(ErrorCode::UnsupportedScheme, "order conditions do not determine the scheme");
    Eigen::FullPivLU<Matrix> lu(A.topRows(eq));
    if (!lu.isInvertible() || std::abs(lu.determinant()) < 1e-13)
      throw Error(ErrorCode::SingularConditions,
                  "singular order conditions at row " + std::to_string(n));
    const Vector sol = lu.solve(rhs.head(eq));

    Vector a = tmpl.a_fixed;
    Vector b = tmpl.b_fixed;
    int c = 0;
    for (int j : tmpl.a_free) a(j) = sol(c++);
    for (int j : tmpl.b_free) b(j) = sol(c++) * s;
    scheme.a.row(n) = a.transpose();
    scheme.b.row(n) = b.transpose();
  }
  return scheme;
}

double verify_consistency(const MultistepScheme& scheme, int degree) {
  if (degree < 0) degree = scheme.order;
  const int M = scheme.steps;
  double worst = 0.0;
  for (Index n = 0; n < scheme.rows(); ++n) {
    const double s = (scheme.grid[n + M] - scheme.grid[n]) / M;
    for (int p = 0; p <= degree; ++p) {
      double r = 0.0;
      for (int j = 0; j <= M; ++j) {
        const double tau = (scheme.grid[n + j] - scheme.grid[n]) / s;
        r += scheme.a(n, j) * monomial(tau, p) - (scheme.b(n, j) / s) * dmonomial(tau, p);
      }
      worst = std::max(worst, std::abs(r));
    }
  }
  return worst;
}

bool is_explicit(const MultistepScheme& scheme) {
  return (scheme.b.col(scheme.steps).array() == 0.0).all();
}

void save_scheme_csv(const MultistepScheme& scheme, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path.string());
  os << "n";
  for (int j = 0; j <= scheme.steps; ++j) os << ",a_" << j;
  for (int j = 0; j <= scheme.steps; ++j) os << ",b_" << j;
  os << '\n' << std::setprecision(17);
  for (Index n = 0; n < scheme.rows(); ++n) {
    os << n;
    for (int j = 0; j <= scheme.steps; ++j) os << ',' << scheme.a(n, j);
    for (int j = 0; j <= scheme.steps; ++j) os << ',' << scheme.b(n, j);
    os << '\n';
  }
}

}  // namespace gpode
