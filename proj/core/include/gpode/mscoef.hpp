#pragma once

#include "gpode/common.hpp"
#include "gpode/dynsys.hpp"

#include <filesystem>
#include <string>

namespace gpode {

enum class SchemeKind { AB, AM, BDF, Taylor };

std::string to_string(SchemeKind kind);
/// Case-insensitive "AB" | "AM" | "BDF" | "Taylor".
SchemeKind scheme_kind_from_string(const std::string& name);

/// Number of past steps M for a multistep (kind, order) pair.
/// AB P -> P, BDF P -> P, AM 1 -> 1 (implicit Euler), AM 2 -> 1
/// (trapezoidal), AM 3 -> 2.
int steps_for(SchemeKind kind, int order);

/// Variable-step linear multistep coefficients on a concrete grid.
///
/// Row n couples the points t_n .. t_{n+M}:
///   sum_j a(n, j) x_{n+j} = sum_j b(n, j) f(x_{n+j}),
/// normalized so that a(n, M) = 1. `b` carries time units.
struct MultistepScheme {
  SchemeKind kind = SchemeKind::AB;
  int order = 1;
  int steps = 1;
  Matrix a;  // rows x (steps + 1)
  Matrix b;  // rows x (steps + 1)
  TimeGrid grid;

  Index rows() const noexcept { return a.rows(); }
};

/// Solves the order conditions on every window of `grid`. The conditions
/// are posed on monomials ((t - t_n) / s_n)^p, p = 0..P, where s_n is the
/// mean step in the window. Throws UnsupportedScheme, GridTooShort or
/// SingularConditions.
MultistepScheme generate_scheme(SchemeKind kind, int order, const TimeGrid& grid);

/// max over rows and p = 0..degree of |sum a q - sum b q'| on the scaled
/// monomials. degree < 0 means the scheme order.
double verify_consistency(const MultistepScheme& scheme, int degree = -1);

/// True iff b(n, M) == 0 for every row.
bool is_explicit(const MultistepScheme& scheme);

/// Debug dump: n,a_0..a_M,b_0..b_M
void save_scheme_csv(const MultistepScheme& scheme, const std::filesystem::path& path);

}  // namespace gpode
