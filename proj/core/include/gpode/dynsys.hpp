#pragma once

#include "gpode/common.hpp"

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace gpode {

/// Strictly increasing time stamps (seconds), at least two of them.
class TimeGrid {
 public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> times);

  static TimeGrid uniform(double t0, double h, Index n_steps);

  Index size() const noexcept { return static_cast<Index>(times_.size()); }
  double operator[](Index i) const { return times_[static_cast<std::size_t>(i)]; }
  double front() const { return times_.front(); }
  double back() const { return times_.back(); }
  std::span<const double> times() const noexcept { return times_; }

  /// h_n = t_{n+1} - t_n
  double step(Index n) const { return (*this)[n + 1] - (*this)[n]; }
  std::vector<double> steps() const;
  double max_step() const;

  /// Sub-grid [begin, begin + count).
  TimeGrid slice(Index begin, Index count) const;

  bool operator==(const TimeGrid&) const = default;

 private:
  std::vector<double> times_;
};

/// N x d states sampled on a grid. Rows follow the grid.
struct Trajectory {
  TimeGrid grid;
  Matrix states;
  bool noisy = false;

  Trajectory() = default;
  Trajectory(TimeGrid g, Matrix s, bool is_noisy = false);

  Index size() const noexcept { return states.rows(); }
  Index dim() const noexcept { return states.cols(); }
  Vector state(Index n) const { return states.row(n).transpose(); }
  Trajectory slice(Index begin, Index count) const;
};

/// Autonomous vector field x' = f(x).
struct DynamicsField {
  std::function<Vector(const Vector&)> rhs;
  Index dim = 0;
  std::string name;

  Vector operator()(const Vector& x) const { return rhs(x); }
};

// Benchmark systems.
Vector dho_rhs(const Vector& state);
Vector vdp_rhs(const Vector& state);
DynamicsField dho_field();
DynamicsField vdp_field();
/// "dho" | "vdp"; throws InvalidArgument otherwise.
DynamicsField system_by_name(const std::string& name);

/// One step of the jittered grid: h (1 + (w - 1/2) b).
double irregular_step(double h, double b, double w);

/// t_{i+1} = t_i + h (1 + (w_i - 1/2) b), w_i ~ U(0,1) from a generator seeded
/// with `seed`. Produces n_steps + 1 time stamps.
TimeGrid irregular_grid(double t0, Index n_steps, double h, double b, Seed seed);

/// Clean trajectory through the adaptive Dormand-Prince integrator, reported
/// exactly at the grid times.
Trajectory simulate_reference(const DynamicsField& field, const Vector& x0,
                              const TimeGrid& grid, double rtol = 1e-10,
                              double atol = 1e-12);

/// Adds N(0, sigma_u^2) noise independently to every entry of column u.
Trajectory add_noise(const Trajectory& traj, const Vector& sigma, Seed seed);

/// CSV with header "t,x1,...,xd". Values are written with 17 significant
/// digits so that load(save(traj)) reproduces every double exactly.
void save_csv(const Trajectory& traj, const std::filesystem::path& path);
Trajectory load_csv(const std::filesystem::path& path);

std::string to_csv_string(const Trajectory& traj);
Trajectory parse_csv(const std::string& text);

}  // namespace gpode
