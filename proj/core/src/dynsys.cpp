#include "gpode/dynsys.hpp"

#include "gpode/error.hpp"
#include "gpode/integrate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace gpode {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::InvalidGrid: return "invalid grid";
    case ErrorCode::CsvMalformedHeader: return "malformed csv header";
    case ErrorCode::CsvNonMonotoneTime: return "non-monotone time column";
    case ErrorCode::CsvRaggedRow: return "ragged csv row";
    case ErrorCode::CsvBadNumber: return "bad number in csv";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::UnsupportedScheme: return "unsupported scheme";
    case ErrorCode::GridTooShort: return "grid too short";
    case ErrorCode::SingularConditions: return "singular order conditions";
    case ErrorCode::TrajectoryTooShort: return "trajectory too short";
    case ErrorCode::FactorizationFailed: return "factorization failed";
    case ErrorCode::NonFiniteLikelihood: return "non-finite likelihood";
    case ErrorCode::SolverFailure: return "solver failure";
    case ErrorCode::EnsembleFailure: return "ensemble failure";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::ModelDataMismatch: return "model/data mismatch";
    case ErrorCode::Config: return "config error";
  }
  return "unknown";
}

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
  if (times_.size() < 2) throw Error(ErrorCode::InvalidGrid, "time grid needs at least 2 points");
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!std::isfinite(times_[i])) throw Error(ErrorCode::InvalidGrid, "non-finite time stamp");
    if (i > 0 && !(times_[i] > times_[i - 1]))
      throw Error(ErrorCode::InvalidGrid,
                  "time stamps must be strictly increasing (index " + std::to_string(i) + ")");
  }
}

TimeGrid TimeGrid::uniform(double t0, double h, Index n_steps) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "step must be positive");
  std::vector<double> t(static_cast<std::size_t>(n_steps + 1));
  for (Index i = 0; i <= n_steps; ++i) t[static_cast<std::size_t>(i)] = t0 + h * static_cast<double>(i);
  return TimeGrid(std::move(t));
}

std::vector<double> TimeGrid::steps() const {
  std::vector<double> h(times_.size() - 1);
  for (std::size_t i = 0; i + 1 < times_.size(); ++i) h[i] = times_[i + 1] - times_[i];
  return h;
}

double TimeGrid::max_step() const {
  auto h = steps();
  return *std::max_element(h.begin(), h.end());
}

TimeGrid TimeGrid::slice(Index begin, Index count) const {
  if (begin < 0 || count < 2 || begin + count > size())
    throw Error(ErrorCode::InvalidArgument, "grid slice out of range");
  return TimeGrid(std::vector<double>(times_.begin() + begin, times_.begin() + begin + count));
}

Trajectory::Trajectory(TimeGrid g, Matrix s, bool is_noisy)
    : grid(std::move(g)), states(std::move(s)), noisy(is_noisy) {
  if (states.rows() != grid.size())
    throw Error(ErrorCode::DimensionMismatch, "state rows must match grid length");
  if (states.cols() < 1) throw Error(ErrorCode::DimensionMismatch, "state dimension must be >= 1");
  if (!states.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite state entries");
}

Trajectory Trajectory::slice(Index begin, Index count) const {
  return Trajectory(grid.slice(begin, count), states.middleRows(begin, count), noisy);
}

Vector dho_rhs(const Vector& s) {
  const double x3 = s(0) * s(0) * s(0);
  const double y3 = s(1) * s(1) * s(1);
  Vector out(2);
  out << -0.1 * x3 + 2.0 * y3, -2.0 * x3 - 0.1 * y3;
  return out;
}

Vector vdp_rhs(const Vector& s) {
  constexpr double mu = 0.5;
  Vector out(2);
  out << s(1), -s(0) + mu * s(1) * (1.0 - s(0) * s(0));
  return out;
}

DynamicsField dho_field() { return {dho_rhs, 2, "dho"}; }
DynamicsField vdp_field() { return {vdp_rhs, 2, "vdp"}; }

DynamicsField system_by_name(const std::string& name) {
  if (name == "dho") return dho_field();
  if (name == "vdp") return vdp_field();
  throw Error(ErrorCode::InvalidArgument, "unknown system '" + name + "'");
}

double irregular_step(double h, double b, double w) { return h * (1.0 + (w - 0.5) * b); }

TimeGrid irregular_grid(double t0, Index n_steps, double h, double b, Seed seed) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "step must be positive");
  if (!(b >= 0.0) || b >= 2.0)
    throw Error(ErrorCode::InvalidArgument, "irregularity b must lie in [0, 2)");
  if (n_steps < 1) throw Error(ErrorCode::InvalidArgument, "need at least one step");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> t(static_cast<std::size_t>(n_steps + 1));
  t[0] = t0;
  for (std::size_t i = 1; i < t.size(); ++i) t[i] = t[i - 1] + irregular_step(h, b, unif(rng));
  return TimeGrid(std::move(t));
}

Trajectory simulate_reference(const DynamicsField& field, const Vector& x0, const TimeGrid& grid,
                              double rtol, double atol) {
  if (x0.size() != field.dim && field.dim != 0)
    throw Error(ErrorCode::DimensionMismatch, "initial state does not match field dimension");
  Rk45Config cfg;
  cfg.rtol = rtol;
  cfg.atol = atol;
  auto result = rk45(field.rhs, grid, x0, cfg);
  if (!result.ok())
    throw Error(ErrorCode::SolverFailure,
                "reference simulation failed at step " + std::to_string(result.failed_step));
  result.trajectory.noisy = false;
  return result.trajectory;
}

Trajectory add_noise(const Trajectory& traj, const Vector& sigma, Seed seed) {
  if (sigma.size() != traj.dim())
    throw Error(ErrorCode::DimensionMismatch, "sigma must have one entry per dimension");
  if ((sigma.array() < 0.0).any()) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix noisy = traj.states;
  for (Index n = 0; n < noisy.rows(); ++n)
    for (Index u = 0; u < noisy.cols(); ++u) noisy(n, u) += sigma(u) * normal(rng);
  return Trajectory(traj.grid, std::move(noisy), true);
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_number(const std::string& field, std::size_t line_no) {
  const std::string s = trim(field);
  double v = 0.0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (s.empty() || ec != std::errc() || ptr != end)
    throw Error(ErrorCode::CsvBadNumber,
                "line " + std::to_string(line_no) + ": cannot parse '" + s + "'");
  return v;
}

}  // namespace

std::string to_csv_string(const Trajectory& traj) {
  std::ostringstream os;
  os << "t";
  for (Index u = 0; u < traj.dim(); ++u) os << ",x" << (u + 1);
  os << '\n';
  for (Index n = 0; n < traj.size(); ++n) {
    os << format_double(traj.grid[n]);
    for (Index u = 0; u < traj.dim(); ++u) os << ',' << format_double(traj.states(n, u));
    os << '\n';
  }
  return os.str();
}

Trajectory parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::CsvMalformedHeader, "empty csv");
  const auto header = split(trim(line), ',');
  if (header.size() < 2 || trim(header[0]) != "t")
    throw Error(ErrorCode::CsvMalformedHeader, "header must read t,x1,...,xd");
  for (std::size_t u = 1; u < header.size(); ++u)
    if (trim(header[u]) != "x" + std::to_string(u))
      throw Error(ErrorCode::CsvMalformedHeader,
                  "header column " + std::to_string(u) + " must be x" + std::to_string(u));
  const std::size_t d = header.size() - 1;

  std::vector<double> times;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(trim(line), ',');
    if (fields.size() != d + 1)
      throw Error(ErrorCode::CsvRaggedRow, "line " + std::to_string(line_no) + ": expected " +
                                               std::to_string(d + 1) + " fields, got " +
                                               std::to_string(fields.size()));
    const double t = parse_number(fields[0], line_no);
    if (!times.empty() && !(t > times.back()))
      throw Error(ErrorCode::CsvNonMonotoneTime,
                  "line " + std::to_string(line_no) + ": time is not strictly increasing");
    times.push_back(t);
    std::vector<double> row(d);
    for (std::size_t u = 0; u < d; ++u) row[u] = parse_number(fields[u + 1], line_no);
    rows.push_back(std::move(row));
  }
  if (times.size() < 2) throw Error(ErrorCode::InvalidGrid, "csv needs at least 2 rows");
  Matrix states(static_cast<Index>(rows.size()), static_cast<Index>(d));
  for (std::size_t n = 0; n < rows.size(); ++n)
    for (std::size_t u = 0; u < d; ++u)
      states(static_cast<Index>(n), static_cast<Index>(u)) = rows[n][u];
  return Trajectory(TimeGrid(std::move(times)), std::move(states), false);
}

void save_csv(const Trajectory& traj, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  os << to_csv_string(traj);
  if (!os) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

Trajectory load_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_csv(buf.str());
}

}  // namespace gpode
