#include "gpode/error.hpp"
#include "gpode/experiment.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gpode;
namespace fs = std::filesystem;

namespace {

Trajectory column(std::initializer_list<double> xs) {
  Matrix s(static_cast<Index>(xs.size()), 1);
  Index i = 0;
  for (double v : xs) s(i++, 0) = v;
  return Trajectory(TimeGrid::uniform(0, 1, s.rows() - 1), s);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ErrorCode config_code(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "accepted: " << text;
  return ErrorCode::InvalidArgument;
}

ExperimentConfig small_vdp(const fs::path& out) {
  ExperimentConfig c = parse_config(
      "system = vdp\n"
      "n_steps = 40\n"
      "train_steps = 20\n"
      "scheme = BDF\n"
      "order = 2\n"
      "iterations = 40\n"
      "pretrain_iterations = 40\n"
      "n_samples = 4\n"
      "features = 32\n"
      "seed = 7\n");
  c.output_dir = out;
  return c;
}

}  // namespace

TEST(Metrics, HandExample) {
  const Trajectory ref = column({0, 0});
  const Trajectory pred = column({1, 3});
  EXPECT_DOUBLE_EQ(mse(pred, ref), 5.0);
  const Vector r = rmse_over_time(pred, ref);
  EXPECT_DOUBLE_EQ(r(0), 1.0);
  EXPECT_DOUBLE_EQ(r(1), 3.0);
  EXPECT_EQ(mse(ref, ref), 0.0);
}

TEST(Metrics, ConstantOffsetAndConsistency) {
  Matrix s = Matrix::Random(30, 3);
  const Trajectory ref(TimeGrid::uniform(0, 0.1, 29), s);
  const Trajectory off(ref.grid, (s.array() + 0.25).matrix());
  EXPECT_NEAR(mse(off, ref), 0.0625, 1e-15);
  const Trajectory other(ref.grid, Matrix::Random(30, 3));
  EXPECT_NEAR(rmse_over_time(other, ref).squaredNorm() / 30.0, mse(other, ref), 1e-14);
  const Trajectory shifted(TimeGrid::uniform(1, 0.1, 29), s);
  EXPECT_THROW(mse(shifted, ref), Error);
}

TEST(Config, ParsesAndAppliesSystemDefaults) {
  const auto c = parse_config("# comment\nscheme = bdf  # trailing\norder = 3\nsystem = vdp\n");
  EXPECT_EQ(c.system, "vdp");
  EXPECT_DOUBLE_EQ(c.h, 0.1);
  EXPECT_DOUBLE_EQ(c.irregularity, 0.5);
  EXPECT_EQ(c.model.kind, SchemeKind::BDF);
  EXPECT_EQ(c.model.order, 3);
  const auto t = parse_config("scheme = taylor\norder = 2\n");
  EXPECT_EQ(t.model.family, KernelFamily::TaylorIndependent);
  const auto s = parse_config("cells = AB1, BDF3 ,Taylor2\nseeds = 0,1,2\n");
  ASSERT_EQ(s.suite_cells.size(), 3u);
  EXPECT_EQ(s.suite_cells[1], std::make_pair(SchemeKind::BDF, 3));
  EXPECT_EQ(s.suite_seeds.size(), 3u);
}

TEST(Config, RoundTripsThroughString) {
  auto c = parse_config("system = vdp\nscheme = AM\norder = 2\nnoise = full\nmode = mean\nseed = 12\n");
  const auto back = parse_config(to_config_string(c));
  EXPECT_EQ(to_config_string(back), to_config_string(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  auto d = c;
  d.seed = 13;
  EXPECT_NE(config_hash(d), config_hash(c));
  d = c;
  d.output_dir = "elsewhere";
  EXPECT_EQ(config_hash(d), config_hash(c));
}

TEST(Config, Errors) {
  EXPECT_EQ(config_code("bogus = 1\n"), ErrorCode::Config);
  EXPECT_EQ(config_code("h = abc\n"), ErrorCode::Config);
  EXPECT_EQ(config_code("order\n"), ErrorCode::Config);
  EXPECT_EQ(config_code("system = lorenz\n"), ErrorCode::Config);
  EXPECT_EQ(config_code("train_steps = 5000\n"), ErrorCode::Config);
  EXPECT_EQ(config_code("scheme = RK\n"), ErrorCode::Config);
  EXPECT_EQ(config_code("b = 2.5\n"), ErrorCode::Config);
  EXPECT_EQ(config_code("mode = maybe\n"), ErrorCode::Config);
  EXPECT_EQ(config_code("seed = -1\n"), ErrorCode::Config);
  EXPECT_THROW(load_config("/nonexistent/gpode.cfg"), Error);
}

TEST(Data, SplitAndNoise) {
  auto c = parse_config("system = vdp\nn_steps = 30\ntrain_steps = 10\nnoise_sigma = 0.1, 0.2\n");
  const auto d = prepare_data(c);
  EXPECT_EQ(d.reference.size(), 31);
  EXPECT_EQ(d.train.size(), 10);
  EXPECT_EQ(d.train.states, d.observed.states.topRows(10));
  EXPECT_FALSE(d.reference.noisy);
  EXPECT_GT((d.observed.states - d.reference.states).cwiseAbs().maxCoeff(), 0.0);
  c.noise_sigma = {0.1};
  EXPECT_NO_THROW(prepare_data(c));
  c.noise_sigma = {0.1, 0.2, 0.3};
  EXPECT_THROW(prepare_data(c), Error);
}

TEST(Data, CsvInput) {
  const fs::path p = fs::temp_directory_path() / "gpode_exp_input.csv";
  const Trajectory t = simulate_reference(vdp_field(), (Vector(2) << 2, 0).finished(),
                                          TimeGrid::uniform(0, 0.1, 19));
  save_csv(t, p);
  const auto c = parse_config("system = csv:" + p.string() + "\n");
  const auto d = prepare_data(c);
  EXPECT_FALSE(d.simulated);
  EXPECT_EQ(d.reference.states, t.states);
  EXPECT_EQ(d.train.size(), 10);
  fs::remove(p);
}

TEST(Run, ArtifactsAreReproducible) {
  const fs::path a = fs::temp_directory_path() / "gpode_run_a";
  const fs::path b = fs::temp_directory_path() / "gpode_run_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const auto ra = run_experiment(small_vdp(a));
  const auto rb = run_experiment(small_vdp(b));
  EXPECT_EQ(ra.report.mse, rb.report.mse);
  for (const char* f : {"predictions.csv", "variance.csv", "rmse_over_time.csv", "metrics.json",
                        "model.json", "config.txt"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_TRUE(fs::exists(a / "timing.json"));
  EXPECT_NEAR(ra.report.rmse.squaredNorm() / ra.report.rmse.size(), ra.report.mse, 1e-12 * (1 + ra.report.mse));
  EXPECT_EQ(ra.report.used_samples + ra.report.failed_samples, 4);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Run, MeanModeAndStageLabels) {
  auto c = small_vdp(fs::temp_directory_path() / "gpode_run_mean");
  c.mode = PredictMode::Mean;
  const auto r = run_experiment(c, false);
  EXPECT_TRUE(std::isfinite(r.report.mse));
  EXPECT_TRUE(r.variance.isZero());
  c.system = "csv:/nonexistent.csv";
  try {
    run_experiment(c, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("simulate:", 0), 0u) << e.what();
  }
}

TEST(Suite, SingleCellMatchesExperimentAndIsDeterministic) {
  auto c = small_vdp(fs::temp_directory_path() / "gpode_suite");
  const auto single = run_experiment(c, false);
  const auto t1 = run_suite(c, false);
  const auto t2 = run_suite(c, false);
  ASSERT_EQ(t1.cells.size(), 1u);
  ASSERT_EQ(t1.cells[0].mse.size(), 1u);
  EXPECT_EQ(t1.cells[0].mse[0], single.report.mse);
  EXPECT_EQ(t1.format(), t2.format());
  EXPECT_NE(t1.format().find("BDF"), std::string::npos);
}
