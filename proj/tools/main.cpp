#include "gpode/bounds.hpp"
#include "gpode/error.hpp"
#include "gpode/experiment.hpp"
#include "gpode/integrate.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace gpode;

namespace {

struct Common {
  std::string config_path;
  std::optional<Seed> seed;
  std::string out;
};

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? parse_config("") : load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "key = value config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "base seed (overrides the config)");
  sub->add_option("--out", c.out, "output directory (overrides the config)");
}

void print_report(const MetricsReport& r) {
  std::printf("mse %.6g\nmse_data %.6g\nsamples %lld used, %lld failed\nwall_time %.2fs\n", r.mse,
              r.mse_data, static_cast<long long>(r.used_samples),
              static_cast<long long>(r.failed_samples), r.wall_time);
}

int cmd_simulate(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const ExperimentData d = prepare_data(cfg);
  std::filesystem::create_directories(cfg.output_dir);
  save_csv(d.reference, cfg.output_dir / "reference.csv");
  save_csv(d.observed, cfg.output_dir / "observed.csv");
  save_csv(d.train, cfg.output_dir / "train.csv");
  std::printf("%lld points, %lld for training -> %s\n", static_cast<long long>(d.observed.size()),
              static_cast<long long>(d.train.size()), cfg.output_dir.c_str());
  return 0;
}

int cmd_train(const Common& c) {
  ExperimentConfig cfg = resolve(c);
  const ExperimentData d = prepare_data(cfg);
  TrainConfig t = cfg.train;
  t.seed = derive_seed(cfg.seed, 3);
  const TrainedModel m = train_model(d.train, cfg.model, t);
  std::filesystem::create_directories(cfg.output_dir);
  save_csv(d.train, cfg.output_dir / "train.csv");
  save_model(m, cfg.output_dir / "model.json");
  for (Index u = 0; u < m.state_dim(); ++u)
    std::printf("dim %lld: sigma %.4g, nll %.6g\n", static_cast<long long>(u),
                m.dims[static_cast<std::size_t>(u)].sigma(), m.dims[static_cast<std::size_t>(u)].fact.nll);
  return 0;
}

int cmd_rollout(const Common& c, const std::string& model_dir) {
  const ExperimentConfig cfg = resolve(c);
  const ExperimentData d = prepare_data(cfg);
  const std::filesystem::path dir = model_dir.empty() ? cfg.output_dir : std::filesystem::path(model_dir);
  TrainedModel m = load_model(dir / "model.json", load_csv(dir / "train.csv"), cfg.train.jitter);
  const ExperimentResult r = predict_and_score(cfg, d, std::move(m));
  std::filesystem::create_directories(cfg.output_dir);
  save_csv(r.prediction, cfg.output_dir / "predictions.csv");
  save_csv(Trajectory(r.prediction.grid, r.variance), cfg.output_dir / "variance.csv");
  print_report(r.report);
  return 0;
}

int cmd_evaluate(const Common& c) {
  const ExperimentResult r = run_experiment(resolve(c));
  print_report(r.report);
  return 0;
}

int cmd_suite(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const SuiteTable t = run_suite(cfg);
  const std::string text = t.format();
  std::fputs(text.c_str(), stdout);
  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream(cfg.output_dir / "table.txt") << text;
  return 0;
}

struct BoundArgs {
  double rkhs_norm = 1.0;
  double lie_bound = 1.0;
  double tau = 0.0;
  Index points = 20;
};

int cmd_bound(const Common& c, const BoundArgs& b) {
  const ExperimentConfig cfg = resolve(c);
  if (cfg.system.rfind("csv:", 0) == 0)
    throw Error(ErrorCode::Config, "bound needs a simulated system with a known field");
  const ExperimentData d = prepare_data(cfg);
  TrainConfig t = cfg.train;
  t.seed = derive_seed(cfg.seed, 3);
  const TrainedModel m = train_model(d.train, cfg.model, t);
  const DynamicsField field = system_by_name(cfg.system);

  BoundInputs in;
  if (m.spec.pipeline() == Pipeline::Multistep) {
    in = bound_inputs_from_scheme(generate_scheme(m.spec.kind, m.spec.order, d.train.grid));
  } else {
    in.steps = 1;
    in.order = m.spec.order;
    in.max_step = d.train.grid.max_step();
    in.n_points = d.train.size();
    in.level_norms.assign(static_cast<std::size_t>(m.spec.order), b.rkhs_norm);
  }
  in.rkhs_norm = b.rkhs_norm;
  in.lie_bound = b.lie_bound;
  in.tau = b.tau;
  const double lambda = 1.0 + b.tau;

  std::printf("%6s %4s %14s %14s %6s\n", "point", "dim", "|mu - f|", "bound", "ok");
  Index violations = 0;
  const Index n = std::min(b.points, d.train.size());
  for (std::size_t u = 0; u < m.dims.size(); ++u) {
    const auto& dim = m.dims[u];
    const Matrix K = gram(dim.data, dim.kernel);
    Matrix Ky = K;
    Ky.diagonal().array() += lambda;
    const Eigen::LLT<Matrix> llt(Ky);
    const Vector alpha = llt.solve(dim.data.Y);
    for (Index p = 0; p < n; ++p) {
      const Vector x = d.train.state(p * (d.train.size() - 1) / std::max<Index>(n - 1, 1));
      const Vector kx = cross(dim.data, dim.kernel, 1, x);
      const double mu = kx.dot(alpha);
      const double var = dim.kernel.eval(1, x, x) - kx.dot(llt.solve(kx));
      const double sd = std::sqrt(std::max(var, 0.0));
      const double err = std::abs(mu - field(x)(static_cast<Index>(u)));
      const double bound =
          m.spec.pipeline() == Pipeline::Multistep ? multistep_bound(in, K, sd) : taylor_bound(in, K, sd);
      violations += err > bound;
      std::printf("%6lld %4zu %14.6g %14.6g %6s\n", static_cast<long long>(p), u, err, bound,
                  err <= bound ? "yes" : "NO");
    }
  }
  std::printf("%lld violations\n", static_cast<long long>(violations));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GP dynamics learning with multistep and Taylor integrators"};
  app.require_subcommand(1);
  Common common;
  std::string model_dir;
  BoundArgs bargs;

  auto* sim = app.add_subcommand("simulate", "simulate and write reference/observed trajectories");
  auto* train = app.add_subcommand("train", "train a model and write model.json");
  auto* roll = app.add_subcommand("rollout", "predict with a saved model");
  auto* eval = app.add_subcommand("evaluate", "run the full pipeline and score it");
  auto* suite = app.add_subcommand("suite", "run scheme x seed tables");
  auto* bound = app.add_subcommand("bound", "print posterior error against the error bound");
  for (auto* s : {sim, train, roll, eval, suite, bound}) add_common(s, common);
  roll->add_option("--model", model_dir, "directory holding model.json and train.csv");
  bound->add_option("--rkhs-norm", bargs.rkhs_norm, "RKHS norm bound C");
  bound->add_option("--lie-bound", bargs.lie_bound, "Lie derivative bound L (E for Taylor)");
  bound->add_option("--tau", bargs.tau, "regularization, lambda = 1 + tau");
  bound->add_option("--points", bargs.points, "number of training states to test");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*sim) return cmd_simulate(common);
    if (*train) return cmd_train(common);
    if (*roll) return cmd_rollout(common, model_dir);
    if (*eval) return cmd_evaluate(common);
    if (*suite) return cmd_suite(common);
    if (*bound) return cmd_bound(common, bargs);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::Config || e.code() == ErrorCode::Io ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
