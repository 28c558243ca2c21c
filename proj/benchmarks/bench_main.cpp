#include "gpode/dynsys.hpp"
#include "gpode/gpcore.hpp"
#include "gpode/integrate.hpp"
#include "gpode/kernels.hpp"
#include "gpode/sampler.hpp"

#include <benchmark/benchmark.h>

using namespace gpode;

namespace {

Trajectory vdp_data(Index n) {
  return simulate_reference(vdp_field(), (Vector(2) << 2.0, 0.0).finished(),
                            TimeGrid::uniform(0.0, 0.05, n - 1));
}

KernelSpec se_kernel(Index d) {
  KernelSpec k;
  k.levels = {ARDHypers::from_values(1.0, Vector::Constant(d, 1.0))};
  return k;
}

void BM_ArdEval(benchmark::State& state) {
  const auto h = ARDHypers::from_values(1.0, Vector::Constant(2, 0.7));
  const Vector x = Vector::Constant(2, 0.3), y = Vector::Constant(2, -0.4);
  for (auto _ : state) benchmark::DoNotOptimize(ard_eval(h, x, y));
}
BENCHMARK(BM_ArdEval);

void BM_AdaptedK3(benchmark::State& state) {
  const std::vector<ARDHypers> base(2, ARDHypers::from_values(1.0, Vector::Constant(2, 0.7)));
  const Vector x = Vector::Constant(2, 0.3), y = Vector::Constant(2, -0.4);
  for (auto _ : state) benchmark::DoNotOptimize(taylor_adapted_k3(base, 0, x, y));
}
BENCHMARK(BM_AdaptedK3);

void BM_GramBDF3(benchmark::State& state) {
  const auto ds = make_datasets(vdp_data(state.range(0)), ModelSpec{SchemeKind::BDF, 3})[0];
  const auto k = se_kernel(2);
  for (auto _ : state) benchmark::DoNotOptimize(gram(ds, k));
}
BENCHMARK(BM_GramBDF3)->Arg(100)->Arg(400);

void BM_GramTaylor3(benchmark::State& state) {
  const auto ds = make_datasets(vdp_data(state.range(0)), ModelSpec{SchemeKind::Taylor, 3})[0];
  KernelSpec k;
  k.family = KernelFamily::TaylorIndependent;
  k.num_levels = 3;
  k.levels.assign(3, ARDHypers::from_values(1.0, Vector::Constant(2, 1.0)));
  for (auto _ : state) benchmark::DoNotOptimize(gram(ds, k));
}
BENCHMARK(BM_GramTaylor3)->Arg(100)->Arg(400);

void BM_SampleEval(benchmark::State& state) {
  const Trajectory t = vdp_data(100);
  const ModelSpec spec{SchemeKind::AB, 2};
  const auto datasets = make_datasets(t, spec);
  TrainedModel m;
  m.spec = spec;
  for (const auto& ds : datasets) m.dims.push_back(condition(ds, se_kernel(2), std::log(1e-3), 1e-10));
  const SampledDynamics g = draw(m, state.range(0), 7);
  const Vector x = (Vector(2) << 0.5, -0.3).finished();
  for (auto _ : state) benchmark::DoNotOptimize(g.eval_field(x));
}
BENCHMARK(BM_SampleEval)->Arg(256)->Arg(1024);

void BM_Rk45Vdp(benchmark::State& state) {
  const DynamicsField f = vdp_field();
  const TimeGrid grid = TimeGrid::uniform(0.0, 0.1, 200);
  const Vector x0 = (Vector(2) << 2.0, 0.0).finished();
  for (auto _ : state) benchmark::DoNotOptimize(rk45(f.rhs, grid, x0));
}
BENCHMARK(BM_Rk45Vdp);

}  // namespace
BENCHMARK_MAIN();
