#include <benchmark/benchmark.h>

#include "zdshape/dynamics.hpp"
#include "zdshape/harness.hpp"
#include "zdshape/optimizer.hpp"
#include "zdshape/stabilizer.hpp"

using namespace zdshape;

namespace {

const Scenario& Default() {
  static const Scenario sc = ResolveScenario(ScenarioConfig{});
  return sc;
}

const DesignParams kDesign{0.0706, 0.00265, 0.02, 0.02};

const Stabilization& Nominal() {
  static const Stabilization st = Stabilize(Default(), kDesign);
  return st;
}

void BM_Configuration(benchmark::State& state) {
  const Scenario& sc = Default();
  const Eigen::Vector2d chi(sc.reference.x_c, sc.reference.y_bar);
  for (auto _ : state) benchmark::DoNotOptimize(Configuration(sc.mechanism, chi));
}
BENCHMARK(BM_Configuration);

void BM_MassMatrix(benchmark::State& state) {
  const Scenario& sc = Default();
  const Eigen::Vector4d q = Configuration(sc.mechanism, Eigen::Vector2d(sc.reference.x_c, sc.reference.y_bar));
  for (auto _ : state) benchmark::DoNotOptimize(MassMatrix(kDesign, sc.mechanism, q));
}
BENCHMARK(BM_MassMatrix);

void BM_PflTerms(benchmark::State& state) {
  const Scenario& sc = Default();
  const Eigen::Vector2d chi(sc.reference.x_c, sc.reference.y_bar), chid(0.1, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(ComputePflTerms(kDesign, sc.mechanism, chi, chid));
}
BENCHMARK(BM_PflTerms);

void BM_ZdTableBuild(benchmark::State& state) {
  const Scenario& sc = Default();
  for (auto _ : state) {
    benchmark::DoNotOptimize(ZdTable::Build(sc.mechanism, sc.reference.y_bar, sc.x_min, sc.x_max,
                                            static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_ZdTableBuild)->Arg(257)->Arg(1025)->Unit(benchmark::kMillisecond);

void BM_CostEvaluate(benchmark::State& state) {
  const CostModel model(Default(), Mode::kTwoParam, CostKind::kJ1);
  for (auto _ : state) benchmark::DoNotOptimize(model.Evaluate(kDesign));
}
BENCHMARK(BM_CostEvaluate)->Unit(benchmark::kMillisecond);

void BM_PeriodicRiccati(benchmark::State& state) {
  const Stabilization& st = Nominal();
  const Eigen::Matrix3d q = Default().config.stabilizer.q_c_diag.asDiagonal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(SolvePeriodicRiccati(st.linearization, q, Default().config.stabilizer.r_c));
  }
}
BENCHMARK(BM_PeriodicRiccati)->Unit(benchmark::kMillisecond);

void BM_ControllerEvaluate(benchmark::State& state) {
  const Stabilization& st = Nominal();
  const std::size_t k = st.orbit.size() / 3;
  const double y = st.controller->y_bar() + 1e-3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(st.controller->Evaluate(st.orbit.x[k], st.orbit.xdot[k], y, 0.0, st.orbit.t[k]));
  }
}
BENCHMARK(BM_ControllerEvaluate);

void BM_OrbitDistance(benchmark::State& state) {
  const Stabilization& st = Nominal();
  const OrbitDistance d(st.orbit, *st.zd);
  for (auto _ : state) benchmark::DoNotOptimize(d(st.orbit.x[100] + 1e-4, st.orbit.xdot[100]));
}
BENCHMARK(BM_OrbitDistance);

void BM_ClosedLoopPeriod(benchmark::State& state) {
  const Stabilization& st = Nominal();
  const Scenario& sc = Default();
  for (auto _ : state) {
    benchmark::DoNotOptimize(ClosedLoop(sc, st, PerturbedInitialState(sc, st), st.orbit.period));
  }
}
BENCHMARK(BM_ClosedLoopPeriod)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
