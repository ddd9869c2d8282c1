#include <benchmark/benchmark.h>

#include "sadmm/presets.hpp"
#include "sadmm/prox.hpp"
#include "sadmm/solvers.hpp"

using namespace sadmm;

namespace {

Preset lasso(int dim) {
  PresetParams p;
  p.dim = dim;
  p.samples = 10 * dim;
  return make_preset(p);
}

void BM_StochasticStep(benchmark::State& state) {
  const Preset preset = lasso(static_cast<int>(state.range(0)));
  SolverConfig cfg;
  AdmmSolver solver(*preset.spec, cfg);
  StochasticOracle oracle(preset.spec->theta1_ptr(), 1, 0);
  IterateState st = solver.initial_state();
  for (auto _ : state) {
    st = solver.step_stochastic(st, oracle);
    benchmark::DoNotOptimize(st.x.data());
  }
}
BENCHMARK(BM_StochasticStep)->Arg(20)->Arg(100);

void BM_DeterministicStep(benchmark::State& state) {
  PresetParams p;
  p.name = "ridge-split";
  p.dim = static_cast<int>(state.range(0));
  p.samples = 10 * p.dim;
  const Preset preset = make_preset(p);
  SolverConfig cfg;
  cfg.variant = Variant::deterministic;
  AdmmSolver solver(*preset.spec, cfg);
  IterateState st = solver.initial_state();
  for (auto _ : state) {
    st = solver.step_deterministic(st);
    benchmark::DoNotOptimize(st.x.data());
  }
}
BENCHMARK(BM_DeterministicStep)->Arg(20)->Arg(100);

void BM_LinearizedStep(benchmark::State& state) {
  const Preset preset = lasso(static_cast<int>(state.range(0)));
  SolverConfig cfg;
  cfg.variant = Variant::linearized;
  cfg.linearized_r = 2.0;
  AdmmSolver solver(*preset.spec, cfg);
  IterateState st = solver.initial_state();
  for (auto _ : state) {
    st = solver.step_linearized(st);
    benchmark::DoNotOptimize(st.x.data());
  }
}
BENCHMARK(BM_LinearizedStep)->Arg(20)->Arg(100);

// Step plus every invariant probe, for the cost of check mode.
void BM_CheckedStochasticStep(benchmark::State& state) {
  const Preset preset = lasso(20);
  SolverConfig cfg;
  cfg.check_invariants = true;
  AdmmSolver solver(*preset.spec, cfg);
  InvariantChecker checker(*preset.spec, solver.config());
  StochasticOracle oracle(preset.spec->theta1_ptr(), 1, 0);
  IterateState st = solver.initial_state();
  for (auto _ : state) {
    StepRecord rec;
    IterateState next = solver.step_stochastic(st, oracle, &rec);
    benchmark::DoNotOptimize(checker.check(st, next, rec, nullptr));
    st = std::move(next);
  }
}
BENCHMARK(BM_CheckedStochasticStep);

void BM_XSubproblemGeneralA(benchmark::State& state) {
  PresetParams p;
  p.name = "fused-lasso-graph";
  p.dim = static_cast<int>(state.range(0));
  p.samples = 10 * p.dim;
  const Preset preset = make_preset(p);
  XSubproblemSolver solver(*preset.spec);
  IterateState st = IterateState::initial(Vector::Zero(p.dim), Vector::Zero(preset.spec->d2()), preset.spec->m());
  const Vector g = Vector::Ones(p.dim);
  double eta = 0.1;
  for (auto _ : state) {
    eta *= 0.999;  // moving eta forces a refactorization, as under the convex schedule
    benchmark::DoNotOptimize(solver.solve(g, st, 1.0, eta).data());
  }
}
BENCHMARK(BM_XSubproblemGeneralA)->Arg(20)->Arg(100);

void BM_HingeProx(benchmark::State& state) {
  const Vector z = Vector::LinSpaced(100, -3.0, 3.0);
  for (auto _ : state) benchmark::DoNotOptimize(prox_theta2(z, 1.5, HingeSum{0.5}).data());
}
BENCHMARK(BM_HingeProx);

}  // namespace

BENCHMARK_MAIN();
