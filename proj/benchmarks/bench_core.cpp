// Microbenchmarks for the hot paths: Poisson truncation/weights, one
// uniformization window at a realistic support, the raw DTMC substep, the
// window planner, and the dense reference integrator.

#include <benchmark/benchmark.h>

#include "unibound/engine.hpp"
#include "unibound/model.hpp"
#include "unibound/oracle.hpp"
#include "unibound/poisson.hpp"
#include "unibound/stepper.hpp"
#include "unibound/workspace.hpp"

using namespace unibound;

namespace {

// Spread-out run state on the two-product switch, reached by integrating a
// little while; gives the window benchmarks a realistic support (~10^3-10^4
// states) instead of the point-mass start.
const RunResult& warm_switch_state(double t) {
  static const ModelSpec spec = builtin_model("exclusive_switch");
  static std::unordered_map<double, RunResult> cache;
  auto it = cache.find(t);
  if (it == cache.end()) {
    RunOptions opts;
    opts.r_star = 20;
    opts.epsilon = 1e-10;
    opts.delta_threshold = 1e-15;
    opts.t_max = t;
    it = cache.emplace(t, run(spec, opts)).first;
  }
  return it->second;
}

void bm_poisson_truncation(benchmark::State& state) {
  const double mu = static_cast<double>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(right_truncation(mu, 1e-10));
  }
}
BENCHMARK(bm_poisson_truncation)->Arg(1)->Arg(10)->Arg(100)->Arg(1000);

void bm_poisson_weights(benchmark::State& state) {
  const double mu = static_cast<double>(state.range(0));
  const int R = right_truncation(mu, 1e-10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(weights(mu, R));
  }
  state.SetItemsProcessed(state.iterations() * (R + 1));
}
BENCHMARK(bm_poisson_weights)->Arg(1)->Arg(10)->Arg(100)->Arg(1000);

/// Plan + execute one window on a spread support, rolled forward from the
/// same snapshot every iteration (load() resets the run state).
void bm_execute_window(benchmark::State& state) {
  const ModelSpec spec = builtin_model("exclusive_switch");
  const double t0 = static_cast<double>(state.range(0));
  const RunResult& warm = warm_switch_state(t0);

  Workspace ws(spec);
  ws.load(warm.final_dist);
  const StepPlan plan = choose_step(spec, 20, t0, 3600.0, 1e-10,
                                    warm.final_dist, FindMaxMethod::monotone,
                                    4.0);
  Workspace::WindowControls ctl;
  ctl.delta_threshold = 1e-15;

  std::size_t touched = 0;
  for (auto _ : state) {
    ws.load(warm.final_dist);
    const auto stats = ws.execute_window(plan, ctl);
    touched = stats.window_size;
    benchmark::DoNotOptimize(stats);
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(touched) * (plan.r_star + 1));
  state.counters["states"] = static_cast<double>(touched);
  state.counters["mu"] = plan.mu;
}
BENCHMARK(bm_execute_window)->Arg(30)->Arg(120)->Unit(benchmark::kMillisecond);

/// The reference (map-based) DTMC substep, for comparison with the interned
/// fast path above.
void bm_dtmc_step(benchmark::State& state) {
  const ModelSpec spec = builtin_model("exclusive_switch");
  const double t0 = static_cast<double>(state.range(0));
  const RunResult& warm = warm_switch_state(t0);

  StepPlan plan;
  plan.t_start = t0;
  plan.lambda = UniformizationRate::from_state(
      spec, find_max_state_monotone(warm.final_dist, 20, spec));
  plan.delta = 1.0;
  plan.mu = step_parameter(plan.lambda, t0, plan.delta);
  plan.truncation = truncate(plan.mu, 1e-10);
  plan.r_star = plan.truncation.R;

  for (auto _ : state) {
    benchmark::DoNotOptimize(dtmc_step(spec, warm.final_dist, plan, 1e-15));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(warm.final_dist.size()));
}
BENCHMARK(bm_dtmc_step)->Arg(30)->Arg(120)->Unit(benchmark::kMillisecond);

/// Window planning alone: envelope search, rate bounds, and the bisection
/// for the largest feasible length.
void bm_choose_step(benchmark::State& state) {
  const ModelSpec spec = builtin_model("exclusive_switch");
  const RunResult& warm = warm_switch_state(30.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(choose_step(spec, 20, 30.0, 3600.0, 1e-10,
                                         warm.final_dist,
                                         FindMaxMethod::monotone, 4.0));
  }
}
BENCHMARK(bm_choose_step);

void bm_oracle_integrate(benchmark::State& state) {
  const ModelSpec spec = builtin_model("gene_expression");
  const SparseDistribution p0 = initial_distribution(spec);
  StateBox box;
  box.upper = StateVec{state.range(0), state.range(0)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(integrate_forward(spec, p0, 0.0, 5.0, box, 1e-10));
  }
  state.counters["box_states"] = static_cast<double>(box.size());
}
BENCHMARK(bm_oracle_integrate)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
