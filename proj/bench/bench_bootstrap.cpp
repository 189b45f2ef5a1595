// Parallel bootstrap bank against the serial reference on ModelWin.

#include <benchmark/benchmark.h>

#include "rltmle/ensemble.hpp"
#include "rltmle/environments.hpp"
#include "rltmle/logged_batch.hpp"
#include "rltmle/model_estimation.hpp"

using namespace rltmle;

namespace {

struct Fixture {
  EnvironmentSpec env = make_modelwin();
  Dataset data;
  QStack q;
  LoggedBatch batch;
  std::vector<RegularizationTriple> triples;

  explicit Fixture(std::size_t n) {
    data = simulate(env.mdp, env.behavior, env.default_horizon, n, 7);
    q = inject_bias(exact_q_functions(env.mdp, env.evaluation, env.default_horizon, DiscountSpec(1.0)), 0.05, 8);
    batch = make_batch(data, q, env.evaluation, env.behavior);
    triples = default_regularization_grid(env.default_horizon);
  }
};

LtmleKernel prepared_kernel(const Fixture& f) {
  LtmleKernel kernel(f.batch, f.q, f.env.evaluation);
  for (const auto& t : f.triples) kernel.prepare_alpha(t.alpha);
  return kernel;
}

void bm_bank_serial(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)));
  const LtmleKernel kernel = prepared_kernel(f);
  for (auto _ : state) benchmark::DoNotOptimize(reference::bootstrap_bank_serial(kernel, f.triples, 50, 1));
}

void bm_bank_parallel(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)));
  const LtmleKernel kernel = prepared_kernel(f);
  const int workers = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_bank(kernel, f.triples, 50, 1, workers));
}

}  // namespace

BENCHMARK(bm_bank_serial)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_bank_parallel)
    ->ArgsProduct({{100, 1000}, {1, 2, 4}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

BENCHMARK_MAIN();
