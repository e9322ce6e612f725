#include "dhpd/kernels.hpp"
#include "dhpd/network.hpp"
#include "dhpd/rng.hpp"

#include <benchmark/benchmark.h>

#include <utility>

using namespace dhpd;

namespace {

struct Fixture {
  FeatureMap features;
  NeighborWeights neighbors;
  SampleTransition sample;
  NetworkState cur, next;
  StepInputs in;

  Fixture(std::size_t n_agents, std::size_t d)
      : features(random_features(64, d, 1)),
        neighbors(neighbor_weights(laplacian_mixing(erdos_renyi(n_agents, 0.3, 2)).W)),
        cur(d, n_agents),
        next(d, n_agents) {
    Rng rng(3);
    sample.s = 5;
    sample.s_next = 17;
    sample.local_rewards = Vector(static_cast<Eigen::Index>(n_agents));
    for (auto& r : sample.local_rewards) r = rng.uniform();
    for (Matrix* m : {&cur.x_lazy, &cur.x, &cur.y_lazy, &cur.y})
      for (auto& v : m->reshaped()) v = 0.1 * rng.normal();
    in.features = &features;
    in.neighbors = &neighbors;
    in.gamma = 0.95;
    in.eta = 0.01;
    in.radius_x = 10.0;
    in.radius_y = 10.0;
    in.sample = &sample;
  }
};

void BM_StepSerial(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    kernels::step_serial(f.in, f.cur, f.next);
    std::swap(f.cur, f.next);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_StepParallel(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const int threads = static_cast<int>(state.range(2));
  for (auto _ : state) {
    kernels::step_parallel(f.in, f.cur, f.next, threads);
    std::swap(f.cur, f.next);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_StepSerial)->UseRealTime()->ArgNames({"N", "d"})->ArgsProduct({{10, 100, 1000}, {8, 64}});
BENCHMARK(BM_StepParallel)
    ->UseRealTime()
    ->ArgNames({"N", "d", "threads"})
    ->ArgsProduct({{10, 100, 1000}, {8, 64}, {1, 2, 4}});

BENCHMARK_MAIN();
