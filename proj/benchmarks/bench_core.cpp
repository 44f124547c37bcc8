#include <benchmark/benchmark.h>

#include <vector>

#include "refine/capacity.hpp"
#include "refine/estimators.hpp"
#include "refine/nnet.hpp"
#include "refine/risk.hpp"
#include "refine/rng.hpp"
#include "refine/synth.hpp"

namespace {

using namespace refine;

NetworkParams bench_net(int d, int width, int depth) {
  NetworkSpec spec;
  spec.input_dim = d;
  spec.width = width;
  spec.depth = depth;
  spec.weight_bound = 2.0;
  spec.clip = true;
  return init_network(spec, 7);
}

void BM_forward(benchmark::State& state) {
  const int d = 2;
  const auto net = bench_net(d, static_cast<int>(state.range(0)), 3);
  Rng rng(11);
  std::vector<double> x(d);
  for (auto& v : x) v = rng.uniform();
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(net, x));
  }
}
BENCHMARK(BM_forward)->Arg(8)->Arg(32)->Arg(128);

void BM_gradient(benchmark::State& state) {
  const int d = 2;
  const std::size_t n = 64;
  const auto net = bench_net(d, static_cast<int>(state.range(0)), 3);
  Rng rng(12);
  std::vector<double> xs(n * d), ts(n);
  for (auto& v : xs) v = rng.uniform();
  for (auto& v : ts) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gradient(net, xs, ts));
  }
}
BENCHMARK(BM_gradient)->Arg(8)->Arg(32);

void BM_capacity_for(benchmark::State& state) {
  const CapacityRule rule;
  long n = 10;
  for (auto _ : state) {
    benchmark::DoNotOptimize(capacity_for(rule, n, 0.7, 0.4, 1.5, 2));
    n = n < 1000000 ? n + 17 : 10;
  }
}
BENCHMARK(BM_capacity_for);

void BM_solve_probe(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const std::size_t n = 512;
  Rng rng(13);
  std::vector<double> feats(n * static_cast<std::size_t>(p)), ys(n);
  for (auto& v : feats) v = rng.uniform(-1.0, 1.0);
  for (auto& v : ys) v = rng.uniform(-2.0, 2.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_probe(feats, ys, p));
  }
}
BENCHMARK(BM_solve_probe)->Arg(4)->Arg(16);

void BM_excess_risk(benchmark::State& state) {
  const auto task = make_task(2, 4, 1.5, 0.3, 0.3,
                              FrepKind::informative_smooth, 5);
  const auto rep = Representation::from_task(task);
  const ProbeModel model{rep, {0.3, -0.2, 0.1, 0.4}};
  const long mc = state.range(0);
  for (auto _ : state) {
    auto pred = [&](std::span<const double> x) { return predict(model, x); };
    benchmark::DoNotOptimize(excess_risk(pred, task, mc, 3));
  }
}
BENCHMARK(BM_excess_risk)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
