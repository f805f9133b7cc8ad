#include <benchmark/benchmark.h>

#include "sblem/em.hpp"
#include "sblem/kalman.hpp"
#include "sblem/likelihood.hpp"
#include "sblem/model.hpp"

using namespace sblem;

namespace {

struct Problem {
  SystemModel model;
  Dataset data;
  Theta theta;
};

Problem make_problem(int n, int m, int K) {
  RandomModelSpec spec;
  spec.n = n;
  spec.m = m;
  spec.K = K;
  spec.sigma2 = 0.1;
  spec.seed = 7;
  Problem p;
  p.model = make_random_model(spec);
  SimConfig sim;
  sim.sparsity = std::max(1, n / 4);
  sim.seed = 7;
  p.data = simulate_dataset(p.model, sim);
  p.theta = default_initial_theta(p.model);
  return p;
}

void BM_Smoother(benchmark::State& state) {
  const Problem p = make_problem(static_cast<int>(state.range(0)), 4, static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(smooth(p.model, p.data.Y, p.theta));
  state.SetComplexityN(state.range(1));
}
BENCHMARK(BM_Smoother)->Args({10, 50})->Args({10, 200})->Args({10, 800})->Args({40, 200});

void BM_LogLikelihoodDense(benchmark::State& state) {
  const Problem p = make_problem(8, 4, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(log_likelihood(p.model, p.data.Y, p.theta));
}
BENCHMARK(BM_LogLikelihoodDense)->Arg(10)->Arg(50)->Arg(125);

void BM_LogLikelihoodInnovations(benchmark::State& state) {
  const Problem p = make_problem(8, 4, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(log_likelihood_innovations(p.model, p.data.Y, p.theta));
  }
}
BENCHMARK(BM_LogLikelihoodInnovations)->Arg(10)->Arg(50)->Arg(125)->Arg(1000);

void BM_GradGamma(benchmark::State& state) {
  const Problem p = make_problem(8, 4, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(grad_gamma(p.model, p.data.Y, p.theta));
}
BENCHMARK(BM_GradGamma)->Arg(10)->Arg(50);

void BM_EmStep(benchmark::State& state) {
  const Problem p = make_problem(static_cast<int>(state.range(0)), 5, static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(em_iterate(p.model, p.data.Y, p.theta));
}
BENCHMARK(BM_EmStep)->Args({10, 30})->Args({10, 300})->Args({30, 300});

}  // namespace

BENCHMARK_MAIN();
