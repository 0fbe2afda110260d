#include <benchmark/benchmark.h>

#include <memory>

#include "icl/harness.hpp"

namespace {

std::shared_ptr<const icl::ClassSpec> bench_class() {
  auto s = std::make_shared<icl::ClassSpec>();
  s->kind = icl::ClassKind::FiniteSpectrum;
  s->dim = 4;
  s->b_max = 0.2;
  icl::Vec a(4), b(4);
  a << 2, 0, 0, 0;
  b << 0, 1.5, 1.5, 0;
  s->atoms = {{a, 0.5}, {b, 0.4}};
  return s;
}

struct Setup {
  icl::TransformerWeights weights;
  icl::HiddenState H0;
  icl::LassoProblem problem;
};

Setup make_setup(int n, int N, int L) {
  auto spec = bench_class();
  auto bank = std::make_shared<const icl::FeatureBank>(icl::make_feature_bank(*spec, n, 100.0, 2));
  const icl::Task task = icl::generate_task(spec, 1, N, 4, 0.1, 7);
  const double eta = icl::LassoProblem::default_eta(n + 1);
  Setup s;
  s.weights = icl::build_icl_transformer(bank, L, 0.01, 1e6, eta, N);
  s.H0 = icl::init_hidden(task.prompt, task.x_query, n);
  s.problem.phi = icl::eval_features_batch(*bank, task.prompt.x).transpose();
  s.problem.y = task.prompt.y;
  s.problem.lambda = 0.01;
  s.problem.eta = eta;
  return s;
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
  const Setup s = make_setup(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 21);
  for (auto _ : state) benchmark::DoNotOptimize(icl::readout(icl::forward(s.weights, s.H0).final_state));
  state.SetItemsProcessed(state.iterations() * 21);
}
BENCHMARK(BM_Forward)->Args({16, 64})->Args({64, 128})->Args({64, 512})->Unit(benchmark::kMillisecond);

static void BM_IstaStep(benchmark::State& state) {
  const Setup s = make_setup(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 3);
  icl::Vec rho = icl::Vec::Zero(s.problem.p());
  for (auto _ : state) {
    rho = icl::ista_step(s.problem, rho);
    benchmark::DoNotOptimize(rho.data());
  }
}
BENCHMARK(BM_IstaStep)->Args({16, 64})->Args({64, 512})->Args({256, 512});

static void BM_EvalFeatures(benchmark::State& state) {
  auto spec = bench_class();
  const icl::FeatureBank bank = icl::make_feature_bank(*spec, static_cast<int>(state.range(0)), 100.0, 2);
  std::mt19937_64 rng(3);
  const icl::Vec x = icl::uniform_in_ball(4, rng);
  for (auto _ : state) benchmark::DoNotOptimize(icl::eval_features(bank, x));
}
BENCHMARK(BM_EvalFeatures)->Arg(16)->Arg(256)->Arg(4096);

BENCHMARK_MAIN();
