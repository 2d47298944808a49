// Serial reference vs OpenMP minibatch gradient on a logistic matrix
// factorization problem. Both paths are bit-identical by construction
// (fixed-order reduction over per-point substream RNGs); this measures
// the speedup only.

#include <benchmark/benchmark.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "vcd/experiment.hpp"
#include "vcd/optimize.hpp"

using namespace vcd;

namespace {

struct Fixture {
  Dataset data;
  LvmModel model;
  AmortizedGaussian encoder;
  TrainProblem problem;
  TrainConfig cfg;
  ControlVariateState cv;

  static Fixture make(int n, int dim, int latent) {
    Rng rng(4321);
    Mat W(dim, latent);
    for (int i = 0; i < W.size(); ++i) W(i) = 0.01 * rng.normal();
    return Fixture(make_synthetic_dataset(n, dim, latent),
                   LvmModel::logistic_mf(W, Vec::Zero(dim)),
                   AmortizedGaussian::make(dim, latent, {32, 32}, rng));
  }

  Fixture(Dataset d, LvmModel m, AmortizedGaussian e)
      : data(std::move(d)),
        model(std::move(m)),
        encoder(std::move(e)),
        problem(model, encoder, data) {
    cfg.mode = ObjectiveMode::vcd;
    cfg.kernel = {8, 5, 0.05};
    cfg.seed = 1;
  }
};

std::vector<int> full_batch(int n) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

void bench(benchmark::State& state, bool parallel) {
  static Fixture fx = Fixture::make(512, 20, 5);
  auto batch = full_batch(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    MinibatchGrad mg = fx.problem.minibatch_gradient(batch, fx.cfg, 0, fx.cv, parallel);
    benchmark::DoNotOptimize(mg.theta_grad.data());
    benchmark::DoNotOptimize(mg.phi_grad.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void MinibatchSerial(benchmark::State& state) { bench(state, false); }
void MinibatchParallel(benchmark::State& state) {
#ifdef _OPENMP
  omp_set_num_threads(omp_get_max_threads());
#endif
  bench(state, true);
}

BENCHMARK(MinibatchSerial)->Arg(100)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(MinibatchParallel)->Arg(100)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
