#include <benchmark/benchmark.h>

#include "deh/kernels.hpp"
#include "deh/training.hpp"

namespace {

using namespace deh;

struct Fixture {
  ModelLayout layout{regression_model_spec()};
  Dataset data = generate_regression(256, 5);
  std::vector<double> prepared;
  Fixture() {
    const auto params = init_params(layout, 1);
    prepared = prepare(layout, std::span<const double>(params));
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_BatchGradient(benchmark::State& state, Exec exec) {
  Fixture& f = fixture();
  const auto batch = std::span<const Sample>(f.data.samples).first(static_cast<std::size_t>(state.range(0)));
  std::vector<double> grad;
  for (auto _ : state)
    benchmark::DoNotOptimize(batch_gradient(exec, f.layout, std::span<const double>(f.prepared),
                                            batch, Loss::mse, grad));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BatchPredict(benchmark::State& state, Exec exec) {
  Fixture& f = fixture();
  const auto batch = std::span<const Sample>(f.data.samples).first(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(batch_predict(exec, f.layout, std::span<const double>(f.prepared), batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_FullGradient(benchmark::State& state, Exec exec) {
  Fixture& f = fixture();
  const auto params = init_params(f.layout, 1);
  const auto batch = std::span<const Sample>(f.data.samples).first(64);
  for (auto _ : state)
    benchmark::DoNotOptimize(grad<double>(f.layout, std::span<const double>(params), batch, Loss::mse, exec));
}

}  // namespace

BENCHMARK_CAPTURE(BM_BatchGradient, serial, Exec::serial)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(BM_BatchGradient, parallel, Exec::parallel)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(BM_BatchPredict, serial, Exec::serial)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(BM_BatchPredict, parallel, Exec::parallel)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(BM_FullGradient, serial, Exec::serial);
BENCHMARK_CAPTURE(BM_FullGradient, parallel, Exec::parallel);

BENCHMARK_MAIN();
