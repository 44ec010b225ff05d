#include <benchmark/benchmark.h>

#include <random>

#include "gradtrace/metrics.hpp"
#include "gradtrace/predictors.hpp"
#include "gradtrace/projection.hpp"
#include "gradtrace/spectral.hpp"
#include "gradtrace/svd.hpp"
#include "gradtrace/trace.hpp"

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

void bm_predictor(benchmark::State& state, const char* spec) {
  const gradtrace::GradientTrace trace{random_matrix(64, 4096, 1)};
  const auto config = gradtrace::PredictorConfig::parse(spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gradtrace::run_predictor(trace, config));
  }
  state.SetItemsProcessed(state.iterations() * 4096);
}

void bm_kappa(benchmark::State& state) {
  const gradtrace::GradientTrace trace{random_matrix(64, 4096, 2)};
  const auto config = gradtrace::PredictorConfig::parse("ema:0.9");
  const auto diag = gradtrace::validate_trace(trace);
  const auto pred = gradtrace::run_predictor(trace, config);
  for (auto _ : state) {
    const auto res = gradtrace::residuals(trace, pred);
    benchmark::DoNotOptimize(gradtrace::predictability_index(res, diag));
  }
  state.SetItemsProcessed(state.iterations() * 4096);
}

void bm_windowed_kappa(benchmark::State& state) {
  const gradtrace::GradientTrace trace{random_matrix(64, 4096, 3)};
  const auto config = gradtrace::PredictorConfig::parse("ema:0.9");
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        gradtrace::windowed_kappa(trace, config, 256, 128));
  }
}

void bm_svd(benchmark::State& state) {
  const Eigen::MatrixXd a =
      random_matrix(state.range(0), state.range(1), 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gradtrace::jacobi_svd(a, false));
  }
}

void bm_spectrum_ranks(benchmark::State& state) {
  const gradtrace::GradientTrace trace{random_matrix(64, 1024, 5)};
  const auto inc = gradtrace::increment_matrix(trace);
  for (auto _ : state) {
    const auto spec = gradtrace::singular_spectrum(inc);
    benchmark::DoNotOptimize(gradtrace::predictable_rank(spec, 0.05));
  }
}

void bm_projection_apply(benchmark::State& state) {
  const auto proj = gradtrace::make_projection(10000, 256, 6);
  const gradtrace::GradientTrace trace{random_matrix(10000, 64, 7)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(gradtrace::apply_projection(proj, trace));
  }
  state.SetItemsProcessed(state.iterations() * 64);
}

}  // namespace

BENCHMARK_CAPTURE(bm_predictor, one_step, "one-step");
BENCHMARK_CAPTURE(bm_predictor, ema, "ema:0.9");
BENCHMARK_CAPTURE(bm_predictor, trend, "trend");
BENCHMARK(bm_kappa);
BENCHMARK(bm_windowed_kappa);
BENCHMARK(bm_svd)->Args({32, 128})->Args({64, 256})->Args({64, 1024})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(bm_spectrum_ranks)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_projection_apply);

BENCHMARK_MAIN();
