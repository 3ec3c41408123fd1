// Serial reference vs OpenMP path for the data-parallel kernels.
//
//   ./bench_parallel --benchmark_filter=Gram

#include "skpca/eval.hpp"

#include <benchmark/benchmark.h>

using namespace skpca;

namespace {

Exec exec_arg(const benchmark::State& state) { return state.range(1) ? Exec::parallel : Exec::serial; }

void BM_Gram(benchmark::State& state) {
    const DataMatrix X = gaussian_sample(state.range(0), 10, 1);
    const KernelParams p = sigma_heuristic(X, Exec::serial);
    for (auto _ : state) benchmark::DoNotOptimize(gram(X, p, exec_arg(state)));
    state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_Gram)->ArgsProduct({{500, 2000}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_SigmaHeuristic(benchmark::State& state) {
    const DataMatrix X = gaussian_sample(state.range(0), 10, 2);
    for (auto _ : state) benchmark::DoNotOptimize(sigma_heuristic(X, exec_arg(state)));
}
BENCHMARK(BM_SigmaHeuristic)->ArgsProduct({{500, 2000}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_UpdateBeta(benchmark::State& state) {
    const DataMatrix X = gaussian_sample(state.range(0), 2, 3);
    const GramMatrix K = center_gram(gram(X, sigma_heuristic(X)));
    const FitContext ctx = FitContext::prepare(K);
    AlgoConfig cfg;
    cfg.m = 8;
    cfg.l1_ratio = 1.0;
    cfg.exec = exec_arg(state);
    const Matrix alpha = init_alpha(ctx.eig, cfg.m);
    for (auto _ : state) benchmark::DoNotOptimize(update_beta(ctx, alpha, cfg));
}
BENCHMARK(BM_UpdateBeta)->ArgsProduct({{300}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_ScoreBatch(benchmark::State& state) {
    const DataMatrix X = gaussian_sample(1000, 10, 4);
    const GramMatrix raw = gram(X, sigma_heuristic(X));
    const DetectorModel m = fit_detector(X, raw, kpca_dense(center_gram(raw), 15));
    const DataMatrix Z = gaussian_sample(state.range(0), 10, 5);
    for (auto _ : state) benchmark::DoNotOptimize(score_batch(Z.rows(), m, exec_arg(state)));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScoreBatch)->ArgsProduct({{2000}, {0, 1}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
