#include <benchmark/benchmark.h>

#include <random>

#include "selmerlab/gf2.hpp"

using namespace selmerlab::gf2;

static BitMatrix random_matrix(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    BitMatrix M(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) M.set(i, j, gen() & 1);
    return M;
}

static void BM_Rank(benchmark::State &state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    BitMatrix M = random_matrix(n, 42);
    for (auto _ : state) {
        BitMatrix copy = M;
        benchmark::DoNotOptimize(rank_inplace(copy));
    }
}
BENCHMARK(BM_Rank)->Arg(32)->Arg(128)->Arg(512);

static void BM_KernelBasis(benchmark::State &state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    BitMatrix M = random_matrix(n, 43);
    for (auto _ : state) benchmark::DoNotOptimize(kernel_basis(M));
}
BENCHMARK(BM_KernelBasis)->Arg(32)->Arg(128)->Arg(512);

BENCHMARK_MAIN();
