#include <benchmark/benchmark.h>

#include "selmerlab/descent.hpp"
#include "selmerlab/model.hpp"
#include "selmerlab/redei.hpp"
#include "selmerlab/rng.hpp"

using namespace selmerlab;

static void BM_SampleModel(benchmark::State &state) {
    const std::size_t k = static_cast<std::size_t>(state.range(0));
    const model::ModelParams params{0, {2}};
    CounterRng rng(7);
    for (auto _ : state) benchmark::DoNotOptimize(model::sample_model(params, k, rng));
}
BENCHMARK(BM_SampleModel)->Arg(16)->Arg(64)->Arg(256);

static void BM_ModelStep(benchmark::State &state) {
    const std::size_t k = static_cast<std::size_t>(state.range(0));
    const model::ModelParams params{0, {2}};
    const chains::StepSampler sampler = model::model_step_sampler(params, k);
    CounterRng rng(8);
    for (auto _ : state) benchmark::DoNotOptimize(sampler(rng));
}
BENCHMARK(BM_ModelStep)->Arg(16)->Arg(64);

static void BM_SampleOmega(benchmark::State &state) {
    const std::size_t k = static_cast<std::size_t>(state.range(0));
    const arith::PlaceSet sigma({3});
    const std::vector<std::uint8_t> s = {0, 0, 0};
    CounterRng rng(9);
    for (auto _ : state) benchmark::DoNotOptimize(redei::sample_omega(k, sigma, s, rng));
}
BENCHMARK(BM_SampleOmega)->Arg(8)->Arg(16)->Arg(32);

static void BM_KernelDims(benchmark::State &state) {
    const std::size_t k = static_cast<std::size_t>(state.range(0));
    const arith::PlaceSet sigma({3});
    const descent::TwistClass cls(descent::CurveFamily(1, -3), sigma,
                                  arith::square_class_of(-1, sigma), {0, 0, 0});
    CounterRng rng(10);
    const arith::OmegaPoint omega = redei::sample_omega(k, sigma, cls.s(), rng);
    for (auto _ : state)
        benchmark::DoNotOptimize(descent::build_kernel_matrices(cls, omega).dims(cls));
}
BENCHMARK(BM_KernelDims)->Arg(8)->Arg(16)->Arg(32);

static void BM_ClassStep(benchmark::State &state) {
    const std::size_t k = static_cast<std::size_t>(state.range(0));
    const arith::PlaceSet sigma({3});
    const descent::TwistClass cls(descent::CurveFamily(1, -3), sigma,
                                  arith::square_class_of(-1, sigma), {0, 0, 0});
    const chains::StepSampler sampler = descent::class_step_sampler(cls, k);
    CounterRng rng(11);
    for (auto _ : state) benchmark::DoNotOptimize(sampler(rng));
}
BENCHMARK(BM_ClassStep)->Arg(8)->Arg(16);
