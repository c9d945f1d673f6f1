#include <benchmark/benchmark.h>

#include <random>

#include "rtsr/ops.hpp"
#include "rtsr/resample.hpp"

namespace {

rtsr::Tensor noise(rtsr::Shape s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    rtsr::Tensor t(s);
    for (float& v : t.data()) v = u(rng);
    return t;
}

// Args: channels, side.
void BM_Conv3x3(benchmark::State& state) {
    const auto c = state.range(0), side = state.range(1);
    const rtsr::Tensor x = noise({1, c, side, side}, 1);
    rtsr::ConvParams p = rtsr::ConvParams::make(c, c, 3, true);
    p.weight = noise(p.weight.shape(), 2);
    for (auto _ : state) benchmark::DoNotOptimize(rtsr::conv2d(x, p));
    state.SetItemsProcessed(state.iterations() * c * c * 9 * side * side);
}
BENCHMARK(BM_Conv3x3)->Args({16, 64})->Args({32, 64})->Args({16, 270})->Unit(benchmark::kMillisecond);

void BM_PixelShuffle(benchmark::State& state) {
    const rtsr::Tensor x = noise({1, 48, 270, 480}, 3);
    for (auto _ : state) benchmark::DoNotOptimize(rtsr::pixel_shuffle(x, 4));
}
BENCHMARK(BM_PixelShuffle)->Unit(benchmark::kMillisecond);

void BM_LanczosUpsample(benchmark::State& state) {
    const auto side = state.range(0);
    const rtsr::Tensor x = noise({1, 3, side, side}, 4);
    for (auto _ : state) benchmark::DoNotOptimize(rtsr::baseline_upsample(x, 4));
}
BENCHMARK(BM_LanczosUpsample)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Degrade(benchmark::State& state) {
    const rtsr::Tensor x = noise({1, 3, 256, 256}, 5);
    for (auto _ : state) benchmark::DoNotOptimize(rtsr::degrade(x, rtsr::DegradationSpec{}));
}
BENCHMARK(BM_Degrade)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
