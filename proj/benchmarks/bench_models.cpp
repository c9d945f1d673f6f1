#include <benchmark/benchmark.h>

#include <random>

#include "rtsr/model.hpp"

namespace {

const std::vector<std::string>& names() {
    static const std::vector<std::string> n = rtsr::zoo_names();
    return n;
}

rtsr::Tensor input_for(const rtsr::ModelSpec& spec) {
    const std::int64_t m = rtsr::input_multiple(spec);
    const std::int64_t side = (64 + m - 1) / m * m;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    rtsr::Tensor t({1, 3, side, side});
    for (float& v : t.data()) v = u(rng);
    return t;
}

// Arg: index into the zoo. Train graphs run every branch; deploy graphs one conv per block.
void BM_TrainForward(benchmark::State& state) {
    const auto spec = rtsr::zoo_spec(names()[static_cast<std::size_t>(state.range(0))]);
    const auto g = rtsr::build(spec, rtsr::Mode::train, {1});
    const auto x = input_for(spec);
    state.SetLabel(spec.name);
    for (auto _ : state) benchmark::DoNotOptimize(rtsr::forward(g, x));
}

void BM_DeployForward(benchmark::State& state) {
    const auto spec = rtsr::zoo_spec(names()[static_cast<std::size_t>(state.range(0))]);
    const auto g = rtsr::fuse(rtsr::build(spec, rtsr::Mode::train, {1}));
    const auto x = input_for(spec);
    state.SetLabel(spec.name);
    for (auto _ : state) benchmark::DoNotOptimize(rtsr::forward(g, x));
}

void zoo_args(benchmark::internal::Benchmark* b) {
    for (std::size_t i = 0; i < names().size(); ++i) b->Arg(static_cast<std::int64_t>(i));
}

BENCHMARK(BM_TrainForward)->Apply(zoo_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DeployForward)->Apply(zoo_args)->Unit(benchmark::kMillisecond);

}  // namespace
