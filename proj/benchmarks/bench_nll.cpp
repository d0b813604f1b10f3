#include <benchmark/benchmark.h>

#include "lori/envs.hpp"
#include "lori/infer.hpp"

using namespace lori;

namespace {

struct Setup {
    PreferenceDataset data;
    LexRewardModel model;
};

// 10-dimensional features, 10k preferences; `positive` routes through the
// generic per-alternative path instead of the linear kernel.
Setup make(std::size_t k, bool positive) {
    Rng rng(1);
    const auto env = gen_synthetic_lex_env(10, 10, rng);
    Setup s{gen_preference_dataset(env.truth, env.sample_alternatives(20000, rng), 10000, rng), {}};
    for (std::size_t l = 0; l < k; ++l)
        s.model.levels.push_back({LinearReward{std::vector<double>(10, 0.1), positive}, {1.0, 0.2}});
    return s;
}

void BM_NllGradient(benchmark::State& state, bool positive) {
    const auto s = make(static_cast<std::size_t>(state.range(0)), positive);
    const NllObjective obj(s.data);
    for (auto _ : state) benchmark::DoNotOptimize(obj.evaluate_with_gradient(s.model));
    state.SetComplexityN(state.range(0));
}

void BM_Nll(benchmark::State& state) {
    const auto s = make(static_cast<std::size_t>(state.range(0)), false);
    const NllObjective obj(s.data);
    for (auto _ : state) benchmark::DoNotOptimize(obj.evaluate(s.model));
}

}  // namespace

BENCHMARK_CAPTURE(BM_NllGradient, linear_kernel, false)->DenseRange(1, 10)->Complexity()->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_NllGradient, generic, true)->RangeMultiplier(2)->Range(1, 8)->Complexity()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Nll)->DenseRange(1, 10, 3)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
