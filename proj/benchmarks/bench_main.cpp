#include "f0dbn/contour.hpp"
#include "f0dbn/dbn.hpp"
#include "f0dbn/dnn.hpp"
#include "f0dbn/features.hpp"
#include "f0dbn/rbm.hpp"
#include "f0dbn/spline.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace f0dbn;

namespace {

std::vector<Vector> sparse_inputs(std::size_t n, std::size_t dim, double density, Rng& rng)
{
    std::vector<Vector> out(n, Vector(dim, 0.0));
    for (auto& v : out) {
        for (auto& x : v) {
            x = rng.uniform() < density ? 1.0 : 0.0;
        }
    }
    return out;
}

void BM_CdGradient(benchmark::State& state)
{
    const auto hidden = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const RbmParams p = init_rbm(kFeatureDim, hidden, rng);
    const auto batch = sparse_inputs(10, kFeatureDim, 0.06, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(cd_gradient(p, batch, rng, 1));
    }
}
BENCHMARK(BM_CdGradient)->Arg(40)->Arg(120)->Arg(200);

void BM_DnnGradient(benchmark::State& state)
{
    const auto units = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    const std::vector<std::size_t> sizes{kFeatureDim, units, units, units, units};
    const DnnModel m = init_random(sizes, kStatesPerPhoneme, 3);
    std::vector<TrainSample> batch;
    for (auto& x : sparse_inputs(20, kFeatureDim, 0.06, rng)) {
        batch.push_back({x, Vector(kStatesPerPhoneme, 0.1)});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(gradient(m, batch, LossConfig{}));
    }
}
BENCHMARK(BM_DnnGradient)->Arg(40)->Arg(120);

void BM_Ais(benchmark::State& state)
{
    Rng rng(4);
    const RbmParams p = init_rbm(20, 10, rng);
    AisConfig c;
    c.num_temperatures = static_cast<std::size_t>(state.range(0));
    c.num_runs = 20;
    for (auto _ : state) {
        benchmark::DoNotOptimize(ais_log_partition(p, c));
    }
}
BENCHMARK(BM_Ais)->Arg(100)->Arg(1000);

void BM_SplineExpand(benchmark::State& state)
{
    const auto phonemes = static_cast<std::size_t>(state.range(0));
    StateF0 s(phonemes);
    StateDurations d(phonemes);
    for (std::size_t p = 0; p < phonemes; ++p) {
        for (std::size_t k = 0; k < kStatesPerPhoneme; ++k) {
            s[p][k] = std::log(150.0) + 0.1 * std::sin(0.3 * static_cast<double>(p * kStatesPerPhoneme + k));
            d[p][k] = 1 + (p + k) % 5;
        }
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(spline_expand(s, d));
    }
}
BENCHMARK(BM_SplineExpand)->Arg(50)->Arg(500);

} // namespace

BENCHMARK_MAIN();
