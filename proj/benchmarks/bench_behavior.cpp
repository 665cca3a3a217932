#include "promptqd/behavior.hpp"
#include "promptqd/rng.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace promptqd;

namespace {

void BM_EstimateNmi(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    std::vector<Vector> x(n, Vector(1)), y(n, Vector(1));
    for (std::size_t i = 0; i < n; ++i) {
        const double a = rng.normal();
        x[i](0) = a;
        y[i](0) = 0.6 * a + 0.8 * rng.normal();
    }
    for (auto _ : state) benchmark::DoNotOptimize(estimate_nmi(x, y, 3));
}
BENCHMARK(BM_EstimateNmi)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_CodeFeatures(benchmark::State& state) {
    const std::string src =
        "import math\n\ndef fib(n):\n    if n < 2:\n        return n\n    return fib(n - 1) + fib(n - 2)\n\n"
        "def table(k):\n    out = []\n    for i in range(k):\n        out.append(fib(i))\n    return out\n";
    for (auto _ : state) benchmark::DoNotOptimize(code_feature_counts(src));
}
BENCHMARK(BM_CodeFeatures);

}  // namespace
