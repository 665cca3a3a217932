#include "promptqd/archive.hpp"

#include <benchmark/benchmark.h>

using namespace promptqd;

namespace {

std::vector<Vector> random_points(std::size_t n, std::size_t dim, Rng& rng) {
    std::vector<Vector> out(n, Vector(dim));
    for (auto& p : out)
        for (auto& x : p) x = rng.uniform();
    return out;
}

void BM_NearestCentroid(benchmark::State& state) {
    Rng rng(1);
    const auto cells = static_cast<std::size_t>(state.range(0));
    Archive archive(random_points(cells, 8, rng), cells);
    const auto queries = random_points(1024, 8, rng);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(archive.nearest_centroid(queries[i++ % queries.size()]));
    }
}
BENCHMARK(BM_NearestCentroid)->Arg(64)->Arg(256)->Arg(1024);

void BM_InitCentroids(benchmark::State& state) {
    Rng rng(2);
    const auto refs = random_points(20 * 64, 8, rng);
    for (auto _ : state) benchmark::DoNotOptimize(init_centroids(refs, 64, 3));
}
BENCHMARK(BM_InitCentroids)->Unit(benchmark::kMillisecond);

}  // namespace
