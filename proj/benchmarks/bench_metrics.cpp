#include "promptqd/metrics.hpp"

#include <benchmark/benchmark.h>

using namespace promptqd;

namespace {

void BM_SelfBleu(benchmark::State& state) {
    Rng rng(5);
    const std::vector<std::string> words{"for", "x", "in", "range", "(", "n", ")", ":", "return", "sum", "def", "f"};
    std::vector<std::string> texts(static_cast<std::size_t>(state.range(0)));
    for (auto& t : texts)
        for (int w = 0; w < 40; ++w) t += words[rng.below(words.size())] + " ";
    for (auto _ : state) benchmark::DoNotOptimize(self_bleu(texts));
}
BENCHMARK(BM_SelfBleu)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
