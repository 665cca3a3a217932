#include "promptqd/engine.hpp"

#include <benchmark/benchmark.h>

using namespace promptqd;

namespace {

void BM_EngineStep(benchmark::State& state) {
    EngineConfig cfg;
    cfg.budget = 1u << 30;
    cfg.targeted.k_directions = 8;
    auto engine = Engine::from_config(cfg);
    engine.initialize();
    for (auto _ : state) engine.step();
    state.counters["occupied"] = static_cast<double>(engine.archive().occupied());
}
BENCHMARK(BM_EngineStep);

}  // namespace
