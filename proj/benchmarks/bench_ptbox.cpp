#include <benchmark/benchmark.h>

#include "ptbox/box.hpp"
#include "ptbox/model.hpp"
#include "ptbox/time_codec.hpp"

namespace {

using namespace ptbox;

ModelParams make_model(int dim, std::int32_t entities = 64) {
    ModelConfig cfg;
    cfg.dim = dim;
    cfg.order_n = 20;
    Rng rng(7);
    return init_params(entities, 4, TimeSpan{1900, 2000}, cfg, rng);
}

// Candidate scoring cost must scale linearly in d: compare adjacent columns.
void BM_ScorerSweep(benchmark::State& state) {
    const ModelParams m = make_model(static_cast<int>(state.range(0)));
    Scorer s(m);
    s.begin_query(1, 1950, CorruptSlot::Tail, 3);
    std::int32_t c = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(s.swept_log_score(c));
        c = (c + 1) % m.num_entities;
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ScorerSweep)->Arg(16)->Arg(32)->Arg(64)->Arg(128)->Arg(256);

void BM_BernsteinBasis(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    std::vector<double> out(static_cast<std::size_t>(n) + 1);
    double x = 0.0;
    for (auto _ : state) {
        bernstein_basis(x, n, out);
        benchmark::DoNotOptimize(out.data());
        x += 1e-4;
        if (x > 1.0) x = 0.0;
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_BernsteinBasis)->Arg(5)->Arg(20)->Arg(64);

void BM_LogVolume(benchmark::State& state) {
    const std::size_t d = static_cast<std::size_t>(state.range(0));
    std::vector<double> mn(d, 0.0), mx(d, 1.0);
    for (std::size_t i = 0; i < d; ++i) mx[i] = 0.5 + 0.01 * static_cast<double>(i % 7);
    for (auto _ : state)
        benchmark::DoNotOptimize(boxkernel::log_volume(mn, mx, 1.0));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_LogVolume)->Arg(32)->Arg(128);

// Full training step cost for one quadruple: forward tape + backward.
void BM_TapeQuad(benchmark::State& state) {
    ModelParams m = make_model(static_cast<int>(state.range(0)));
    const Quadruple q{3, 1, 5, 1950};
    Tape tape;
    for (auto _ : state) {
        tape.clear();
        m.zero_grads();
        const auto node = build_log_score(tape, m, q);
        tape.backward(node);
        benchmark::DoNotOptimize(m.entities.grad.data());
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TapeQuad)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
