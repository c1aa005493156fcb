#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "subgroupte/model.hpp"
#include "subgroupte/rng.hpp"
#include "subgroupte/subgroup.hpp"
#include "subgroupte/synthdata.hpp"
#include "subgroupte/train.hpp"

using namespace subgroupte;

namespace {

struct Workload {
    SubgroupTEModel model;
    Matrix X;
    std::vector<int> t;
    std::vector<double> y;
    TrainConfig cfg;
};

Workload make_workload(std::size_t n) {
    NetSpec spec;
    spec.input_dim = 10;
    spec.hidden_dim = 64;
    Workload w{SubgroupTEModel::create(spec, 3, 7), Matrix(n, 10), std::vector<int>(n),
               std::vector<double>(n), TrainConfig{}};
    w.model.set_centroids(Centroids{{-4.0, -3.0, -2.0}, 0.1});
    Rng rng = make_rng(1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < 10; ++j) w.X(i, j) = uniform_in(rng, -2.0, 2.0);
        w.t[i] = i % 2 == 0 ? 1 : 0;
        w.y[i] = uniform_in(rng, 0.0, 6.0);
    }
    return w;
}

void BM_ForwardFull(benchmark::State& state) {
    Workload w = make_workload(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        ForwardCache cache;
        const ModelOutput out = forward_full(w.model, w.X, cache);
        benchmark::DoNotOptimize(out.y0.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardFull)->Arg(64)->Arg(256);

void BM_BackwardFull(benchmark::State& state) {
    Workload w = make_workload(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        w.model.params.zero_grads();
        ForwardCache cache;
        const ModelOutput out = forward_full(w.model, w.X, cache);
        backward_full(w.model, cache, loss_grads(out, w.t, w.y, w.cfg));
        benchmark::DoNotOptimize(w.model.params.grad("p0.w").data().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BackwardFull)->Arg(64)->Arg(256);

void BM_EStep(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng = make_rng(2);
    std::vector<double> te(n);
    for (auto& v : te) v = uniform_in(rng, -5.0, -1.0);
    const Centroids c{{-4.0, -3.0, -2.0}, 0.1};
    for (auto _ : state) {
        const Centroids next = e_step(c, te);
        benchmark::DoNotOptimize(next.mu.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EStep)->Arg(1000)->Arg(10000);

void BM_Generate(benchmark::State& state) {
    GenConfig cfg;
    cfg.n = static_cast<std::size_t>(state.range(0));
    cfg.n_treated = cfg.n / 2;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        cfg.seed = ++seed;
        const SyntheticDataset ds = generate(cfg);
        benchmark::DoNotOptimize(ds.data.y.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Generate)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
