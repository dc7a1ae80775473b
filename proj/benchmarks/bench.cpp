#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "pcnn/baselines.hpp"
#include "pcnn/model.hpp"
#include "pcnn/simulator.hpp"
#include "pcnn/tape.hpp"
#include "pcnn/training.hpp"

using namespace pcnn;

namespace {

Dataset bench_dataset(std::size_t days) {
    PlantConfig cfg;
    cfg.noise_std = 0.0;
    return simulate(cfg, Controller::RandomExcitation, days, 42).data;
}

BlackBoxConfig bench_net(std::size_t width) {
    BlackBoxConfig cfg;
    cfg.input_dim = kFeatureDim;
    cfg.encoder_width = width;
    cfg.recurrent_width = width;
    cfg.decoder_width = width;
    return cfg;
}

void BM_TapeForward(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    std::vector<double> x0(n), w0(n * n);
    for (double& v : x0) v = val(rng);
    for (double& v : w0) v = val(rng) / static_cast<double>(n);
    for (auto _ : state) {
        ad::Tape tape;
        ad::Var x = tape.leaf(x0);
        ad::Var W = tape.constant(w0, n, n);
        ad::Var y = ad::mean(ad::square(ad::tanh(ad::matvec(W, x))));
        benchmark::DoNotOptimize(y.scalar());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_TapeForward)->Arg(16)->Arg(64)->Arg(256);

void BM_TapeBackward(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    std::vector<double> x0(n), w0(n * n);
    for (double& v : x0) v = val(rng);
    for (double& v : w0) v = val(rng) / static_cast<double>(n);
    for (auto _ : state) {
        ad::Tape tape;
        ad::Var x = tape.leaf(x0);
        ad::Var W = tape.leaf(w0);  // flattened weight leaf
        ad::Var Wm = tape.constant(w0, n, n);
        ad::Var y = ad::mean(ad::square(ad::tanh(ad::add(ad::matvec(Wm, x), ad::smul(x, 0.1)))));
        y = ad::add(y, ad::mean(ad::square(W)));
        auto g = tape.gradient(y, W);
        benchmark::DoNotOptimize(g.data());
    }
}
BENCHMARK(BM_TapeBackward)->Arg(16)->Arg(64)->Arg(256);

void BM_PcnnRollout(benchmark::State& state) {
    static Dataset d = bench_dataset(3);
    const std::size_t len = static_cast<std::size_t>(state.range(0));
    PcnnModel model(PcnnVariant::S, BuildingTopology::chain(3), bench_net(16), {}, 1);
    SeriesView sv{&d, {0, len}};
    for (auto _ : state) {
        Trace tr = model.rollout(sv);
        benchmark::DoNotOptimize(tr.T.back()[0]);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(len));
}
BENCHMARK(BM_PcnnRollout)->Arg(48)->Arg(96)->Arg(288);

void BM_SeriesGradient(benchmark::State& state) {
    static Dataset d = bench_dataset(3);
    const std::size_t len = static_cast<std::size_t>(state.range(0));
    PcnnModel model(PcnnVariant::S, BuildingTopology::chain(3), bench_net(16), {}, 1);
    SeriesView sv{&d, {0, len}};
    for (auto _ : state) {
        GradMap g = series_gradient(model, sv);
        benchmark::DoNotOptimize(g.size());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(len));
}
BENCHMARK(BM_SeriesGradient)->Arg(48)->Arg(96);

void BM_EnergyAccumulator(benchmark::State& state) {
    BuildingTopology topo = BuildingTopology::chain(3);
    EffectivePhysics eff;
    eff.a_h.assign(3, 1.2e-4);
    eff.a_c.assign(3, 1.2e-4);
    eff.b.assign(3, 6e-3);
    eff.c.assign(2, 8e-3);
    static Dataset d = bench_dataset(3);
    PurePhysicsModel model(topo, eff);
    SeriesView sv{&d, {0, 288}};
    for (auto _ : state) {
        Trace tr = model.rollout(sv);
        benchmark::DoNotOptimize(tr.E.back()[0]);
    }
    state.SetItemsProcessed(state.iterations() * 288);
}
BENCHMARK(BM_EnergyAccumulator);

void BM_LinearFitObjective(benchmark::State& state) {
    static Dataset d = bench_dataset(7);
    SequenceSplit split = build_sequences(d, 1);
    LinearFitConfig cfg;
    cfg.budget = 50;  // measure a fixed slice of the search
    for (auto _ : state) {
        LinearModel m = fit_linear(d, split.train, BuildingTopology::chain(3), cfg);
        benchmark::DoNotOptimize(m.physics().b[0]);
    }
}
BENCHMARK(BM_LinearFitObjective)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
