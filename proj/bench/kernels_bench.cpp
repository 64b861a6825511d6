// OpenMP kernels against their serial references.

#include "mvkid/baselines.hpp"
#include "mvkid/kernels.hpp"
#include "mvkid/mvmc.hpp"
#include "mvkid/synthgen.hpp"

#include <benchmark/benchmark.h>

using namespace mvkid;

namespace {

struct Fixture {
    Network net;
    std::vector<EncodedSession> xs;
    std::vector<Sample> batch;
    FeatureSet features;
};

const Fixture& fixture()
{
    static const Fixture f = [] {
        GenConfig g;
        g.sessions_per_user = 40;
        const Dataset ds = generate_dataset(g);
        ModelConfig cfg;
        cfg.n_classes = ds.num_classes();
        const MvmcModel m = MvmcModel::initialize(cfg, fit_normalizer(ds), ds.labels());
        Fixture out;
        out.net = m.net;
        for (const auto& s : ds.sessions())
            out.xs.push_back(m.encode(s));
        for (std::size_t i = 0; i < 64; ++i)
            out.batch.push_back({&out.xs[i * 3 % out.xs.size()], ds.label(i * 3 % out.xs.size())});
        out.features = featurize_dataset(ds, m.normalizer);
        return out;
    }();
    return f;
}

void BM_BatchGradientSerial(benchmark::State& state)
{
    const Fixture& f = fixture();
    Network grad = Network::zeros(f.net.shape);
    GradientScratch scratch(f.net.shape);
    const std::span<const Sample> batch(f.batch.data(), static_cast<std::size_t>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(batch_gradient_serial(f.net, batch, grad, scratch));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BatchGradientParallel(benchmark::State& state)
{
    const Fixture& f = fixture();
    Network grad = Network::zeros(f.net.shape);
    GradientScratch scratch(f.net.shape);
    const std::span<const Sample> batch(f.batch.data(), static_cast<std::size_t>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(batch_gradient_parallel(f.net, batch, grad, scratch));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_PredictSerial(benchmark::State& state)
{
    const Fixture& f = fixture();
    for (auto _ : state)
        benchmark::DoNotOptimize(predict_serial(f.net, f.xs));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.xs.size()));
}

void BM_PredictParallel(benchmark::State& state)
{
    const Fixture& f = fixture();
    for (auto _ : state)
        benchmark::DoNotOptimize(predict_parallel(f.net, f.xs));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.xs.size()));
}

void BM_ForestSerial(benchmark::State& state)
{
    const Fixture& f = fixture();
    BaselineHyper h;
    h.forest_trees = 32;
    for (auto _ : state)
        benchmark::DoNotOptimize(train_random_forest_serial(f.features.x, f.features.y, 5, h));
}

void BM_ForestParallel(benchmark::State& state)
{
    const Fixture& f = fixture();
    BaselineHyper h;
    h.forest_trees = 32;
    for (auto _ : state)
        benchmark::DoNotOptimize(train_random_forest(f.features.x, f.features.y, 5, h));
}

void BM_GenerateSerial(benchmark::State& state)
{
    GenConfig g;
    for (auto _ : state)
        benchmark::DoNotOptimize(generate_dataset(g, false));
}

void BM_GenerateParallel(benchmark::State& state)
{
    GenConfig g;
    for (auto _ : state)
        benchmark::DoNotOptimize(generate_dataset(g, true));
}

} // namespace

BENCHMARK(BM_BatchGradientSerial)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradientParallel)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForestSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForestParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GenerateSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GenerateParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
