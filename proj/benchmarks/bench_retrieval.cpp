#include <benchmark/benchmark.h>

#include <random>

#include "teaser/embedding.hpp"

using namespace teaser;

namespace {

std::vector<double> random_vec(std::mt19937& rng, std::size_t dim) {
    std::normal_distribution<double> d;
    std::vector<double> v(dim);
    for (double& x : v) x = d(rng);
    return v;
}

EmbeddingStore random_store(std::size_t count, std::size_t dim) {
    std::mt19937 rng(42);
    EmbeddingStore store;
    for (std::size_t i = 0; i < count; ++i) store.add({"train-" + std::to_string(i), random_vec(rng, dim), "bench", dim});
    return store;
}

}  // namespace

static void BM_Cosine(benchmark::State& state) {
    std::mt19937 rng(1);
    const auto dim = static_cast<std::size_t>(state.range(0));
    const auto a = random_vec(rng, dim);
    const auto b = random_vec(rng, dim);
    for (auto _ : state) benchmark::DoNotOptimize(cosine_similarity(a, b));
}
BENCHMARK(BM_Cosine)->Arg(16)->Arg(1024);

// Train splits are a few hundred questions; 1024 is a BERT-Large width.
static void BM_TopN(benchmark::State& state) {
    const auto count = static_cast<std::size_t>(state.range(0));
    const std::size_t dim = 1024;
    const auto store = random_store(count, dim);
    std::mt19937 rng(2);
    const auto q = random_vec(rng, dim);
    for (auto _ : state) {
        benchmark::DoNotOptimize(top_n_similar("query", q, store, {5, ExemplarOrder::most_similar_first}));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(count));
}
BENCHMARK(BM_TopN)->Arg(100)->Arg(507);
