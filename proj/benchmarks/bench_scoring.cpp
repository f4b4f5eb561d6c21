#include <benchmark/benchmark.h>

#include <random>

#include "teaser/adjudicator.hpp"

using namespace teaser;

namespace {

const std::vector<std::string> kChoices{"Urban city.", "Inner city.", "Electricity.", "None of above."};

}  // namespace

static void BM_ExtractExplicit(benchmark::State& state) {
    const std::string text = "After weighing the options, the answer is Option 3: Electricity.";
    for (auto _ : state) benchmark::DoNotOptimize(extract_choice(text, kChoices));
}
BENCHMARK(BM_ExtractExplicit);

static void BM_ExtractVerbatim(benchmark::State& state) {
    const std::string text = std::string(400, ' ') + "so it must be electricity, which has the letters of city.";
    for (auto _ : state) benchmark::DoNotOptimize(extract_choice(text, kChoices));
}
BENCHMARK(BM_ExtractVerbatim);

// 120 test questions in 40 complete groups, the sentence-puzzle test size.
static void BM_ScoreRun(benchmark::State& state) {
    const auto groups = static_cast<std::size_t>(state.range(0));
    std::mt19937 rng(3);
    DatasetSplit split;
    std::vector<Prediction> preds;
    const char* suffix[3] = {"", "_SR", "_CR"};
    const Variant variant[3] = {Variant::original, Variant::semantic, Variant::context};
    for (std::size_t g = 0; g < groups; ++g) {
        for (int v = 0; v < 3; ++v) {
            PuzzleInstance inst;
            inst.id = "G" + std::to_string(g) + suffix[v];
            inst.question = "q";
            inst.choices = kChoices;
            inst.label = static_cast<int>(rng() % 4);
            inst.variant = variant[v];
            inst.group_id = "G" + std::to_string(g);
            preds.push_back({inst.id, static_cast<int>(rng() % 4) + 1, "", ParseStatus::parsed});
            split.instances.push_back(std::move(inst));
        }
    }
    const auto g = derive_groups(split);
    for (auto _ : state) benchmark::DoNotOptimize(score_run(preds, split, g));
}
BENCHMARK(BM_ScoreRun)->Arg(40)->Arg(500);
