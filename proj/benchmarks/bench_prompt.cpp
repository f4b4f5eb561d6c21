#include <benchmark/benchmark.h>

#include "teaser/prompt.hpp"

using namespace teaser;

namespace {

PuzzleInstance make(const std::string& id, int label) {
    PuzzleInstance p;
    p.id = id;
    p.subtask = Subtask::sentence;
    p.question = "A man shaves everyday, yet keeps his beard long. How is that possible?";
    p.choices = {"He is a barber.", "He wants to maintain his appearance.", "He wants his girlfriend to buy him a razor.",
                 "None of above."};
    p.label = label;
    p.group_id = id;
    p.distractors = std::vector<std::string>{p.choices[1], p.choices[2]};
    return p;
}

}  // namespace

static void BM_RenderFewShot(benchmark::State& state) {
    const int shots = static_cast<int>(state.range(0));
    std::vector<PuzzleInstance> train;
    for (int i = 0; i < shots; ++i) train.push_back(make("train-" + std::to_string(i), i % 4));
    std::vector<Exemplar> ex;
    for (const auto& t : train) ex.push_back({&t, std::string("A barber shaves other people, not himself.")});
    const auto target = make("test", 0);
    const Strategy s{StrategyKind::few_shot, shots, ExampleSource::static_examples, ReasoningSource::self_generated};
    for (auto _ : state) benchmark::DoNotOptimize(render_prompt(target, s, ex));
}
BENCHMARK(BM_RenderFewShot)->Arg(1)->Arg(5);

static void BM_RenderZeroShot(benchmark::State& state) {
    const auto target = make("test", 0);
    for (auto _ : state) benchmark::DoNotOptimize(render_prompt(target, Strategy{StrategyKind::zero_definition}, {}));
}
BENCHMARK(BM_RenderZeroShot);
