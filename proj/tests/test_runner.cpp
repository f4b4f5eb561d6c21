#include <gtest/gtest.h>

#include "harness.hpp"
#include "teaser/error.hpp"
#include "teaser/report.hpp"

using namespace teaser;

namespace {

std::shared_ptr<TextBackend> gold_backend(const harness::SubtaskFixture& f) {
    return std::shared_ptr<ScriptedBackend>(make_answer_key_backend(f.test));
}

RunOptions options_in(const std::string& name, std::optional<std::size_t> limit = {}) {
    RunOptions o;
    o.runs_root = oracle::scratch_dir(name);
    o.workers = 3;
    o.limit = limit;
    return o;
}

}  // namespace

TEST(Runner, GoldMockScoresPerfectlyForEveryStrategy) {
    for (Subtask s : {Subtask::sentence, Subtask::word}) {
        auto f = harness::load(s);
        auto specs = harness::all_strategies(s);
        ASSERT_EQ(specs.size(), 2u + 3u * 2u * 3u);
        ProviderGateway gw(harness::quick_profile(), gold_backend(*f), nullptr);
        auto opts = options_in("gold");
        for (const auto& spec : specs) {
            auto r = execute_run(spec, f->inputs(), gw, opts);
            ASSERT_TRUE(r.complete()) << spec.label();
            EXPECT_EQ(r.metrics->overall.render3(), "1.000") << spec.label();
            EXPECT_EQ(r.metrics->ori_sem_con.render3(), "1.000") << spec.label();
        }
    }
}

TEST(Runner, ConstantOptionOneScoresOneThird) {
    auto f = harness::load(Subtask::sentence);
    auto spec = harness::all_strategies(Subtask::sentence).at(1);
    ProviderGateway gw(harness::quick_profile(), std::shared_ptr<ScriptedBackend>(make_constant_backend("Option 1")),
                       nullptr);
    auto r = execute_run(spec, f->inputs(), gw, options_in("const"));
    EXPECT_EQ(r.metrics->overall, (Fraction{2, 6}));
    EXPECT_EQ(r.metrics->overall.render3(), "0.333");
}

TEST(Runner, WritesArtifacts) {
    auto f = harness::load(Subtask::word);
    auto specs = harness::all_strategies(Subtask::word);
    const auto& spec = specs.at(3);
    ProviderGateway gw(harness::quick_profile(), gold_backend(*f), nullptr);
    auto opts = options_in("artifacts");
    auto r = execute_run(spec, f->inputs(), gw, opts);
    const auto dir = opts.runs_root / spec.run_id;
    for (const char* file : {"manifest.json", "predictions.jsonl", "metrics.json", "metrics.csv", "checkpoint.jsonl"}) {
        EXPECT_TRUE(std::filesystem::exists(dir / file)) << file;
    }
    EXPECT_EQ(r.manifest["status"], "complete");
    EXPECT_EQ(r.manifest["template_version"], spec.template_version);
    EXPECT_EQ(r.manifest["cache"]["backend_calls"], 6);
    EXPECT_EQ(r.manifest["exemplar_ids"]["WP-T1"].size(), static_cast<std::size_t>(spec.strategy.shots));

    auto loaded = load_run_result(dir);
    EXPECT_EQ(loaded.run_id, spec.run_id);
    EXPECT_EQ(loaded.metrics, r.metrics);
    EXPECT_EQ(loaded.predictions, r.predictions);
}

TEST(Runner, DynamicSelectionUsesEmbeddings) {
    auto f = harness::load(Subtask::word);
    RunSpec spec;
    spec.subtask = Subtask::word;
    spec.strategy = Strategy{StrategyKind::few_shot, 2, ExampleSource::dynamic_examples, ReasoningSource::none};
    spec.retrieval = RetrievalConfig{2, ExemplarOrder::most_similar_first};
    spec.provider = "mock";
    spec.template_version = "fewshot-v1";
    spec.run_id = derive_run_id(spec);
    auto chosen = select_exemplars(spec, f->inputs());
    for (const auto& inst : f->test.instances) {
        const auto* rec = f->test_embeddings.find(inst.id);
        EXPECT_EQ(chosen.at(inst.id), top_n_similar(inst.id, rec->vector, f->train_embeddings, {2}));
    }

    auto inputs = f->inputs();
    inputs.train_embeddings = nullptr;
    EXPECT_THROW(select_exemplars(spec, inputs), Error);

    EmbeddingStore other;
    other.add({"WP-train-1", {1.0}, "other-model", 1});
    inputs = f->inputs();
    inputs.train_embeddings = &other;
    try {
        select_exemplars(spec, inputs);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ProviderTagMismatch);
    }
}

TEST(Runner, MissingReasoningFailsBeforeAnyCall) {
    auto f = harness::load(Subtask::sentence);
    ReasoningStore sparse;
    sparse.put({"SP-train-1", "gpt4", "only one", ReasoningStatus::ok, "t", ""});
    auto inputs = f->inputs();
    inputs.reasoning = &sparse;

    RunSpec spec;
    spec.subtask = Subtask::sentence;
    spec.strategy = Strategy{StrategyKind::few_shot, 2, ExampleSource::static_examples,
                             ReasoningSource::external_generated};
    spec.static_exemplar_ids = std::vector<std::string>{"SP-train-1", "SP-train-2"};
    spec.generator_tag = "gpt4";
    spec.provider = "mock";
    spec.template_version = "fewshot-v1";
    spec.run_id = derive_run_id(spec);

    auto backend = std::shared_ptr<ScriptedBackend>(make_constant_backend("Option 1"));
    ProviderGateway gw(harness::quick_profile(), backend, nullptr);
    try {
        execute_run(spec, inputs, gw, options_in("noreason"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotFound);
        EXPECT_NE(std::string(e.what()).find("SP-train-2"), std::string::npos);
    }
    EXPECT_EQ(backend->calls(), 0u);
}

TEST(Runner, ResumeIssuesOnlyRemainingCalls) {
    auto f = harness::load(Subtask::sentence);
    const auto spec = harness::all_strategies(Subtask::sentence).at(4);

    auto full_backend = gold_backend(*f);
    ProviderGateway full_gw(harness::quick_profile(), full_backend, nullptr);
    auto full = execute_run(spec, f->inputs(), full_gw, options_in("resume-full"));

    auto backend = std::shared_ptr<ScriptedBackend>(make_answer_key_backend(f->test));
    ProviderGateway gw(harness::quick_profile(), backend, nullptr);
    auto opts = options_in("resume");
    opts.limit = 2;
    auto partial = execute_run(spec, f->inputs(), gw, opts);
    EXPECT_FALSE(partial.complete());
    EXPECT_EQ(partial.manifest["status"], "partial");
    EXPECT_EQ(backend->calls(), 2u);
    EXPECT_FALSE(std::filesystem::exists(opts.runs_root / spec.run_id / "predictions.jsonl"));

    opts.limit.reset();
    auto resumed = execute_run(spec, f->inputs(), gw, opts);
    EXPECT_EQ(backend->calls(), 6u);
    EXPECT_EQ(resumed.resumed_instances, 2u);
    EXPECT_EQ(resumed.new_instances, 4u);
    EXPECT_EQ(resumed.metrics, full.metrics);
}

TEST(Runner, TornCheckpointTailIsRedone) {
    auto f = harness::load(Subtask::sentence);
    const auto spec = harness::all_strategies(Subtask::sentence).at(0);
    auto backend = std::shared_ptr<ScriptedBackend>(make_answer_key_backend(f->test));
    ProviderGateway gw(harness::quick_profile(), backend, nullptr);
    auto opts = options_in("torn");
    opts.limit = 3;
    execute_run(spec, f->inputs(), gw, opts);
    {
        std::ofstream out(opts.runs_root / spec.run_id / "checkpoint.jsonl", std::ios::app);
        out << R"({"instance_id":"SP-T2","predic)";
    }
    opts.limit.reset();
    auto r = execute_run(spec, f->inputs(), gw, opts);
    EXPECT_TRUE(r.complete());
    EXPECT_EQ(backend->calls(), 6u);
}

TEST(Runner, ProviderFailuresAreRecordedAndRetriedOnResume) {
    auto f = harness::load(Subtask::word);
    const auto spec = harness::all_strategies(Subtask::word).at(1);
    bool broken = true;
    auto answer = std::shared_ptr<ScriptedBackend>(make_answer_key_backend(f->test));
    auto backend = std::make_shared<ScriptedBackend>([&](const BackendRequest& r) {
        if (broken && r.prompt.find("twenty-six") != std::string::npos) return BackendReply{400, "", "filtered"};
        return answer->complete(r);
    });
    ProviderGateway gw(harness::quick_profile(), backend, nullptr);
    auto opts = options_in("failures");
    auto first = execute_run(spec, f->inputs(), gw, opts);
    ASSERT_TRUE(first.complete());
    EXPECT_EQ(first.failed_instances, 2u);
    EXPECT_EQ(first.metrics->overall, (Fraction{4, 6}));

    broken = false;
    auto second = execute_run(spec, f->inputs(), gw, opts);
    EXPECT_EQ(second.failed_instances, 0u);
    EXPECT_EQ(second.resumed_instances, 4u);
    EXPECT_EQ(second.metrics->overall, (Fraction{6, 6}));
}

TEST(Runner, ReasksUnparseableOnce) {
    auto f = harness::load(Subtask::sentence);
    auto spec = harness::all_strategies(Subtask::sentence).at(1);
    spec.reask_unparseable = true;
    spec.run_id = derive_run_id(spec);
    auto answer = std::shared_ptr<ScriptedBackend>(make_answer_key_backend(f->test));
    int calls = 0;
    auto backend = std::make_shared<ScriptedBackend>([&](const BackendRequest& r) {
        // Odd calls ramble, even calls answer.
        if (++calls % 2) return BackendReply{200, "Hmm, tricky.", ""};
        return answer->complete(r);
    });
    ProviderGateway gw(harness::quick_profile(), backend, nullptr);
    auto opts = options_in("reask");
    opts.workers = 1;
    auto r = execute_run(spec, f->inputs(), gw, opts);
    EXPECT_EQ(calls, 12);
    EXPECT_EQ(r.metrics->overall, (Fraction{6, 6}));
}

TEST(Runner, ReplayIsByteIdentical) {
    auto f = harness::load(Subtask::sentence);
    const auto specs = harness::all_strategies(Subtask::sentence);
    auto cache = std::make_shared<CompletionCache>(oracle::scratch_dir("replay-cache"));
    auto backend = std::shared_ptr<ScriptedBackend>(make_answer_key_backend(f->test));
    ProviderGateway live(harness::quick_profile(), backend, cache);
    auto live_opts = options_in("replay-live");
    std::vector<RunResult> live_results;
    for (const auto& spec : specs) live_results.push_back(execute_run(spec, f->inputs(), live, live_opts));

    ProviderGateway replay(resolve_profile("replay"), nullptr, cache);
    auto replay_opts = options_in("replay-again");
    std::vector<RunResult> replay_results;
    for (const auto& spec : specs) replay_results.push_back(execute_run(spec, f->inputs(), replay, replay_opts));
    EXPECT_EQ(replay.stats().backend_calls, 0u);

    for (std::size_t i = 0; i < specs.size(); ++i) {
        EXPECT_EQ(oracle::slurp(live_opts.runs_root / specs[i].run_id / "predictions.jsonl"),
                  oracle::slurp(replay_opts.runs_root / specs[i].run_id / "predictions.jsonl"));
    }
    auto a = oracle::scratch_dir("replay-report-a");
    auto b = oracle::scratch_dir("replay-report-b");
    auto files_a = emit_report(live_results, a);
    emit_report(replay_results, b);
    for (const auto& p : files_a) EXPECT_EQ(oracle::slurp(p), oracle::slurp(b / p.filename())) << p;
}

TEST(Report, TablesAndPlotData) {
    auto f = harness::load(Subtask::word);
    const auto specs = harness::all_strategies(Subtask::word);
    ProviderGateway gw(harness::quick_profile(), std::shared_ptr<ScriptedBackend>(make_constant_backend("Option 1")),
                       nullptr);
    auto opts = options_in("report");
    std::vector<RunResult> results;
    for (std::size_t i : {0u, 1u, 2u}) results.push_back(execute_run(specs[i], f->inputs(), gw, opts));

    auto out = oracle::scratch_dir("report-out");
    auto files = emit_report(results, out);
    ASSERT_EQ(files.size(), 3u);
    const auto csv = oracle::slurp(out / "table_word.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "Strategy,Ori,Sem,Con,Ori & Sem,Ori & Sem & Con,Overall");
    EXPECT_NE(csv.find("Direct Prompt,"), std::string::npos);
    EXPECT_NE(csv.find("1 Shot + SE,"), std::string::npos);
    const auto md = oracle::slurp(out / "table_word.md");
    EXPECT_NE(md.find("Direct Prompt †"), std::string::npos);
    EXPECT_NE(md.find("direct-v1"), std::string::npos);
    const auto plot = oracle::slurp(out / "plot_word.csv");
    EXPECT_NE(plot.find("SE,1,Overall,0.333"), std::string::npos);

    std::vector<RunResult> none;
    EXPECT_THROW(emit_report(none, out), Error);
}
