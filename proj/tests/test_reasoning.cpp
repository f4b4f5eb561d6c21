#include <gtest/gtest.h>

#include <fstream>

#include "oracles.hpp"
#include "teaser/error.hpp"
#include "teaser/jsonl.hpp"
#include "teaser/reasoning.hpp"

using namespace teaser;

namespace {

ProviderProfile quick() {
    ProviderProfile p;
    p.name = "scripted";
    p.requests_per_minute = 1e6;
    p.backoff_ms = {0};
    p.max_retries = 0;
    return p;
}

DatasetSplit sentence_train() {
    return load_split(oracle::data_dir() / "sentence_train.jsonl", Subtask::sentence, Role::train);
}

}  // namespace

TEST(ReasoningStore, OkIsNeverReplacedByFailure) {
    ReasoningStore store;
    EXPECT_TRUE(store.put({"a", "gemini", "because", ReasoningStatus::ok, "t0", ""}));
    EXPECT_FALSE(store.put({"a", "gemini", "", ReasoningStatus::failed, "t1", "boom"}));
    EXPECT_EQ(get_reasoning(store, "a", "gemini"), "because");
    // A newer ok record does replace.
    EXPECT_TRUE(store.put({"a", "gemini", "better", ReasoningStatus::ok, "t2", ""}));
    EXPECT_EQ(get_reasoning(store, "a", "gemini"), "better");
    // Tags are independent.
    EXPECT_FALSE(store.has_ok("a", "gpt4"));
}

TEST(ReasoningStore, NotFoundSaysWhy) {
    ReasoningStore store;
    store.put({"f", "g", "", ReasoningStatus::failed, "t", "timeout"});
    try {
        get_reasoning(store, "f", "g");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotFound);
        EXPECT_NE(std::string(e.what()).find("generation failed"), std::string::npos);
    }
    try {
        get_reasoning(store, "x", "g");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("never generated"), std::string::npos);
    }
    std::vector<std::string> ids{"f"};
    EXPECT_THROW(require_reasoning(store, ids, "g"), Error);
}

TEST(ReasoningStore, OpenAppendsAndReloads) {
    auto path = oracle::scratch_dir("rstore") / "reasoning.jsonl";
    {
        auto store = ReasoningStore::open(path);
        store.put({"a", "g", "one", ReasoningStatus::ok, "t", ""});
        store.put({"b", "g", "", ReasoningStatus::failed, "t", "x"});
    }
    // Simulate a crash mid-append.
    {
        std::ofstream out(path, std::ios::app);
        out << R"({"instance_id":"c","generator_ta)";
    }
    auto again = ReasoningStore::open(path);
    EXPECT_EQ(again.size(), 2u);
    EXPECT_TRUE(again.has_ok("a", "g"));
    EXPECT_FALSE(again.has_ok("b", "g"));

    auto compact = path.parent_path() / "compact.jsonl";
    again.save(compact);
    EXPECT_EQ(ReasoningStore::load(compact).records(), again.records());
}

TEST(BuildReasoning, GeneratesRecordsFailuresAndSkips) {
    auto split = sentence_train();
    // Drop distractors from one instance: it must fail without a provider call.
    split.instances[4].distractors.reset();

    auto backend = std::make_shared<ScriptedBackend>([](const BackendRequest& r) {
        if (r.prompt.find("electric train") != std::string::npos) return BackendReply{200, "", ""};
        if (r.prompt.find("shaves") != std::string::npos) return BackendReply{400, "", "blocked"};
        return BackendReply{200, "Reasoning for " + target_question_of(r.prompt).substr(0, 20), ""};
    });
    ProviderGateway gw(quick(), backend, nullptr);
    ReasoningStore store;
    auto stats = build_reasoning_store(split, gw, "gemini", store, {4000, 3, {}});
    EXPECT_EQ(stats.attempted, 5u);
    EXPECT_EQ(stats.ok, 2u);
    EXPECT_EQ(stats.failed, 3u);
    EXPECT_EQ(backend->calls(), 4u);

    EXPECT_TRUE(store.has_ok("SP-train-1", "gemini"));
    EXPECT_TRUE(store.has_ok("SP-train-4", "gemini"));
    EXPECT_EQ(store.find("SP-train-2", "gemini")->error, "empty generation");
    EXPECT_NE(store.find("SP-train-3", "gemini")->error.find("ProviderError"), std::string::npos);
    EXPECT_NE(store.find("SP-train-5", "gemini")->error.find("MissingDistractor"), std::string::npos);

    // A second pass only retries what is not ok.
    auto again = build_reasoning_store(split, gw, "gemini", store, {4000, 1, {}});
    EXPECT_EQ(again.skipped, 2u);
    EXPECT_EQ(again.attempted, 3u);
}

TEST(BuildReasoning, OverlongGenerationFails) {
    auto split = sentence_train();
    split.instances.resize(1);
    auto backend = std::shared_ptr<ScriptedBackend>(make_constant_backend(std::string(50, 'x')));
    ProviderGateway gw(quick(), backend, nullptr);
    ReasoningStore store;
    auto stats = build_reasoning_store(split, gw, "g", store, {10, 1, {}});
    EXPECT_EQ(stats.failed, 1u);
    EXPECT_NE(store.find("SP-train-1", "g")->error.find("exceeds"), std::string::npos);
}

TEST(BuildReasoning, AuthMissingAborts) {
    ProviderProfile p = quick();
    p.kind = ProviderKind::http;
    p.base_url = "http://127.0.0.1:9";
    p.auth_env = "TEASER_TEST_NO_SUCH_KEY";
    ::unsetenv(p.auth_env.c_str());
    auto backend = std::shared_ptr<ScriptedBackend>(make_constant_backend("x"));
    ProviderGateway gw(p, backend, nullptr);
    ReasoningStore store;
    auto split = sentence_train();
    try {
        build_reasoning_store(split, gw, "g", store);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AuthMissing);
    }
    EXPECT_EQ(store.size(), 0u);
}

TEST(ImportReasoning, ForcesTag) {
    auto dir = oracle::scratch_dir("import");
    jsonl::write_all(dir / "gpt4.jsonl", {{{"instance_id", "SP-train-2"}, {"reasoning_text", "No smoke."}},
                                          {{"instance_id", "SP-train-3"},
                                           {"reasoning_text", "A barber shaves others."},
                                           {"generator_tag", "ignored"}}});
    ReasoningStore store;
    EXPECT_EQ(import_reasoning(dir / "gpt4.jsonl", "gpt4", store), 2u);
    EXPECT_EQ(get_reasoning(store, "SP-train-3", "gpt4"), "A barber shaves others.");
    EXPECT_EQ(store.find("SP-train-3", "ignored"), nullptr);

    jsonl::write_all(dir / "bad.jsonl", {{{"instance_id", "x"}, {"reasoning_text", ""}}});
    EXPECT_THROW(import_reasoning(dir / "bad.jsonl", "gpt4", store), Error);
}
