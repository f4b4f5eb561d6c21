#include <gtest/gtest.h>

#include <random>
#include <regex>

#include "oracles.hpp"
#include "teaser/dataset.hpp"
#include "teaser/error.hpp"
#include "teaser/prompt.hpp"

using namespace teaser;

namespace {

struct Fixture {
    DatasetSplit train, test;
};

const Fixture& fixture(Subtask s) {
    static const Fixture sentence{
        load_split(oracle::data_dir() / "sentence_train.jsonl", Subtask::sentence, Role::train),
        load_split(oracle::data_dir() / "sentence_test.jsonl", Subtask::sentence, Role::test)};
    static const Fixture word{load_split(oracle::data_dir() / "word_train.jsonl", Subtask::word, Role::train),
                              load_split(oracle::data_dir() / "word_test.jsonl", Subtask::word, Role::test)};
    return s == Subtask::sentence ? sentence : word;
}

std::string golden(const std::string& name) { return oracle::slurp(oracle::golden_dir() / name); }

Strategy few(int shots, ReasoningSource r = ReasoningSource::none) {
    return Strategy{StrategyKind::few_shot, shots, ExampleSource::static_examples, r};
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto at = hay.find(needle); at != std::string::npos; at = hay.find(needle, at + 1)) ++n;
    return n;
}

}  // namespace

TEST(PromptGolden, DefinitionSentence) {
    const auto& f = fixture(Subtask::sentence);
    auto p = render_prompt(*f.test.find("SP-T1"), Strategy{StrategyKind::zero_definition}, {});
    EXPECT_EQ(p.text, golden("zero_definition_sentence.txt"));
    EXPECT_EQ(p.template_version, "definition-v1");
}

TEST(PromptGolden, DefinitionWord) {
    const auto& f = fixture(Subtask::word);
    auto p = render_prompt(*f.test.find("WP-T1"), Strategy{StrategyKind::zero_definition}, {});
    EXPECT_EQ(p.text, golden("zero_definition_word.txt"));
}

TEST(PromptGolden, DirectSentence) {
    const auto& f = fixture(Subtask::sentence);
    auto p = render_prompt(*f.test.find("SP-T1"), Strategy{StrategyKind::zero_direct}, {});
    EXPECT_EQ(p.text, golden("zero_direct_sentence.txt"));
    EXPECT_EQ(p.template_version, "direct-v1");
}

TEST(PromptGolden, TwoShotSentence) {
    const auto& f = fixture(Subtask::sentence);
    std::vector<Exemplar> ex{{f.train.find("SP-train-2"), {}}, {f.train.find("SP-train-3"), {}}};
    auto p = render_prompt(*f.test.find("SP-T2"), few(2), ex);
    EXPECT_EQ(p.text, golden("few_shot_2_sentence.txt"));
    EXPECT_EQ(p.exemplar_ids, (std::vector<std::string>{"SP-train-2", "SP-train-3"}));
}

TEST(PromptGolden, TwoShotWord) {
    const auto& f = fixture(Subtask::word);
    std::vector<Exemplar> ex{{f.train.find("WP-train-1"), {}}, {f.train.find("WP-train-2"), {}}};
    auto p = render_prompt(*f.test.find("WP-T2"), few(2), ex);
    EXPECT_EQ(p.text, golden("few_shot_2_word.txt"));
}

TEST(PromptGolden, OneShotWithReasoningWord) {
    const auto& f = fixture(Subtask::word);
    std::vector<Exemplar> ex{{f.train.find("WP-train-3"), "Adding \"er\" to \"short\" spells \"shorter\"."}};
    auto p = render_prompt(*f.test.find("WP-T1"), few(1, ReasoningSource::self_generated), ex);
    EXPECT_EQ(p.text, golden("few_shot_1_reason_word.txt"));
}

TEST(PromptGolden, ReasoningRequestSentence) {
    auto p = render_reasoning_request(*fixture(Subtask::sentence).train.find("SP-train-1"));
    EXPECT_EQ(p.text, golden("reasoning_request_sentence.txt"));
    EXPECT_EQ(p.template_version, "reasoning-request-v1");
}

TEST(PromptGolden, ReasoningRequestWord) {
    auto p = render_reasoning_request(*fixture(Subtask::word).train.find("WP-train-1"));
    EXPECT_EQ(p.text, golden("reasoning_request_word.txt"));
}

TEST(Prompt, Errors) {
    const auto& f = fixture(Subtask::sentence);
    const auto& target = *f.test.find("SP-T1");
    auto code = [](const std::function<void()>& fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Io;
    };
    std::vector<Exemplar> one{{f.train.find("SP-train-1"), {}}};
    EXPECT_EQ(code([&] { render_prompt(target, few(2), one); }), ErrorCode::ShotMismatch);
    EXPECT_EQ(code([&] { render_prompt(target, few(1, ReasoningSource::external_generated), one); }),
              ErrorCode::MissingReasoning);
    std::vector<Exemplar> wrong{{fixture(Subtask::word).train.find("WP-train-1"), {}}};
    EXPECT_EQ(code([&] { render_prompt(target, few(1), wrong); }), ErrorCode::SubtaskMismatch);
    EXPECT_EQ(code([&] { render_prompt(target, Strategy{StrategyKind::zero_direct, 1}, {}); }),
              ErrorCode::InvalidStrategy);
    EXPECT_EQ(code([&] { render_prompt(target, Strategy{StrategyKind::few_shot, 0}, {}); }),
              ErrorCode::InvalidStrategy);
    EXPECT_EQ(code([&] { render_reasoning_request(target); }), ErrorCode::MissingDistractor);
    EXPECT_EQ(code([] { format_choices({}); }), ErrorCode::EmptyChoices);
    EXPECT_EQ(code([] { fill_template("{missing}", {}); }), ErrorCode::TemplateError);
}

TEST(Prompt, FillTemplateIsSinglePass) {
    EXPECT_EQ(fill_template("Q: {question} {x}", {{"question", "{x}"}, {"x", "y"}}), "Q: {x} y");
    EXPECT_EQ(fill_template("{ not a slot } {Upper} {}", {}), "{ not a slot } {Upper} {}");
}

TEST(Prompt, Labels) {
    EXPECT_EQ(strategy_label({StrategyKind::zero_direct}), "Direct Prompt");
    EXPECT_EQ(strategy_label({StrategyKind::zero_definition}), "Definition Prompt");
    EXPECT_EQ(strategy_label(few(1, ReasoningSource::external_generated)), "1 Shot + SE + GPTR");
    EXPECT_EQ(strategy_label(few(3, ReasoningSource::self_generated)), "3 Shot + SE + Reason");
    EXPECT_EQ(strategy_label({StrategyKind::few_shot, 5, ExampleSource::dynamic_examples}), "5 Shot + DE");
    EXPECT_EQ(example_count_phrase(1), "one example");
    EXPECT_EQ(example_count_phrase(5), "five examples");
    EXPECT_EQ(example_count_phrase(12), "12 examples");
}

// Random puzzles through every strategy: no placeholder survives, every
// target choice appears exactly once after the target question, exemplars
// keep their order.
TEST(PromptProperty, RenderedPromptsAreWellFormed) {
    std::mt19937 rng(3);
    const std::regex leftover(R"(\{[a-z_]+\})");
    for (int iter = 0; iter < 200; ++iter) {
        const Subtask st = iter % 2 ? Subtask::word : Subtask::sentence;
        const auto& f = fixture(st);
        PuzzleInstance target = f.test.instances[rng() % f.test.instances.size()];
        target.id = "P" + std::to_string(iter);
        target.question = "Random question " + std::to_string(iter) + " {with braces}?";
        const std::size_t n_choices = 2 + rng() % 4;
        target.choices.clear();
        for (std::size_t c = 0; c < n_choices; ++c) target.choices.push_back("Pick-" + std::to_string(iter) + "-" + std::to_string(c));
        target.label = 0;

        const int kind = static_cast<int>(rng() % 3);
        Strategy s{static_cast<StrategyKind>(kind)};
        std::vector<Exemplar> ex;
        if (s.kind == StrategyKind::few_shot) {
            s.shots = 1 + static_cast<int>(rng() % 5);
            s.reasoning_source = static_cast<ReasoningSource>(rng() % 3);
            for (int k = 0; k < s.shots; ++k) {
                const auto* inst = &f.train.instances[rng() % f.train.instances.size()];
                std::optional<std::string> r;
                if (s.uses_reasoning()) r = "because " + inst->id;
                ex.push_back({inst, r});
            }
        }
        auto p = render_prompt(target, s, ex);

        EXPECT_FALSE(std::regex_search(p.text.substr(0, p.text.find(target.question)), leftover)) << p.text;
        const std::string tail = p.text.substr(p.text.rfind("Question: "));
        EXPECT_EQ(tail.rfind(target.question), 10u);
        for (std::size_t c = 0; c < target.choices.size(); ++c) {
            EXPECT_EQ(count_of(tail, target.choices[c]), 1u);
            EXPECT_EQ(count_of(tail, "Option " + std::to_string(c + 1) + ": "), 1u);
        }
        ASSERT_EQ(p.exemplar_ids.size(), ex.size());
        std::size_t last = 0;
        for (std::size_t k = 0; k < ex.size(); ++k) {
            EXPECT_EQ(p.exemplar_ids[k], ex[k].instance->id);
            const auto at = p.text.find("Example " + std::to_string(k + 1) + ":\n");
            ASSERT_NE(at, std::string::npos);
            EXPECT_GE(at, last);
            last = at;
        }
        EXPECT_FALSE(p.text.ends_with("\n"));
    }
}

TEST(Prompt, TemplateAssetsPresent) {
    for (const char* name : {"zero_direct_sentence", "zero_direct_word", "zero_definition_sentence",
                             "zero_definition_word", "few_shot_sentence", "few_shot_word", "few_shot_example",
                             "few_shot_example_reasoning", "reasoning_request_sentence", "reasoning_request_word"}) {
        EXPECT_FALSE(template_asset(name).empty()) << name;
    }
    EXPECT_THROW(template_asset("nope"), Error);
}
