#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "teaser/dataset.hpp"
#include "teaser/embedding.hpp"
#include "teaser/prompt.hpp"
#include "teaser/provider.hpp"

namespace teaser {

/// Which text of a question gets embedded for dynamic selection.
enum class EmbedText { question, question_choices };

/// (id, text) pairs to embed for every instance of `split`. With
/// question_choices the choices follow the question, one per line.
std::vector<IdText> embedding_inputs(const DatasetSplit& split, EmbedText what);

struct SubtaskData {
    std::filesystem::path train;
    std::filesystem::path test;
    std::filesystem::path train_embeddings;
    std::filesystem::path test_embeddings;
    std::vector<std::string> static_exemplars;
};

/// Parsed experiment file. The format is line-oriented:
///
///     # comment
///     subtasks = sentence, word
///     kinds = few_shot
///     shots = 1, 3, 5
///     train.word = data/word_train.jsonl
///
/// Relative paths resolve against the file's directory.
struct ExperimentConfig {
    std::string name = "experiment";
    std::vector<Subtask> subtasks;
    std::vector<StrategyKind> kinds;
    std::vector<int> shots;
    std::vector<ExampleSource> example_sources = {ExampleSource::static_examples};
    std::vector<ReasoningSource> reasoning_sources = {ReasoningSource::none};
    std::string self_generator_tag;
    std::string external_generator_tag;
    std::string provider = "mock";
    GenerationParams params;
    ExemplarOrder order_in_prompt = ExemplarOrder::most_similar_first;
    EmbedText embed_text = EmbedText::question;
    bool reask_unparseable = false;
    bool derive_group_from_id = false;
    std::size_t workers = 4;
    std::filesystem::path reasoning_store;
    std::map<Subtask, SubtaskData> data;

    /// The key/value text this config parses from, keys sorted.
    std::string to_text() const;
    const SubtaskData& data_for(Subtask s) const;
    LoadOptions load_options() const { return LoadOptions{derive_group_from_id}; }
};

/// Throws InvalidConfig with the offending line.
ExperimentConfig parse_experiment_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// One fully specified evaluation run.
struct RunSpec {
    Subtask subtask = Subtask::sentence;
    Strategy strategy;
    std::optional<std::vector<std::string>> static_exemplar_ids;
    std::optional<RetrievalConfig> retrieval;
    std::optional<std::string> generator_tag;
    GenerationParams params;
    std::string provider;
    bool reask_unparseable = false;
    std::string template_version;
    std::string run_id;

    /// Every field except run_id, canonically ordered.
    nlohmann::json identity_json() const;
    nlohmann::json to_json() const;
    static RunSpec from_json(const nlohmann::json& j);
    std::string label() const { return strategy_label(strategy); }

    /// Checks the static/dynamic/zero-shot field combination.
    void validate() const;
};

/// 16 hex digits of SHA-256 over identity_json().
std::string derive_run_id(const RunSpec& spec);

/// Cartesian product of the declared axes, duplicates collapsed by run_id,
/// in declaration order. Loads train splits to default and check static
/// exemplars. Throws InvalidConfig, UnknownExemplarId.
std::vector<RunSpec> plan_experiments(const ExperimentConfig& config);

}  // namespace teaser
