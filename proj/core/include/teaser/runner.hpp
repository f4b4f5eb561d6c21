#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "teaser/adjudicator.hpp"
#include "teaser/dataset.hpp"
#include "teaser/embedding.hpp"
#include "teaser/experiment.hpp"
#include "teaser/provider.hpp"
#include "teaser/reasoning.hpp"

namespace teaser {

struct RunInputs {
    const DatasetSplit* train = nullptr;
    const DatasetSplit* test = nullptr;
    const EmbeddingStore* train_embeddings = nullptr;
    const EmbeddingStore* test_embeddings = nullptr;
    const ReasoningStore* reasoning = nullptr;
    /// Free-form provenance copied into the manifest (paths, digests).
    nlohmann::json provenance = nlohmann::json::object();
};

struct RunOptions {
    std::filesystem::path runs_root = "runs";
    std::size_t workers = 4;
    /// Stop after this many newly completed instances (simulated
    /// interruption; resume by running again).
    std::optional<std::size_t> limit;
};

struct RunResult {
    std::string run_id;
    RunSpec spec;
    std::vector<Prediction> predictions;  // test split order
    std::optional<MetricsReport> metrics;  // set once every instance is done
    nlohmann::json manifest;
    std::filesystem::path run_dir;
    std::size_t new_instances = 0;
    std::size_t resumed_instances = 0;
    std::size_t failed_instances = 0;

    bool complete() const { return metrics.has_value(); }
};

/// Exemplar ids for every test instance, in prompt order.
std::map<std::string, std::vector<std::string>> select_exemplars(const RunSpec& spec, const RunInputs& inputs);

/// One prompt per test instance, test split order. Pure: no provider
/// calls, no files. Throws MissingStore, NotFound, UnknownExemplarId.
std::vector<RenderedPrompt> render_run_prompts(const RunSpec& spec, const RunInputs& inputs);

/// Selects exemplars, renders, generates, extracts and scores each test
/// instance, checkpointing to <runs_root>/<run_id>/checkpoint.jsonl so an
/// interrupted run picks up where it stopped. Missing reasoning fails
/// before any provider call.
RunResult execute_run(const RunSpec& spec, const RunInputs& inputs, ProviderGateway& gateway,
                      const RunOptions& options = {});

/// Reads a finished run directory back (predictions, metrics, manifest).
RunResult load_run_result(const std::filesystem::path& run_dir);

}  // namespace teaser
