#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "teaser/dataset.hpp"

namespace teaser {

enum class ParseStatus { parsed, ambiguous, out_of_range, unparseable };

std::string_view to_string(ParseStatus s) noexcept;
std::optional<ParseStatus> parse_parse_status(std::string_view s) noexcept;

struct Prediction {
    std::string instance_id;
    std::optional<int> predicted;  // 1-based
    std::string raw_text;
    ParseStatus parse_status = ParseStatus::unparseable;

    bool operator==(const Prediction&) const = default;
};

/// Maps a raw completion to a 1-based option number. Rules, first match
/// wins:
///   1. "Option k" mentions (case-insensitive, "Option: k" and "Option #k"
///      included) that all name the same k;
///   2. the whole trimmed text is a bare number;
///   3. exactly one choice text occurs in the completion, ignoring case and
///      punctuation, where a choice contained in a longer matching choice
///      does not count.
/// Conflicting mentions are ambiguous; numbers outside 1..n are
/// out_of_range. Never throws for any text.
Prediction extract_choice(std::string_view raw_text, std::span<const std::string> choices);

/// Exact ratio. An empty denominator renders as 0.
struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 0;

    double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }
    /// Three decimals, exact ties to even, integer arithmetic throughout.
    std::string render3() const;

    bool operator==(const Fraction&) const = default;
};

struct MetricsReport {
    Fraction ori, sem, con, ori_sem, ori_sem_con, overall;
    std::size_t instances = 0;
    std::size_t groups = 0;
    /// Groups left out of a group column for lacking a required variant.
    std::size_t ori_sem_excluded = 0;
    std::size_t ori_sem_con_excluded = 0;
    std::size_t unparsed_count = 0;

    nlohmann::json to_json() const;
    /// Six metric values in table order, 3-decimal strings.
    std::vector<std::string> row3() const;

    bool operator==(const MetricsReport&) const = default;
};

inline constexpr std::string_view kMetricColumns[] = {"Ori", "Sem", "Con", "Ori & Sem", "Ori & Sem & Con", "Overall"};

/// Scores one prediction per instance. Unparsed predictions count as wrong.
/// Throws MissingPrediction, UnknownInstance, DuplicateId.
MetricsReport score_run(std::span<const Prediction> predictions, const DatasetSplit& split,
                        std::span<const Group> groups);

nlohmann::json prediction_to_json(const Prediction& p);
Prediction prediction_from_json(const nlohmann::json& j);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

}  // namespace teaser
