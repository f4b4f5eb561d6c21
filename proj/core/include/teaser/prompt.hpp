#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "teaser/dataset.hpp"

namespace teaser {

enum class StrategyKind { zero_direct, zero_definition, few_shot };
enum class ExampleSource { static_examples, dynamic_examples };
enum class ReasoningSource { none, self_generated, external_generated };

std::string_view to_string(StrategyKind k) noexcept;
std::string_view to_string(ExampleSource s) noexcept;
std::string_view to_string(ReasoningSource r) noexcept;
std::optional<StrategyKind> parse_strategy_kind(std::string_view s) noexcept;
std::optional<ExampleSource> parse_example_source(std::string_view s) noexcept;
std::optional<ReasoningSource> parse_reasoning_source(std::string_view s) noexcept;

struct Strategy {
    StrategyKind kind = StrategyKind::zero_definition;
    int shots = 0;
    ExampleSource example_source = ExampleSource::static_examples;
    ReasoningSource reasoning_source = ReasoningSource::none;

    /// Throws InvalidStrategy when zero-shot kinds carry shots or reasoning,
    /// or few_shot has no shots.
    void validate() const;
    bool uses_reasoning() const { return reasoning_source != ReasoningSource::none; }

    bool operator==(const Strategy&) const = default;
};

/// Row label in the style of the result tables, e.g. "3 Shot + DE + Reason".
std::string strategy_label(const Strategy& s);

struct RenderedPrompt {
    std::string text;
    Strategy strategy;
    std::string target_id;
    std::vector<std::string> exemplar_ids;
    std::string template_version;
};

/// An in-context example and, for reasoning-augmented strategies, its
/// rationale.
struct Exemplar {
    const PuzzleInstance* instance = nullptr;
    std::optional<std::string> reasoning;
};

namespace template_version {
inline constexpr std::string_view direct = "direct-v1";
inline constexpr std::string_view definition = "definition-v1";
inline constexpr std::string_view few_shot = "fewshot-v1";
inline constexpr std::string_view reasoning_request = "reasoning-request-v1";
}  // namespace template_version

std::string_view template_version_for(StrategyKind kind) noexcept;

/// Raw template asset by file stem ("few_shot_word", ...). Throws
/// TemplateError for an unknown name.
std::string_view template_asset(std::string_view name);

/// Replaces every `{name}` with its value in one pass; substituted text is
/// never rescanned. Braces not enclosing an identifier are literal. Throws
/// TemplateError for a placeholder without a value.
std::string fill_template(std::string_view tpl, const std::map<std::string, std::string, std::less<>>& values);

/// "Option 1: ...\nOption 2: ..." Throws EmptyChoices.
std::string format_choices(std::span<const std::string> choices);

/// "one example", "two examples", ..., "ten examples", then digits.
std::string example_count_phrase(int n);

RenderedPrompt render_prompt(const PuzzleInstance& instance, const Strategy& strategy,
                             std::span<const Exemplar> exemplars);

/// Request asking a model to justify the gold option against the
/// distractors. Throws MissingDistractor.
RenderedPrompt render_reasoning_request(const PuzzleInstance& train_instance);

}  // namespace teaser
