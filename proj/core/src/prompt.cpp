#include "teaser/prompt.hpp"

#include <array>
#include <cctype>

#include "teaser/error.hpp"
#include "template_assets.hpp"

namespace teaser {

std::string_view to_string(StrategyKind k) noexcept {
    switch (k) {
        case StrategyKind::zero_direct: return "zero_direct";
        case StrategyKind::zero_definition: return "zero_definition";
        case StrategyKind::few_shot: return "few_shot";
    }
    return "zero_direct";
}

std::string_view to_string(ExampleSource s) noexcept {
    return s == ExampleSource::static_examples ? "static" : "dynamic";
}

std::string_view to_string(ReasoningSource r) noexcept {
    switch (r) {
        case ReasoningSource::none: return "none";
        case ReasoningSource::self_generated: return "self_generated";
        case ReasoningSource::external_generated: return "external_generated";
    }
    return "none";
}

std::optional<StrategyKind> parse_strategy_kind(std::string_view s) noexcept {
    if (s == "zero_direct") return StrategyKind::zero_direct;
    if (s == "zero_definition") return StrategyKind::zero_definition;
    if (s == "few_shot") return StrategyKind::few_shot;
    return std::nullopt;
}

std::optional<ExampleSource> parse_example_source(std::string_view s) noexcept {
    if (s == "static") return ExampleSource::static_examples;
    if (s == "dynamic") return ExampleSource::dynamic_examples;
    return std::nullopt;
}

std::optional<ReasoningSource> parse_reasoning_source(std::string_view s) noexcept {
    if (s == "none") return ReasoningSource::none;
    if (s == "self_generated") return ReasoningSource::self_generated;
    if (s == "external_generated") return ReasoningSource::external_generated;
    return std::nullopt;
}

void Strategy::validate() const {
    if (kind == StrategyKind::few_shot) {
        if (shots < 1) throw Error(ErrorCode::InvalidStrategy, "few_shot needs shots >= 1");
        return;
    }
    if (shots != 0) throw Error(ErrorCode::InvalidStrategy, "zero-shot strategies take no exemplars");
    if (reasoning_source != ReasoningSource::none) {
        throw Error(ErrorCode::InvalidStrategy, "zero-shot strategies take no reasoning");
    }
}

std::string strategy_label(const Strategy& s) {
    switch (s.kind) {
        case StrategyKind::zero_direct: return "Direct Prompt";
        case StrategyKind::zero_definition: return "Definition Prompt";
        case StrategyKind::few_shot: break;
    }
    std::string label = std::to_string(s.shots) + " Shot + ";
    label += s.example_source == ExampleSource::static_examples ? "SE" : "DE";
    if (s.reasoning_source == ReasoningSource::self_generated) label += " + Reason";
    if (s.reasoning_source == ReasoningSource::external_generated) label += " + GPTR";
    return label;
}

std::string_view template_version_for(StrategyKind kind) noexcept {
    switch (kind) {
        case StrategyKind::zero_direct: return template_version::direct;
        case StrategyKind::zero_definition: return template_version::definition;
        case StrategyKind::few_shot: return template_version::few_shot;
    }
    return template_version::definition;
}

std::string_view template_asset(std::string_view name) {
    for (const auto& asset : detail::kTemplateAssets) {
        if (asset.name == name) return asset.text;
    }
    throw Error(ErrorCode::TemplateError, "no template asset named " + std::string(name));
}

std::string fill_template(std::string_view tpl, const std::map<std::string, std::string, std::less<>>& values) {
    std::string out;
    out.reserve(tpl.size() * 2);
    std::size_t i = 0;
    while (i < tpl.size()) {
        if (tpl[i] == '{') {
            std::size_t j = i + 1;
            while (j < tpl.size() && (std::islower(static_cast<unsigned char>(tpl[j])) || tpl[j] == '_')) ++j;
            if (j < tpl.size() && tpl[j] == '}' && j > i + 1) {
                std::string_view name = tpl.substr(i + 1, j - i - 1);
                auto it = values.find(name);
                if (it == values.end()) {
                    throw Error(ErrorCode::TemplateError, "no value for placeholder {" + std::string(name) + "}");
                }
                out += it->second;
                i = j + 1;
                continue;
            }
        }
        out.push_back(tpl[i]);
        ++i;
    }
    return out;
}

std::string format_choices(std::span<const std::string> choices) {
    if (choices.empty()) throw Error(ErrorCode::EmptyChoices, "nothing to format");
    std::string out;
    for (std::size_t i = 0; i < choices.size(); ++i) {
        if (i) out.push_back('\n');
        out += "Option " + std::to_string(i + 1) + ": " + choices[i];
    }
    return out;
}

std::string example_count_phrase(int n) {
    static constexpr std::array<std::string_view, 11> kWords = {
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"};
    std::string count = (n >= 0 && n <= 10) ? std::string(kWords[static_cast<std::size_t>(n)]) : std::to_string(n);
    return count + (n == 1 ? " example" : " examples");
}

namespace {

std::string asset_name(std::string_view stem, Subtask subtask) {
    return std::string(stem) + "_" + std::string(to_string(subtask));
}

}  // namespace

RenderedPrompt render_prompt(const PuzzleInstance& instance, const Strategy& strategy,
                             std::span<const Exemplar> exemplars) {
    strategy.validate();
    if (exemplars.size() != static_cast<std::size_t>(strategy.shots)) {
        throw Error(ErrorCode::ShotMismatch, "strategy wants " + std::to_string(strategy.shots) + " exemplars, got " +
                                                 std::to_string(exemplars.size()));
    }

    RenderedPrompt prompt;
    prompt.strategy = strategy;
    prompt.target_id = instance.id;
    prompt.template_version = std::string(template_version_for(strategy.kind));

    std::map<std::string, std::string, std::less<>> values{
        {"question", instance.question},
        {"choices", format_choices(instance.choices)},
    };

    if (strategy.kind != StrategyKind::few_shot) {
        const char* stem = strategy.kind == StrategyKind::zero_direct ? "zero_direct" : "zero_definition";
        prompt.text = fill_template(template_asset(asset_name(stem, instance.subtask)), values);
        return prompt;
    }

    const std::string_view example_tpl = template_asset(strategy.uses_reasoning() ? "few_shot_example_reasoning"
                                                                                  : "few_shot_example");
    std::string blocks;
    for (std::size_t i = 0; i < exemplars.size(); ++i) {
        const Exemplar& ex = exemplars[i];
        if (ex.instance == nullptr) throw Error(ErrorCode::ShotMismatch, "null exemplar");
        if (ex.instance->subtask != instance.subtask) {
            throw Error(ErrorCode::SubtaskMismatch, "exemplar " + ex.instance->id + " is a " +
                                                        std::string(to_string(ex.instance->subtask)) + " puzzle");
        }
        if (strategy.uses_reasoning() && (!ex.reasoning || ex.reasoning->empty())) {
            throw Error(ErrorCode::MissingReasoning, "exemplar " + ex.instance->id);
        }
        if (!strategy.uses_reasoning() && ex.reasoning) {
            throw Error(ErrorCode::InvalidStrategy, "reasoning supplied for a strategy without reasoning");
        }
        std::map<std::string, std::string, std::less<>> ex_values{
            {"index", std::to_string(i + 1)},
            {"question", ex.instance->question},
            {"choices", format_choices(ex.instance->choices)},
            {"correct_option", std::to_string(ex.instance->label + 1)},
        };
        if (ex.reasoning) ex_values.emplace("reasoning", *ex.reasoning);
        if (i) blocks.push_back('\n');
        blocks += fill_template(example_tpl, ex_values);
        prompt.exemplar_ids.push_back(ex.instance->id);
    }
    values.emplace("example_count", example_count_phrase(strategy.shots));
    values.emplace("examples", std::move(blocks));
    prompt.text = fill_template(template_asset(asset_name("few_shot", instance.subtask)), values);
    return prompt;
}

RenderedPrompt render_reasoning_request(const PuzzleInstance& train_instance) {
    if (!train_instance.distractors || train_instance.distractors->empty()) {
        throw Error(ErrorCode::MissingDistractor, train_instance.id);
    }
    std::string distractors;
    for (const auto& d : *train_instance.distractors) {
        if (!distractors.empty()) distractors += "; ";
        distractors += d;
    }
    std::map<std::string, std::string, std::less<>> values{
        {"question", train_instance.question},
        {"choices", format_choices(train_instance.choices)},
        {"option_number", std::to_string(train_instance.label + 1)},
        {"correct_text", train_instance.gold_choice()},
        {"distractors", distractors},
    };
    RenderedPrompt prompt;
    prompt.text = fill_template(template_asset(asset_name("reasoning_request", train_instance.subtask)), values);
    prompt.target_id = train_instance.id;
    prompt.template_version = std::string(template_version::reasoning_request);
    return prompt;
}

}  // namespace teaser
