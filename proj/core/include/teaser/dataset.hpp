#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace teaser {

enum class Subtask { sentence, word };
enum class Role { train, test };
enum class Variant { original, semantic, context };

std::string_view to_string(Subtask s) noexcept;
std::string_view to_string(Role r) noexcept;
std::string_view to_string(Variant v) noexcept;
std::optional<Subtask> parse_subtask(std::string_view s) noexcept;
std::optional<Role> parse_role(std::string_view s) noexcept;
std::optional<Variant> parse_variant(std::string_view s) noexcept;

/// One multiple-choice brain teaser. `label` is 0-based; prompts render it
/// 1-based.
struct PuzzleInstance {
    std::string id;
    Subtask subtask = Subtask::sentence;
    std::string question;
    std::vector<std::string> choices;
    int label = 0;
    Variant variant = Variant::original;
    std::string group_id;
    std::optional<std::vector<std::string>> distractors;
    /// Unknown fields from the source record, kept for round-tripping.
    nlohmann::json extra = nlohmann::json::object();

    const std::string& gold_choice() const { return choices.at(static_cast<std::size_t>(label)); }

    bool operator==(const PuzzleInstance&) const = default;
};

struct DatasetSplit {
    Subtask subtask = Subtask::sentence;
    Role role = Role::test;
    std::vector<PuzzleInstance> instances;

    /// Linear lookup; splits are a few hundred rows.
    const PuzzleInstance* find(std::string_view id) const;
};

struct Group {
    std::string group_id;
    std::map<Variant, std::string> by_variant;

    bool has(Variant v) const { return by_variant.count(v) != 0; }
    bool complete() const { return by_variant.size() == 3; }
};

struct LoadOptions {
    /// When a record has no group_id, derive it by stripping a trailing
    /// reconstruction suffix ("_SR" / "_CR") from the id.
    bool derive_group_from_id = false;
};

/// Collapse whitespace runs to one space and trim.
std::string normalize_whitespace(std::string_view text);

/// Group id implied by an upstream-style id ("SP-12_SR" -> "SP-12").
std::string group_id_from_instance_id(std::string_view id);

PuzzleInstance instance_from_json(const nlohmann::json& obj, const LoadOptions& options = {});
nlohmann::json instance_to_json(const PuzzleInstance& inst);

/// Throws MalformedRecord / LabelOutOfRange if the per-instance invariants
/// fail.
void validate_instance(const PuzzleInstance& inst);

DatasetSplit load_split(const std::filesystem::path& path, Subtask subtask, Role role,
                        const LoadOptions& options = {});

void save_split(const DatasetSplit& split, const std::filesystem::path& path);

/// One Group per distinct group_id, ascending by group_id.
std::vector<Group> derive_groups(const DatasetSplit& split);

}  // namespace teaser
