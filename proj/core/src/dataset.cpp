#include "teaser/dataset.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "teaser/error.hpp"
#include "teaser/jsonl.hpp"

namespace teaser {

namespace {

constexpr std::array kKnownFields = {"id",      "subtask",  "question", "choices", "label",
                                     "variant", "group_id", "distractors"};

bool is_known_field(const std::string& key) {
    return std::find(kKnownFields.begin(), kKnownFields.end(), key) != kKnownFields.end();
}

std::string require_string(const nlohmann::json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        throw Error(ErrorCode::MalformedRecord, std::string("field '") + key + "' missing or not a string");
    }
    return it->get<std::string>();
}

std::vector<std::string> string_list(const nlohmann::json& value, const char* key) {
    if (!value.is_array()) {
        throw Error(ErrorCode::MalformedRecord, std::string("field '") + key + "' is not a list");
    }
    std::vector<std::string> out;
    for (const auto& v : value) {
        if (!v.is_string()) {
            throw Error(ErrorCode::MalformedRecord, std::string("field '") + key + "' holds a non-string");
        }
        out.push_back(v.get<std::string>());
    }
    return out;
}

}  // namespace

std::string_view to_string(Subtask s) noexcept { return s == Subtask::sentence ? "sentence" : "word"; }

std::string_view to_string(Role r) noexcept { return r == Role::train ? "train" : "test"; }

std::string_view to_string(Variant v) noexcept {
    switch (v) {
        case Variant::original: return "original";
        case Variant::semantic: return "semantic";
        case Variant::context: return "context";
    }
    return "original";
}

std::optional<Subtask> parse_subtask(std::string_view s) noexcept {
    if (s == "sentence") return Subtask::sentence;
    if (s == "word") return Subtask::word;
    return std::nullopt;
}

std::optional<Role> parse_role(std::string_view s) noexcept {
    if (s == "train") return Role::train;
    if (s == "test") return Role::test;
    return std::nullopt;
}

std::optional<Variant> parse_variant(std::string_view s) noexcept {
    if (s == "original") return Variant::original;
    if (s == "semantic") return Variant::semantic;
    if (s == "context") return Variant::context;
    return std::nullopt;
}

const PuzzleInstance* DatasetSplit::find(std::string_view id) const {
    for (const auto& inst : instances) {
        if (inst.id == id) return &inst;
    }
    return nullptr;
}

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

std::string group_id_from_instance_id(std::string_view id) {
    for (std::string_view suffix : {"_SR", "_CR"}) {
        if (id.size() > suffix.size() && id.substr(id.size() - suffix.size()) == suffix) {
            return std::string(id.substr(0, id.size() - suffix.size()));
        }
    }
    return std::string(id);
}

PuzzleInstance instance_from_json(const nlohmann::json& obj, const LoadOptions& options) {
    PuzzleInstance inst;
    inst.id = require_string(obj, "id");
    if (inst.id.empty()) throw Error(ErrorCode::MalformedRecord, "empty id");

    auto subtask = parse_subtask(require_string(obj, "subtask"));
    if (!subtask) throw Error(ErrorCode::MalformedRecord, "unknown subtask in " + inst.id);
    inst.subtask = *subtask;

    inst.question = require_string(obj, "question");

    auto choices = obj.find("choices");
    if (choices == obj.end()) throw Error(ErrorCode::MalformedRecord, "missing choices in " + inst.id);
    inst.choices = string_list(*choices, "choices");

    auto label = obj.find("label");
    if (label == obj.end() || !label->is_number_integer()) {
        throw Error(ErrorCode::MalformedRecord, "label missing or not an integer in " + inst.id);
    }
    inst.label = label->get<int>();

    auto variant = parse_variant(require_string(obj, "variant"));
    if (!variant) throw Error(ErrorCode::MalformedRecord, "unknown variant in " + inst.id);
    inst.variant = *variant;

    auto group = obj.find("group_id");
    if (group != obj.end() && !group->is_null()) {
        if (!group->is_string()) throw Error(ErrorCode::MalformedRecord, "group_id not a string in " + inst.id);
        inst.group_id = group->get<std::string>();
    } else if (options.derive_group_from_id) {
        inst.group_id = group_id_from_instance_id(inst.id);
    } else {
        throw Error(ErrorCode::MalformedRecord, "missing group_id in " + inst.id);
    }

    auto distractors = obj.find("distractors");
    if (distractors != obj.end() && !distractors->is_null()) {
        inst.distractors = string_list(*distractors, "distractors");
    }

    for (const auto& [key, value] : obj.items()) {
        if (!is_known_field(key)) inst.extra[key] = value;
    }
    return inst;
}

nlohmann::json instance_to_json(const PuzzleInstance& inst) {
    nlohmann::json obj = nlohmann::json::object();
    obj["id"] = inst.id;
    obj["subtask"] = to_string(inst.subtask);
    obj["question"] = inst.question;
    obj["choices"] = inst.choices;
    obj["label"] = inst.label;
    obj["variant"] = to_string(inst.variant);
    obj["group_id"] = inst.group_id;
    if (inst.distractors) obj["distractors"] = *inst.distractors;
    for (const auto& [key, value] : inst.extra.items()) obj[key] = value;
    return obj;
}

void validate_instance(const PuzzleInstance& inst) {
    if (inst.choices.size() < 2) {
        throw Error(ErrorCode::MalformedRecord, "fewer than 2 choices in " + inst.id);
    }
    if (inst.label < 0 || static_cast<std::size_t>(inst.label) >= inst.choices.size()) {
        throw Error(ErrorCode::LabelOutOfRange, inst.id);
    }
    std::set<std::string> seen;
    for (const auto& c : inst.choices) {
        if (!seen.insert(normalize_whitespace(c)).second) {
            throw Error(ErrorCode::MalformedRecord, "duplicate choice '" + c + "' in " + inst.id);
        }
    }
    if (inst.distractors) {
        const std::string gold = normalize_whitespace(inst.gold_choice());
        for (const auto& d : *inst.distractors) {
            const std::string norm = normalize_whitespace(d);
            if (!seen.count(norm)) {
                throw Error(ErrorCode::MalformedRecord, "distractor '" + d + "' is not a choice in " + inst.id);
            }
            if (norm == gold) {
                throw Error(ErrorCode::MalformedRecord, "distractor equals the gold choice in " + inst.id);
            }
        }
    }
}

DatasetSplit load_split(const std::filesystem::path& path, Subtask subtask, Role role,
                        const LoadOptions& options) {
    DatasetSplit split;
    split.subtask = subtask;
    split.role = role;

    std::unordered_set<std::string> ids;
    std::unordered_map<std::string, std::set<Variant>> variants_by_group;

    jsonl::for_each(path, [&](std::size_t line_no, const nlohmann::json& obj) {
        PuzzleInstance inst;
        try {
            inst = instance_from_json(obj, options);
        } catch (const Error& e) {
            throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.message());
        }
        if (inst.subtask != subtask) {
            throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": subtask '" +
                                                        std::string(to_string(inst.subtask)) + "' in a " +
                                                        std::string(to_string(subtask)) + " split");
        }
        try {
            validate_instance(inst);
        } catch (const Error& e) {
            throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.message());
        }
        if (!ids.insert(inst.id).second) throw Error(ErrorCode::DuplicateId, inst.id);
        if (!variants_by_group[inst.group_id].insert(inst.variant).second) {
            throw Error(ErrorCode::VariantConflict, inst.group_id);
        }
        split.instances.push_back(std::move(inst));
    });
    return split;
}

void save_split(const DatasetSplit& split, const std::filesystem::path& path) {
    std::vector<nlohmann::json> rows;
    rows.reserve(split.instances.size());
    for (const auto& inst : split.instances) rows.push_back(instance_to_json(inst));
    jsonl::write_all(path, rows);
}

std::vector<Group> derive_groups(const DatasetSplit& split) {
    std::map<std::string, Group> groups;
    for (const auto& inst : split.instances) {
        Group& g = groups[inst.group_id];
        g.group_id = inst.group_id;
        if (!g.by_variant.emplace(inst.variant, inst.id).second) {
            throw Error(ErrorCode::VariantConflict, inst.group_id);
        }
    }
    std::vector<Group> out;
    out.reserve(groups.size());
    for (auto& [_, g] : groups) out.push_back(std::move(g));
    return out;
}

}  // namespace teaser
