#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "teaser/dataset.hpp"
#include "teaser/provider.hpp"

namespace teaser {

enum class ReasoningStatus { ok, failed };

struct ReasoningRecord {
    std::string instance_id;
    std::string generator_tag;
    std::string reasoning_text;
    ReasoningStatus status = ReasoningStatus::ok;
    std::string created_at;
    /// Why generation failed; empty for ok records.
    std::string error;

    nlohmann::json to_json() const;
    static ReasoningRecord from_json(const nlohmann::json& j);

    bool operator==(const ReasoningRecord&) const = default;
};

/// Rationales keyed by (instance_id, generator_tag). An ok record is never
/// replaced by a failed one. Optionally backed by an append-only JSON-Lines
/// file so interrupted generation passes can resume.
class ReasoningStore {
public:
    using Key = std::pair<std::string, std::string>;

    ReasoningStore() = default;

    /// Loads `path` if it exists; later put() calls append to it.
    static ReasoningStore open(const std::filesystem::path& path);
    static ReasoningStore load(const std::filesystem::path& path);

    /// Inserts or updates. Returns false when an ok record already holds the
    /// key and `record` would overwrite it with a failure.
    bool put(ReasoningRecord record);

    const ReasoningRecord* find(std::string_view instance_id, std::string_view generator_tag) const;
    bool has_ok(std::string_view instance_id, std::string_view generator_tag) const;

    const std::map<Key, ReasoningRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    /// Writes the compacted store, ascending key order.
    void save(const std::filesystem::path& path) const;

private:
    std::map<Key, ReasoningRecord> records_;
    std::optional<std::filesystem::path> log_path_;
};

/// Text of the ok record for the key. Throws NotFound, with a message that
/// says whether the key was never generated or its generation failed.
const std::string& get_reasoning(const ReasoningStore& store, std::string_view instance_id,
                                 std::string_view generator_tag);

struct ReasoningBuildOptions {
    std::size_t max_length = 4000;
    std::size_t workers = 4;
    GenerationParams params;
};

struct ReasoningBuildStats {
    std::size_t attempted = 0;
    std::size_t skipped = 0;
    std::size_t ok = 0;
    std::size_t failed = 0;
};

/// One generation attempt per train instance lacking an ok record. Per-item
/// failures become failed records; only AuthMissing aborts the pass.
ReasoningBuildStats build_reasoning_store(const DatasetSplit& split, ProviderGateway& gateway,
                                          const std::string& generator_tag, ReasoningStore& store,
                                          const ReasoningBuildOptions& options = {});

/// Bulk import of externally produced rationales: JSON-Lines with
/// instance_id and reasoning_text; generator_tag is forced to `generator_tag`.
std::size_t import_reasoning(const std::filesystem::path& file, const std::string& generator_tag,
                             ReasoningStore& store);

/// Throws NotFound naming the first id without an ok record.
void require_reasoning(const ReasoningStore& store, std::span<const std::string> instance_ids,
                       std::string_view generator_tag);

}  // namespace teaser
