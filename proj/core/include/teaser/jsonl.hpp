#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace teaser::jsonl {

/// Calls `fn(line_number, object)` for every non-blank line. Line numbers are
/// 1-based. A line that is not valid JSON throws MalformedRecord, unless it is
/// the final line and `tolerate_torn_tail` is set (an append-only log cut off
/// mid-write).
void for_each(const std::filesystem::path& path,
              const std::function<void(std::size_t, const nlohmann::json&)>& fn,
              bool tolerate_torn_tail = false);

std::vector<nlohmann::json> read_all(const std::filesystem::path& path);

/// Writes one compact object per line, replacing the file atomically.
void write_all(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);

/// Writes `content` to `path` through a sibling temp file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace teaser::jsonl
