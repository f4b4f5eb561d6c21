#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "teaser/adjudicator.hpp"
#include "teaser/runner.hpp"

namespace teaser {

/// "Strategy,Ori,Sem,Con,Ori & Sem,Ori & Sem & Con,Overall"
std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& strategy, const MetricsReport& m);

/// Per subtask: table_<subtask>.csv, table_<subtask>.md and the long-format
/// plot_<subtask>.csv (strategy, shots, column, value). Incomplete results
/// are skipped. Returns the files written. Throws EmptyResults.
std::vector<std::filesystem::path> emit_report(std::span<const RunResult> results,
                                               const std::filesystem::path& out_dir);

}  // namespace teaser
