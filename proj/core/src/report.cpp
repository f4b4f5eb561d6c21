#include "teaser/report.hpp"

#include <map>
#include <sstream>

#include "teaser/error.hpp"
#include "teaser/jsonl.hpp"

namespace teaser {

namespace fs = std::filesystem;

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    return out + "\"";
}

/// Strategy family without the shot count, so a plot can draw one line per
/// family across shots.
std::string family_label(const Strategy& s) {
    if (s.kind != StrategyKind::few_shot) return strategy_label(s);
    std::string label = s.example_source == ExampleSource::static_examples ? "SE" : "DE";
    if (s.reasoning_source == ReasoningSource::self_generated) label += " + Reason";
    if (s.reasoning_source == ReasoningSource::external_generated) label += " + GPTR";
    return label;
}

}  // namespace

std::string metrics_csv_header() {
    std::string out = "Strategy";
    for (auto col : kMetricColumns) out += "," + std::string(col);
    return out;
}

std::string metrics_csv_row(const std::string& strategy, const MetricsReport& m) {
    std::string out = csv_field(strategy);
    for (const auto& v : m.row3()) out += "," + v;
    return out;
}

std::vector<fs::path> emit_report(std::span<const RunResult> results, const fs::path& out_dir) {
    std::map<Subtask, std::vector<const RunResult*>> by_subtask;
    for (const auto& r : results) {
        if (r.complete()) by_subtask[r.spec.subtask].push_back(&r);
    }
    if (by_subtask.empty()) throw Error(ErrorCode::EmptyResults, "no completed runs to report");

    std::vector<fs::path> written;
    for (const auto& [subtask, rows] : by_subtask) {
        const std::string name(to_string(subtask));
        std::string csv = metrics_csv_header() + "\n";
        std::ostringstream md;
        md << "| Strategy |";
        for (auto col : kMetricColumns) md << ' ' << col << " |";
        md << "\n|---|---|---|---|---|---|---|\n";
        std::string plot = "strategy,shots,column,value\n";
        bool has_direct = false;
        std::vector<std::string> unparsed_notes;

        for (const RunResult* r : rows) {
            const std::string label = r->spec.label();
            const auto values = r->metrics->row3();
            csv += metrics_csv_row(label, *r->metrics) + "\n";

            const bool direct = r->spec.strategy.kind == StrategyKind::zero_direct;
            has_direct = has_direct || direct;
            md << "| " << label << (direct ? " †" : "") << " |";
            for (const auto& v : values) md << ' ' << v << " |";
            md << '\n';

            const std::string family = csv_field(family_label(r->spec.strategy));
            for (std::size_t c = 0; c < values.size(); ++c) {
                plot += family + "," + std::to_string(r->spec.strategy.shots) + "," +
                        csv_field(std::string(kMetricColumns[c])) + "," + values[c] + "\n";
            }
            if (r->metrics->unparsed_count > 0) {
                unparsed_notes.push_back(label + ": " + std::to_string(r->metrics->unparsed_count) + " of " +
                                         std::to_string(r->metrics->instances));
            }
        }
        if (has_direct) {
            md << "\n† Direct Prompt uses template " << template_version::direct
               << ", reconstructed as the definition prompt without its definition sentence.\n";
        }
        if (!unparsed_notes.empty()) {
            md << "\nUnparsed completions (scored incorrect):\n";
            for (const auto& n : unparsed_notes) md << "- " << n << '\n';
        }

        const fs::path csv_path = out_dir / ("table_" + name + ".csv");
        const fs::path md_path = out_dir / ("table_" + name + ".md");
        const fs::path plot_path = out_dir / ("plot_" + name + ".csv");
        jsonl::write_file_atomic(csv_path, csv);
        jsonl::write_file_atomic(md_path, md.str());
        jsonl::write_file_atomic(plot_path, plot);
        written.insert(written.end(), {csv_path, md_path, plot_path});
    }
    return written;
}

}  // namespace teaser
