#include "teaser/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "teaser/error.hpp"

namespace teaser::jsonl {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void for_each(const fs::path& path, const std::function<void(std::size_t, const nlohmann::json&)>& fn,
              bool tolerate_torn_tail) {
    const std::string content = read_file(path);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t end = content.find('\n', pos);
        const bool last = end == std::string::npos;
        if (last) end = content.size();
        std::string_view line(content.data() + pos, end - pos);
        ++line_no;
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            if (last && tolerate_torn_tail) return;
            throw Error(ErrorCode::MalformedRecord,
                        path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!obj.is_object()) {
            throw Error(ErrorCode::MalformedRecord,
                        path.string() + ":" + std::to_string(line_no) + ": expected a JSON object");
        }
        fn(line_no, obj);
    }
}

std::vector<nlohmann::json> read_all(const fs::path& path) {
    std::vector<nlohmann::json> rows;
    for_each(path, [&](std::size_t, const nlohmann::json& obj) { rows.push_back(obj); });
    return rows;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        out << content;
        if (!out) throw Error(ErrorCode::Io, "short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_all(const fs::path& path, const std::vector<nlohmann::json>& rows) {
    std::string content;
    for (const auto& row : rows) {
        content += row.dump();
        content += '\n';
    }
    write_file_atomic(path, content);
}

}  // namespace teaser::jsonl
