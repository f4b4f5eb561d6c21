#include "teaser/adjudicator.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <unordered_map>

#include "teaser/error.hpp"
#include "teaser/jsonl.hpp"

namespace teaser {

namespace {

// Lowercase, punctuation to spaces, whitespace collapsed, padded with one
// space on each side so substring tests respect word boundaries.
std::string match_form(std::string_view text) {
    std::string out = " ";
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            out.push_back(static_cast<char>(std::tolower(c)));
        } else if (out.back() != ' ') {
            out.push_back(' ');
        }
    }
    if (out.back() != ' ') out.push_back(' ');
    return out;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

Prediction classify_number(Prediction p, long long k, std::size_t n_choices) {
    if (k >= 1 && static_cast<std::size_t>(k) <= n_choices) {
        p.predicted = static_cast<int>(k);
        p.parse_status = ParseStatus::parsed;
    } else {
        p.parse_status = ParseStatus::out_of_range;
    }
    return p;
}

}  // namespace

std::string_view to_string(ParseStatus s) noexcept {
    switch (s) {
        case ParseStatus::parsed: return "parsed";
        case ParseStatus::ambiguous: return "ambiguous";
        case ParseStatus::out_of_range: return "out_of_range";
        case ParseStatus::unparseable: return "unparseable";
    }
    return "unparseable";
}

std::optional<ParseStatus> parse_parse_status(std::string_view s) noexcept {
    for (auto st : {ParseStatus::parsed, ParseStatus::ambiguous, ParseStatus::out_of_range, ParseStatus::unparseable}) {
        if (to_string(st) == s) return st;
    }
    return std::nullopt;
}

Prediction extract_choice(std::string_view raw_text, std::span<const std::string> choices) {
    Prediction p;
    p.raw_text = std::string(raw_text);
    p.parse_status = ParseStatus::unparseable;
    if (choices.empty()) return p;

    // Rule 1.
    static const std::regex kOption(R"(\boption\s*[:#]?\s*(\d{1,9})\b)", std::regex::icase);
    std::set<long long> mentioned;
    for (auto it = std::sregex_iterator(p.raw_text.begin(), p.raw_text.end(), kOption); it != std::sregex_iterator();
         ++it) {
        mentioned.insert(std::stoll((*it)[1].str()));
    }
    if (mentioned.size() > 1) {
        p.parse_status = ParseStatus::ambiguous;
        return p;
    }
    if (mentioned.size() == 1) return classify_number(std::move(p), *mentioned.begin(), choices.size());

    // Rule 2.
    std::string_view bare = trim(raw_text);
    if (!bare.empty() && bare.back() == '.') bare.remove_suffix(1);
    if (!bare.empty() && bare.size() <= 9 &&
        std::all_of(bare.begin(), bare.end(), [](unsigned char c) { return std::isdigit(c); })) {
        return classify_number(std::move(p), std::stoll(std::string(bare)), choices.size());
    }

    // Rule 3.
    const std::string text = match_form(raw_text);
    std::vector<std::size_t> hits;
    std::vector<std::string> forms;
    for (std::size_t i = 0; i < choices.size(); ++i) {
        std::string form = match_form(choices[i]);
        if (form.size() > 2 && text.find(form) != std::string::npos) hits.push_back(i);
        forms.push_back(std::move(form));
    }
    std::vector<std::size_t> maximal;
    for (std::size_t i : hits) {
        const bool shadowed = std::any_of(hits.begin(), hits.end(), [&](std::size_t j) {
            return j != i && forms[j].size() > forms[i].size() && forms[j].find(forms[i]) != std::string::npos;
        });
        if (!shadowed) maximal.push_back(i);
    }
    if (maximal.size() == 1) {
        p.predicted = static_cast<int>(maximal.front() + 1);
        p.parse_status = ParseStatus::parsed;
    } else if (maximal.size() > 1) {
        p.parse_status = ParseStatus::ambiguous;
    }
    return p;
}

std::string Fraction::render3() const {
    if (den == 0) return "0.000";
    // Ties go to the even digit: 18/32 renders 0.562, as in published tables.
    std::int64_t thousandths = num * 1000 / den;
    const std::int64_t twice_rem = 2 * (num * 1000 % den);
    if (twice_rem > den || (twice_rem == den && thousandths % 2 == 1)) ++thousandths;
    std::string frac = std::to_string(thousandths % 1000);
    frac.insert(0, 3 - frac.size(), '0');
    return std::to_string(thousandths / 1000) + "." + frac;
}

nlohmann::json MetricsReport::to_json() const {
    auto col = [](const Fraction& f) {
        return nlohmann::json{{"num", f.num}, {"den", f.den}, {"value", f.value()}, {"rendered", f.render3()}};
    };
    return {{"ori", col(ori)},
            {"sem", col(sem)},
            {"con", col(con)},
            {"ori_sem", col(ori_sem)},
            {"ori_sem_con", col(ori_sem_con)},
            {"overall", col(overall)},
            {"instances", instances},
            {"groups", groups},
            {"ori_sem_excluded_groups", ori_sem_excluded},
            {"ori_sem_con_excluded_groups", ori_sem_con_excluded},
            {"unparsed_count", unparsed_count}};
}

std::vector<std::string> MetricsReport::row3() const {
    return {ori.render3(), sem.render3(), con.render3(), ori_sem.render3(), ori_sem_con.render3(), overall.render3()};
}

MetricsReport score_run(std::span<const Prediction> predictions, const DatasetSplit& split,
                        std::span<const Group> groups) {
    std::unordered_map<std::string, const PuzzleInstance*> by_id;
    for (const auto& inst : split.instances) by_id.emplace(inst.id, &inst);

    std::unordered_map<std::string, bool> correct;
    MetricsReport r;
    for (const auto& p : predictions) {
        auto it = by_id.find(p.instance_id);
        if (it == by_id.end()) throw Error(ErrorCode::UnknownInstance, p.instance_id);
        const bool ok = p.parse_status == ParseStatus::parsed && p.predicted && *p.predicted == it->second->label + 1;
        if (!correct.emplace(p.instance_id, ok).second) {
            throw Error(ErrorCode::DuplicateId, "two predictions for " + p.instance_id);
        }
        if (p.parse_status != ParseStatus::parsed) ++r.unparsed_count;
    }

    for (const auto& inst : split.instances) {
        auto it = correct.find(inst.id);
        if (it == correct.end()) throw Error(ErrorCode::MissingPrediction, inst.id);
        const std::int64_t hit = it->second ? 1 : 0;
        Fraction& col = inst.variant == Variant::original   ? r.ori
                        : inst.variant == Variant::semantic ? r.sem
                                                            : r.con;
        col.num += hit;
        col.den += 1;
        r.overall.num += hit;
        r.overall.den += 1;
    }
    r.instances = split.instances.size();
    r.groups = groups.size();

    for (const auto& g : groups) {
        auto is_correct = [&](Variant v) {
            auto id = g.by_variant.find(v);
            return correct.at(id->second);
        };
        if (g.has(Variant::original) && g.has(Variant::semantic)) {
            r.ori_sem.den += 1;
            if (is_correct(Variant::original) && is_correct(Variant::semantic)) r.ori_sem.num += 1;
        } else {
            ++r.ori_sem_excluded;
        }
        if (g.complete()) {
            r.ori_sem_con.den += 1;
            if (is_correct(Variant::original) && is_correct(Variant::semantic) && is_correct(Variant::context)) {
                r.ori_sem_con.num += 1;
            }
        } else {
            ++r.ori_sem_con_excluded;
        }
    }
    return r;
}

nlohmann::json prediction_to_json(const Prediction& p) {
    return {{"instance_id", p.instance_id},
            {"predicted", p.predicted ? nlohmann::json(*p.predicted) : nlohmann::json(nullptr)},
            {"raw_text", p.raw_text},
            {"parse_status", to_string(p.parse_status)}};
}

Prediction prediction_from_json(const nlohmann::json& j) {
    Prediction p;
    try {
        p.instance_id = j.at("instance_id").get<std::string>();
        if (j.contains("predicted") && !j.at("predicted").is_null()) p.predicted = j.at("predicted").get<int>();
        p.raw_text = j.value("raw_text", std::string());
        const auto status = parse_parse_status(j.at("parse_status").get<std::string>());
        if (!status) throw Error(ErrorCode::MalformedRecord, "unknown parse_status for " + p.instance_id);
        p.parse_status = *status;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedRecord, std::string("prediction: ") + e.what());
    }
    if ((p.parse_status == ParseStatus::parsed) != p.predicted.has_value()) {
        throw Error(ErrorCode::MalformedRecord, "parse_status and predicted disagree for " + p.instance_id);
    }
    return p;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
    std::vector<Prediction> out;
    jsonl::for_each(path, [&](std::size_t, const nlohmann::json& obj) { out.push_back(prediction_from_json(obj)); });
    return out;
}

}  // namespace teaser
