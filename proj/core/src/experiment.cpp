#include "teaser/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <set>
#include <sstream>

#include "teaser/digest.hpp"
#include "teaser/error.hpp"
#include "teaser/jsonl.hpp"

namespace teaser {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(std::string_view value) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= value.size()) {
        std::size_t comma = value.find(',', pos);
        if (comma == std::string_view::npos) comma = value.size();
        auto item = trim(value.substr(pos, comma - pos));
        if (!item.empty()) out.emplace_back(item);
        pos = comma + 1;
    }
    return out;
}

[[noreturn]] void bad(std::size_t line, const std::string& what) {
    throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(line) + ": " + what);
}

template <typename T>
T parse_number(std::size_t line, std::string_view key, std::string_view v) {
    T out{};
    if constexpr (std::is_floating_point_v<T>) {
        try {
            std::size_t used = 0;
            out = static_cast<T>(std::stod(std::string(v), &used));
            if (used != v.size()) bad(line, std::string(key) + ": not a number");
        } catch (const std::logic_error&) {
            bad(line, std::string(key) + ": not a number");
        }
    } else {
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || ptr != v.data() + v.size()) bad(line, std::string(key) + ": not an integer");
    }
    return out;
}

bool parse_bool(std::size_t line, std::string_view key, std::string_view v) {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    bad(line, std::string(key) + ": expected true or false");
}

template <typename T, typename Parse>
std::vector<T> parse_enum_list(std::size_t line, std::string_view key, std::string_view v, Parse parse) {
    std::vector<T> out;
    for (const auto& item : split_list(v)) {
        auto parsed = parse(item);
        if (!parsed) bad(line, std::string(key) + ": unknown value '" + item + "'");
        out.push_back(*parsed);
    }
    return out;
}

fs::path resolve(const fs::path& base, std::string_view v) {
    fs::path p{std::string(v)};
    return p.is_relative() && !base.empty() ? base / p : p;
}

template <typename T>
std::string join(const std::vector<T>& items, const std::function<std::string(const T&)>& fmt) {
    std::string out;
    for (const auto& x : items) {
        if (!out.empty()) out += ", ";
        out += fmt(x);
    }
    return out;
}

std::string fmt_double(double d) { return nlohmann::json(d).dump(); }

}  // namespace

const SubtaskData& ExperimentConfig::data_for(Subtask s) const {
    auto it = data.find(s);
    if (it == data.end()) {
        throw Error(ErrorCode::InvalidConfig, "no data declared for subtask " + std::string(to_string(s)));
    }
    return it->second;
}

std::vector<IdText> embedding_inputs(const DatasetSplit& split, EmbedText what) {
    std::vector<IdText> out;
    out.reserve(split.instances.size());
    for (const auto& inst : split.instances) {
        std::string text = inst.question;
        if (what == EmbedText::question_choices) {
            for (const auto& c : inst.choices) text += "\n" + c;
        }
        out.emplace_back(inst.id, std::move(text));
    }
    return out;
}

ExperimentConfig parse_experiment_config(std::string_view text, const fs::path& base_dir) {
    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) bad(line_no, "expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        if (!seen.insert(key).second) bad(line_no, "duplicate key '" + key + "'");

        if (key == "name") {
            cfg.name = value;
        } else if (key == "subtasks") {
            cfg.subtasks = parse_enum_list<Subtask>(line_no, key, value, parse_subtask);
        } else if (key == "kinds") {
            cfg.kinds = parse_enum_list<StrategyKind>(line_no, key, value, parse_strategy_kind);
        } else if (key == "shots") {
            cfg.shots.clear();
            for (const auto& s : split_list(value)) cfg.shots.push_back(parse_number<int>(line_no, key, s));
        } else if (key == "example_sources") {
            cfg.example_sources = parse_enum_list<ExampleSource>(line_no, key, value, parse_example_source);
        } else if (key == "reasoning_sources") {
            cfg.reasoning_sources = parse_enum_list<ReasoningSource>(line_no, key, value, parse_reasoning_source);
        } else if (key == "self_generator_tag") {
            cfg.self_generator_tag = value;
        } else if (key == "external_generator_tag") {
            cfg.external_generator_tag = value;
        } else if (key == "provider") {
            // Profile files resolve like any other path; builtin names stay.
            cfg.provider = (value == "mock" || value == "replay") ? std::string(value)
                                                                  : resolve(base_dir, value).string();
        } else if (key == "temperature") {
            cfg.params.temperature = parse_number<double>(line_no, key, value);
        } else if (key == "top_p") {
            cfg.params.top_p = parse_number<double>(line_no, key, value);
        } else if (key == "top_k") {
            cfg.params.top_k = parse_number<int>(line_no, key, value);
        } else if (key == "max_output_tokens") {
            cfg.params.max_output_tokens = parse_number<int>(line_no, key, value);
        } else if (key == "provider_model") {
            cfg.params.provider_model = value;
        } else if (key == "retrieval.order") {
            if (value == "most_similar_first") {
                cfg.order_in_prompt = ExemplarOrder::most_similar_first;
            } else if (value == "most_similar_last") {
                cfg.order_in_prompt = ExemplarOrder::most_similar_last;
            } else {
                bad(line_no, "retrieval.order: unknown value");
            }
        } else if (key == "retrieval.embed_text") {
            if (value == "question") {
                cfg.embed_text = EmbedText::question;
            } else if (value == "question_choices") {
                cfg.embed_text = EmbedText::question_choices;
            } else {
                bad(line_no, "retrieval.embed_text: unknown value");
            }
        } else if (key == "reask_unparseable") {
            cfg.reask_unparseable = parse_bool(line_no, key, value);
        } else if (key == "derive_group_from_id") {
            cfg.derive_group_from_id = parse_bool(line_no, key, value);
        } else if (key == "workers") {
            cfg.workers = parse_number<std::size_t>(line_no, key, value);
            if (cfg.workers == 0) bad(line_no, "workers must be >= 1");
        } else if (key == "reasoning_store") {
            cfg.reasoning_store = resolve(base_dir, value);
        } else {
            // Per-subtask keys: <field>.<subtask>
            const auto dot = key.rfind('.');
            const auto subtask = dot == std::string::npos ? std::nullopt : parse_subtask(key.substr(dot + 1));
            if (!subtask) bad(line_no, "unknown key '" + key + "'");
            const std::string field = key.substr(0, dot);
            SubtaskData& d = cfg.data[*subtask];
            if (field == "train") {
                d.train = resolve(base_dir, value);
            } else if (field == "test") {
                d.test = resolve(base_dir, value);
            } else if (field == "embeddings.train") {
                d.train_embeddings = resolve(base_dir, value);
            } else if (field == "embeddings.test") {
                d.test_embeddings = resolve(base_dir, value);
            } else if (field == "static_exemplars") {
                d.static_exemplars = split_list(value);
            } else {
                bad(line_no, "unknown key '" + key + "'");
            }
        }
    }
    if (cfg.subtasks.empty()) throw Error(ErrorCode::InvalidConfig, "no subtasks declared");
    if (cfg.kinds.empty()) throw Error(ErrorCode::InvalidConfig, "no strategy kinds declared");
    cfg.params.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    return parse_experiment_config(jsonl::read_file(path), path.parent_path());
}

std::string ExperimentConfig::to_text() const {
    std::map<std::string, std::string> kv;
    kv["name"] = name;
    kv["subtasks"] = join<Subtask>(subtasks, [](const Subtask& s) { return std::string(to_string(s)); });
    kv["kinds"] = join<StrategyKind>(kinds, [](const StrategyKind& k) { return std::string(to_string(k)); });
    if (!shots.empty()) kv["shots"] = join<int>(shots, [](const int& n) { return std::to_string(n); });
    kv["example_sources"] =
        join<ExampleSource>(example_sources, [](const ExampleSource& s) { return std::string(to_string(s)); });
    kv["reasoning_sources"] =
        join<ReasoningSource>(reasoning_sources, [](const ReasoningSource& r) { return std::string(to_string(r)); });
    if (!self_generator_tag.empty()) kv["self_generator_tag"] = self_generator_tag;
    if (!external_generator_tag.empty()) kv["external_generator_tag"] = external_generator_tag;
    kv["provider"] = provider;
    kv["temperature"] = fmt_double(params.temperature);
    kv["top_p"] = fmt_double(params.top_p);
    kv["top_k"] = std::to_string(params.top_k);
    kv["max_output_tokens"] = std::to_string(params.max_output_tokens);
    if (!params.provider_model.empty()) kv["provider_model"] = params.provider_model;
    kv["retrieval.order"] = std::string(to_string(order_in_prompt));
    kv["retrieval.embed_text"] = embed_text == EmbedText::question ? "question" : "question_choices";
    kv["reask_unparseable"] = reask_unparseable ? "true" : "false";
    kv["derive_group_from_id"] = derive_group_from_id ? "true" : "false";
    kv["workers"] = std::to_string(workers);
    if (!reasoning_store.empty()) kv["reasoning_store"] = reasoning_store.string();
    for (const auto& [subtask, d] : data) {
        const std::string sfx = "." + std::string(to_string(subtask));
        if (!d.train.empty()) kv["train" + sfx] = d.train.string();
        if (!d.test.empty()) kv["test" + sfx] = d.test.string();
        if (!d.train_embeddings.empty()) kv["embeddings.train" + sfx] = d.train_embeddings.string();
        if (!d.test_embeddings.empty()) kv["embeddings.test" + sfx] = d.test_embeddings.string();
        if (!d.static_exemplars.empty()) {
            kv["static_exemplars" + sfx] =
                join<std::string>(d.static_exemplars, [](const std::string& s) { return s; });
        }
    }
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

// ---------------------------------------------------------------- RunSpec

nlohmann::json RunSpec::identity_json() const {
    nlohmann::json j = {
        {"subtask", to_string(subtask)},
        {"strategy",
         {{"kind", to_string(strategy.kind)},
          {"shots", strategy.shots},
          {"example_source", to_string(strategy.example_source)},
          {"reasoning_source", to_string(strategy.reasoning_source)}}},
        {"static_exemplar_ids", static_exemplar_ids ? nlohmann::json(*static_exemplar_ids) : nlohmann::json(nullptr)},
        {"retrieval", retrieval ? nlohmann::json{{"n", retrieval->n},
                                                 {"tie_break", "ascending_instance_id"},
                                                 {"order_in_prompt", to_string(retrieval->order_in_prompt)}}
                                : nlohmann::json(nullptr)},
        {"generator_tag", generator_tag ? nlohmann::json(*generator_tag) : nlohmann::json(nullptr)},
        {"params", params.to_json()},
        {"provider", provider},
        {"reask_unparseable", reask_unparseable},
        {"template_version", template_version},
    };
    return j;
}

nlohmann::json RunSpec::to_json() const {
    nlohmann::json j = identity_json();
    j["run_id"] = run_id;
    return j;
}

RunSpec RunSpec::from_json(const nlohmann::json& j) {
    RunSpec s;
    try {
        auto sub = parse_subtask(j.at("subtask").get<std::string>());
        const auto& st = j.at("strategy");
        auto kind = parse_strategy_kind(st.at("kind").get<std::string>());
        auto src = parse_example_source(st.at("example_source").get<std::string>());
        auto rsn = parse_reasoning_source(st.at("reasoning_source").get<std::string>());
        if (!sub || !kind || !src || !rsn) throw Error(ErrorCode::InvalidConfig, "run spec has unknown enum values");
        s.subtask = *sub;
        s.strategy = Strategy{*kind, st.at("shots").get<int>(), *src, *rsn};
        if (!j.at("static_exemplar_ids").is_null()) {
            s.static_exemplar_ids = j.at("static_exemplar_ids").get<std::vector<std::string>>();
        }
        if (!j.at("retrieval").is_null()) {
            const auto& r = j.at("retrieval");
            RetrievalConfig rc;
            rc.n = r.at("n").get<std::size_t>();
            rc.order_in_prompt = r.at("order_in_prompt").get<std::string>() == "most_similar_last"
                                     ? ExemplarOrder::most_similar_last
                                     : ExemplarOrder::most_similar_first;
            s.retrieval = rc;
        }
        if (!j.at("generator_tag").is_null()) s.generator_tag = j.at("generator_tag").get<std::string>();
        s.params = GenerationParams::from_json(j.at("params"));
        s.provider = j.at("provider").get<std::string>();
        s.reask_unparseable = j.value("reask_unparseable", false);
        s.template_version = j.at("template_version").get<std::string>();
        s.run_id = j.value("run_id", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("run spec: ") + e.what());
    }
    if (s.run_id.empty()) s.run_id = derive_run_id(s);
    s.validate();
    return s;
}

void RunSpec::validate() const {
    try {
        strategy.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidConfig, e.message());
    }
    if (strategy.kind != StrategyKind::few_shot) {
        if (static_exemplar_ids || retrieval) {
            throw Error(ErrorCode::InvalidConfig, "zero-shot runs take neither static exemplars nor retrieval");
        }
        return;
    }
    const bool is_static = strategy.example_source == ExampleSource::static_examples;
    if (is_static != static_exemplar_ids.has_value() || is_static == retrieval.has_value()) {
        throw Error(ErrorCode::InvalidConfig, "few-shot runs need exactly one of static exemplars / retrieval");
    }
    if (is_static && static_exemplar_ids->size() != static_cast<std::size_t>(strategy.shots)) {
        throw Error(ErrorCode::InvalidConfig, "static exemplar count differs from shots");
    }
    if (!is_static && retrieval->n != static_cast<std::size_t>(strategy.shots)) {
        throw Error(ErrorCode::InvalidConfig, "retrieval n differs from shots");
    }
    if (strategy.uses_reasoning() && (!generator_tag || generator_tag->empty())) {
        throw Error(ErrorCode::InvalidConfig, "reasoning runs need a generator tag");
    }
}

std::string derive_run_id(const RunSpec& spec) { return sha256_hex(spec.identity_json().dump()).substr(0, 16); }

std::vector<RunSpec> plan_experiments(const ExperimentConfig& config) {
    std::map<Subtask, DatasetSplit> train_cache;
    auto train_for = [&](Subtask s) -> const DatasetSplit& {
        auto it = train_cache.find(s);
        if (it != train_cache.end()) return it->second;
        const SubtaskData& d = config.data_for(s);
        if (d.train.empty()) {
            throw Error(ErrorCode::InvalidConfig, "static few-shot needs train." + std::string(to_string(s)));
        }
        return train_cache.emplace(s, load_split(d.train, s, Role::train, config.load_options())).first->second;
    };

    std::vector<RunSpec> specs;
    std::set<std::string> ids;
    auto push = [&](RunSpec spec) {
        spec.template_version = std::string(template_version_for(spec.strategy.kind));
        spec.validate();
        spec.run_id = derive_run_id(spec);
        if (ids.insert(spec.run_id).second) specs.push_back(std::move(spec));
    };

    // Runs are identified by the profile's name, not where its file lives.
    const std::string provider_name = resolve_profile(config.provider).name;

    for (Subtask subtask : config.subtasks) {
        for (StrategyKind kind : config.kinds) {
            RunSpec base;
            base.subtask = subtask;
            base.params = config.params;
            base.provider = provider_name;
            base.reask_unparseable = config.reask_unparseable;
            base.strategy.kind = kind;
            if (kind != StrategyKind::few_shot) {
                push(base);
                continue;
            }
            if (config.shots.empty()) throw Error(ErrorCode::InvalidConfig, "few_shot declared without shots");
            for (int shots : config.shots) {
                if (shots < 1) throw Error(ErrorCode::InvalidConfig, "shots must be >= 1");
                for (ExampleSource source : config.example_sources) {
                    for (ReasoningSource reasoning : config.reasoning_sources) {
                        RunSpec spec = base;
                        spec.strategy.shots = shots;
                        spec.strategy.example_source = source;
                        spec.strategy.reasoning_source = reasoning;
                        if (reasoning == ReasoningSource::self_generated) {
                            if (config.self_generator_tag.empty()) {
                                throw Error(ErrorCode::InvalidConfig, "self_generated reasoning needs self_generator_tag");
                            }
                            spec.generator_tag = config.self_generator_tag;
                        } else if (reasoning == ReasoningSource::external_generated) {
                            if (config.external_generator_tag.empty()) {
                                throw Error(ErrorCode::InvalidConfig,
                                            "external_generated reasoning needs external_generator_tag");
                            }
                            spec.generator_tag = config.external_generator_tag;
                        }
                        if (source == ExampleSource::static_examples) {
                            const DatasetSplit& train = train_for(subtask);
                            const auto& declared = config.data_for(subtask).static_exemplars;
                            std::vector<std::string> chosen;
                            if (!declared.empty()) {
                                if (declared.size() < static_cast<std::size_t>(shots)) {
                                    throw Error(ErrorCode::InvalidConfig,
                                                std::to_string(shots) + " shots but only " +
                                                    std::to_string(declared.size()) + " static exemplars declared");
                                }
                                chosen.assign(declared.begin(), declared.begin() + shots);
                            } else {
                                if (train.instances.size() < static_cast<std::size_t>(shots)) {
                                    throw Error(ErrorCode::InvalidConfig, "train split smaller than shots");
                                }
                                for (int i = 0; i < shots; ++i) chosen.push_back(train.instances[i].id);
                            }
                            for (const auto& id : chosen) {
                                if (!train.find(id)) throw Error(ErrorCode::UnknownExemplarId, id);
                            }
                            spec.static_exemplar_ids = std::move(chosen);
                        } else {
                            spec.retrieval = RetrievalConfig{static_cast<std::size_t>(shots), config.order_in_prompt};
                        }
                        push(std::move(spec));
                    }
                }
            }
        }
    }
    return specs;
}

}  // namespace teaser
