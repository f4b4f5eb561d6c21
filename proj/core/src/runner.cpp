#include "teaser/runner.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "teaser/error.hpp"
#include "teaser/jsonl.hpp"
#include "teaser/report.hpp"
#include "timestamp.hpp"

namespace teaser {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kReaskSalt = "reask-1";

struct Entry {
    Prediction prediction;
    std::string prompt_hash;
    std::vector<std::string> exemplar_ids;
    bool reasked = false;
    std::string error;

    nlohmann::json to_checkpoint() const {
        nlohmann::json j = prediction_to_json(prediction);
        j["prompt_hash"] = prompt_hash;
        j["exemplar_ids"] = exemplar_ids;
        j["reasked"] = reasked;
        if (!error.empty()) j["error"] = error;
        return j;
    }

    /// The predictions file drops per-attempt noise so replays match byte
    /// for byte.
    nlohmann::json to_prediction_row() const {
        nlohmann::json j = prediction_to_json(prediction);
        j["exemplar_ids"] = exemplar_ids;
        if (!error.empty()) j["error"] = error;
        return j;
    }

    static Entry from_checkpoint(const nlohmann::json& j) {
        Entry e;
        e.prediction = prediction_from_json(j);
        e.prompt_hash = j.value("prompt_hash", std::string());
        e.exemplar_ids = j.value("exemplar_ids", std::vector<std::string>{});
        e.reasked = j.value("reasked", false);
        e.error = j.value("error", std::string());
        return e;
    }
};

}  // namespace

std::map<std::string, std::vector<std::string>> select_exemplars(const RunSpec& spec, const RunInputs& inputs) {
    std::map<std::string, std::vector<std::string>> out;
    const DatasetSplit& test = *inputs.test;
    if (spec.strategy.kind != StrategyKind::few_shot) {
        for (const auto& inst : test.instances) out[inst.id] = {};
        return out;
    }
    if (spec.strategy.example_source == ExampleSource::static_examples) {
        for (const auto& inst : test.instances) out[inst.id] = *spec.static_exemplar_ids;
        return out;
    }
    if (!inputs.train_embeddings || !inputs.test_embeddings) {
        throw Error(ErrorCode::MissingStore, "dynamic selection needs train and test embedding stores");
    }
    if (inputs.train_embeddings->provider_tag() != inputs.test_embeddings->provider_tag()) {
        throw Error(ErrorCode::ProviderTagMismatch, "train embeddings from '" + inputs.train_embeddings->provider_tag() +
                                                        "', test from '" + inputs.test_embeddings->provider_tag() + "'");
    }
    for (const auto& inst : test.instances) {
        const EmbeddingRecord* rec = inputs.test_embeddings->find(inst.id);
        if (!rec) throw Error(ErrorCode::MissingStore, "no embedding for test instance " + inst.id);
        out[inst.id] = order_for_prompt(top_n_similar(inst.id, rec->vector, *inputs.train_embeddings, *spec.retrieval),
                                        spec.retrieval->order_in_prompt);
    }
    return out;
}

std::vector<RenderedPrompt> render_run_prompts(const RunSpec& spec, const RunInputs& inputs) {
    if (!inputs.test) throw Error(ErrorCode::MissingStore, "no test split");
    const DatasetSplit& test = *inputs.test;
    const auto selection = select_exemplars(spec, inputs);
    if (spec.strategy.uses_reasoning()) {
        if (!inputs.reasoning) throw Error(ErrorCode::MissingStore, "reasoning runs need a reasoning store");
        for (const auto& [_, ids] : selection) require_reasoning(*inputs.reasoning, ids, *spec.generator_tag);
    }

    std::vector<RenderedPrompt> prompts;
    prompts.reserve(test.instances.size());
    for (const auto& inst : test.instances) {
        std::vector<Exemplar> exemplars;
        for (const auto& id : selection.at(inst.id)) {
            const PuzzleInstance* ex = inputs.train->find(id);
            if (!ex) throw Error(ErrorCode::UnknownExemplarId, id);
            std::optional<std::string> reasoning;
            if (spec.strategy.uses_reasoning()) reasoning = get_reasoning(*inputs.reasoning, id, *spec.generator_tag);
            exemplars.push_back(Exemplar{ex, std::move(reasoning)});
        }
        prompts.push_back(render_prompt(inst, spec.strategy, exemplars));
    }
    return prompts;
}

RunResult execute_run(const RunSpec& spec, const RunInputs& inputs, ProviderGateway& gateway,
                      const RunOptions& options) {
    spec.validate();
    if (!inputs.test) throw Error(ErrorCode::MissingStore, "no test split");
    const DatasetSplit& test = *inputs.test;
    if (test.subtask != spec.subtask) throw Error(ErrorCode::SubtaskMismatch, "test split subtask differs from run");
    const bool few_shot = spec.strategy.kind == StrategyKind::few_shot;
    if (few_shot) {
        if (!inputs.train) throw Error(ErrorCode::MissingStore, "few-shot runs need the train split");
        if (inputs.train->subtask != spec.subtask) {
            throw Error(ErrorCode::SubtaskMismatch, "train split subtask differs from run");
        }
    }
    if (spec.strategy.uses_reasoning() && !inputs.reasoning) {
        throw Error(ErrorCode::MissingStore, "reasoning runs need a reasoning store");
    }
    gateway.check_auth();

    const std::string started_at = detail::utc_timestamp();
    const GatewayStats stats_before = gateway.stats();

    // Everything up to rendering is pure and happens before any provider call.
    const auto prompts = render_run_prompts(spec, inputs);

    const fs::path run_dir = options.runs_root / spec.run_id;
    fs::create_directories(run_dir);
    const fs::path checkpoint = run_dir / "checkpoint.jsonl";

    std::vector<std::optional<Entry>> entries(test.instances.size());
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < test.instances.size(); ++i) index.emplace(test.instances[i].id, i);

    std::size_t resumed = 0;
    if (fs::exists(checkpoint)) {
        jsonl::for_each(
            checkpoint,
            [&](std::size_t, const nlohmann::json& obj) {
                Entry e = Entry::from_checkpoint(obj);
                auto it = index.find(e.prediction.instance_id);
                if (it == index.end()) return;
                const std::size_t i = it->second;
                const std::string expected = cache_key(prompts[i].text, spec.params, spec.params.provider_model);
                // Failed or stale entries are redone.
                if (!e.error.empty() || e.prompt_hash != expected) {
                    entries[i].reset();
                    return;
                }
                entries[i] = std::move(e);
            },
            /*tolerate_torn_tail=*/true);
        for (const auto& e : entries) resumed += e.has_value();
        // Rewrite compacted so a torn tail never precedes new appends.
        std::vector<nlohmann::json> rows;
        for (const auto& e : entries) {
            if (e) rows.push_back(e->to_checkpoint());
        }
        jsonl::write_all(checkpoint, rows);
    }

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!entries[i]) todo.push_back(i);
    }
    if (options.limit && todo.size() > *options.limit) todo.resize(*options.limit);

    std::mutex log_mu;
    std::ofstream log(checkpoint, std::ios::app | std::ios::binary);
    if (!log) throw Error(ErrorCode::Io, "cannot append to " + checkpoint.string());

    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::exception_ptr fatal;

    auto worker = [&] {
        for (;;) {
            if (abort) return;
            const std::size_t k = next++;
            if (k >= todo.size()) return;
            const std::size_t i = todo[k];
            const PuzzleInstance& inst = test.instances[i];
            Entry e;
            e.exemplar_ids = prompts[i].exemplar_ids;
            e.prompt_hash = cache_key(prompts[i].text, spec.params, spec.params.provider_model);
            try {
                Completion c = gateway.generate(prompts[i], spec.params);
                e.prediction = extract_choice(c.text, inst.choices);
                if (spec.reask_unparseable && e.prediction.parse_status != ParseStatus::parsed) {
                    Completion again = gateway.generate(prompts[i], spec.params, kReaskSalt);
                    e.prediction = extract_choice(again.text, inst.choices);
                    e.reasked = true;
                }
            } catch (const Error& err) {
                if (err.code() == ErrorCode::AuthMissing) {
                    std::lock_guard lock(log_mu);
                    if (!fatal) fatal = std::current_exception();
                    abort = true;
                    return;
                }
                e.prediction = Prediction{inst.id, std::nullopt, {}, ParseStatus::unparseable};
                e.error = err.what();
            }
            e.prediction.instance_id = inst.id;
            std::lock_guard lock(log_mu);
            log << e.to_checkpoint().dump() << '\n';
            log.flush();
            entries[i] = std::move(e);
        }
    };

    const std::size_t n_workers = std::max<std::size_t>(1, std::min(options.workers, todo.size()));
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_workers && !todo.empty(); ++w) pool.emplace_back(worker);
    }
    log.close();
    if (fatal) std::rethrow_exception(fatal);

    RunResult result;
    result.run_id = spec.run_id;
    result.spec = spec;
    result.run_dir = run_dir;
    result.resumed_instances = resumed;
    result.new_instances = todo.size();

    bool complete = true;
    nlohmann::json exemplar_map = nlohmann::json::object();
    std::vector<nlohmann::json> prediction_rows;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        exemplar_map[test.instances[i].id] = prompts[i].exemplar_ids;
        if (!entries[i]) {
            complete = false;
            continue;
        }
        if (!entries[i]->error.empty()) ++result.failed_instances;
        result.predictions.push_back(entries[i]->prediction);
        prediction_rows.push_back(entries[i]->to_prediction_row());
    }

    const GatewayStats stats_after = gateway.stats();
    GatewayStats delta;
    delta.backend_calls = stats_after.backend_calls - stats_before.backend_calls;
    delta.cache_hits = stats_after.cache_hits - stats_before.cache_hits;
    delta.cache_misses = stats_after.cache_misses - stats_before.cache_misses;
    delta.retries = stats_after.retries - stats_before.retries;

    nlohmann::json manifest = {
        {"run_id", spec.run_id},
        {"label", spec.label()},
        {"spec", spec.to_json()},
        {"template_version", spec.template_version},
        {"provider_model", spec.params.provider_model},
        {"provider_profile", gateway.profile().to_json()},
        {"inputs", inputs.provenance},
        {"cache", delta.to_json()},
        {"instances_total", test.instances.size()},
        {"instances_done", result.predictions.size()},
        {"instances_resumed", resumed},
        {"instances_failed", result.failed_instances},
        {"exemplar_ids", exemplar_map},
        {"started_at", started_at},
        {"finished_at", detail::utc_timestamp()},
        {"status", complete ? "complete" : "partial"},
    };

    if (complete) {
        const auto groups = derive_groups(test);
        result.metrics = score_run(result.predictions, test, groups);
        jsonl::write_all(run_dir / "predictions.jsonl", prediction_rows);
        jsonl::write_file_atomic(run_dir / "metrics.json", result.metrics->to_json().dump(2) + "\n");
        jsonl::write_file_atomic(run_dir / "metrics.csv",
                                 metrics_csv_header() + "\n" + metrics_csv_row(spec.label(), *result.metrics) + "\n");
    }
    jsonl::write_file_atomic(run_dir / "manifest.json", manifest.dump(2) + "\n");
    result.manifest = std::move(manifest);
    return result;
}

RunResult load_run_result(const fs::path& run_dir) {
    RunResult r;
    r.run_dir = run_dir;
    try {
        r.manifest = nlohmann::json::parse(jsonl::read_file(run_dir / "manifest.json"));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::MalformedRecord, (run_dir / "manifest.json").string() + ": " + e.what());
    }
    r.spec = RunSpec::from_json(r.manifest.at("spec"));
    r.run_id = r.spec.run_id;
    if (r.manifest.value("status", std::string()) != "complete") return r;
    r.predictions = load_predictions(run_dir / "predictions.jsonl");
    const auto m = nlohmann::json::parse(jsonl::read_file(run_dir / "metrics.json"));
    auto frac = [&](const char* k) { return Fraction{m.at(k).at("num").get<std::int64_t>(), m.at(k).at("den").get<std::int64_t>()}; };
    MetricsReport rep;
    rep.ori = frac("ori");
    rep.sem = frac("sem");
    rep.con = frac("con");
    rep.ori_sem = frac("ori_sem");
    rep.ori_sem_con = frac("ori_sem_con");
    rep.overall = frac("overall");
    rep.instances = m.at("instances").get<std::size_t>();
    rep.groups = m.at("groups").get<std::size_t>();
    rep.ori_sem_excluded = m.at("ori_sem_excluded_groups").get<std::size_t>();
    rep.ori_sem_con_excluded = m.at("ori_sem_con_excluded_groups").get<std::size_t>();
    rep.unparsed_count = m.at("unparsed_count").get<std::size_t>();
    r.metrics = rep;
    return r;
}

}  // namespace teaser
