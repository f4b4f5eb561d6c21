// teaser: command-line front end for ingesting puzzles, building embedding
// and reasoning stores, running experiment matrices and reporting.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "teaser/digest.hpp"
#include "teaser/error.hpp"
#include "teaser/experiment.hpp"
#include "teaser/jsonl.hpp"
#include "teaser/report.hpp"
#include "teaser/runner.hpp"

namespace fs = std::filesystem;
using namespace teaser;

namespace {

struct Globals {
    std::string config;
    std::string cache_dir = "cache";
    std::string out_dir = "runs";
    std::string provider;
    std::optional<int> max_in_flight;
    std::optional<double> rpm;
};

Subtask subtask_arg(const std::string& s) {
    auto v = parse_subtask(s);
    if (!v) throw Error(ErrorCode::InvalidConfig, "unknown subtask '" + s + "'");
    return *v;
}

Role role_arg(const std::string& s) {
    auto v = parse_role(s);
    if (!v) throw Error(ErrorCode::InvalidConfig, "unknown role '" + s + "'");
    return *v;
}

ExperimentConfig need_config(const Globals& g) {
    if (g.config.empty()) throw Error(ErrorCode::InvalidConfig, "this command needs --config");
    return load_experiment_config(g.config);
}

ProviderProfile profile_for(const Globals& g, const std::string& fallback) {
    ProviderProfile p = resolve_profile(g.provider.empty() ? fallback : g.provider);
    if (g.max_in_flight) p.max_in_flight = *g.max_in_flight;
    if (g.rpm) p.requests_per_minute = *g.rpm;
    p.validate();
    return p;
}

std::unique_ptr<ProviderGateway> gateway_for(const Globals& g, const std::string& fallback) {
    return make_gateway(profile_for(g, fallback), std::make_shared<CompletionCache>(g.cache_dir));
}

nlohmann::json file_provenance(const fs::path& p) {
    return {{"path", p.string()}, {"sha256", sha256_hex(jsonl::read_file(p))}};
}

/// Splits and stores for one subtask, loaded on first use.
struct SubtaskInputs {
    DatasetSplit train, test;
    std::optional<EmbeddingStore> train_embeddings, test_embeddings;
    nlohmann::json provenance = nlohmann::json::object();

    RunInputs view(const ReasoningStore* reasoning) const {
        return {&train,
                &test,
                train_embeddings ? &*train_embeddings : nullptr,
                test_embeddings ? &*test_embeddings : nullptr,
                reasoning,
                provenance};
    }
};

SubtaskInputs load_inputs(const ExperimentConfig& cfg, Subtask s) {
    const SubtaskData& d = cfg.data_for(s);
    SubtaskInputs in;
    in.train = load_split(d.train, s, Role::train, cfg.load_options());
    in.test = load_split(d.test, s, Role::test, cfg.load_options());
    in.provenance["train"] = file_provenance(d.train);
    in.provenance["test"] = file_provenance(d.test);
    if (!d.train_embeddings.empty() && !d.test_embeddings.empty()) {
        in.train_embeddings = EmbeddingStore::load(d.train_embeddings);
        in.test_embeddings = EmbeddingStore::load(d.test_embeddings);
        in.provenance["train_embeddings"] = file_provenance(d.train_embeddings);
        in.provenance["test_embeddings"] = file_provenance(d.test_embeddings);
        in.provenance["embedding_provider"] = in.train_embeddings->provider_tag();
    }
    in.provenance["embed_text"] = cfg.embed_text == EmbedText::question ? "question" : "question_choices";
    return in;
}

/// Planned runs; with the replay gateway the specs keep the configured
/// provider so they land on the run ids being replayed.
std::vector<RunSpec> plan_for(const Globals& g, ExperimentConfig cfg) {
    if (!g.provider.empty() && g.provider != "replay") cfg.provider = g.provider;
    return plan_experiments(cfg);
}

void print_metrics(const std::string& label, const MetricsReport& m) {
    std::cout << metrics_csv_header() << "\n" << metrics_csv_row(label, m) << "\n";
}

int cmd_ingest(const std::string& subtask, const std::string& role, const std::string& in, const std::string& out,
               bool derive) {
    const auto split = load_split(in, subtask_arg(subtask), role_arg(role), LoadOptions{derive});
    std::size_t complete = 0;
    const auto groups = derive_groups(split);
    for (const auto& gr : groups) complete += gr.complete() ? 1 : 0;
    if (!out.empty()) save_split(split, out);
    std::cout << split.instances.size() << " instances, " << groups.size() << " groups, " << complete
              << " complete\n";
    return 0;
}

int cmd_embed(const Globals& g, const std::string& subtask, const std::string& role, const std::string& in,
              const std::string& provider, const std::string& model, const std::string& auth_env,
              std::size_t batch, const std::string& out) {
    const Subtask s = subtask_arg(subtask);
    const Role r = role_arg(role);
    fs::path input = in;
    EmbedText what = EmbedText::question;
    LoadOptions options;
    if (!g.config.empty()) {
        const auto cfg = need_config(g);
        what = cfg.embed_text;
        options = cfg.load_options();
        if (input.empty()) input = r == Role::train ? cfg.data_for(s).train : cfg.data_for(s).test;
    }
    if (input.empty()) throw Error(ErrorCode::InvalidConfig, "embed needs --in or a --config with data paths");
    const auto split = load_split(input, s, r, options);

    std::unique_ptr<EmbeddingProvider> emb;
    if (provider.rfind("lexical-hash", 0) == 0) {
        emb = std::make_unique<LexicalHashEmbeddingProvider>();
    } else if (provider.rfind("http://", 0) == 0 || provider.rfind("https://", 0) == 0) {
        if (model.empty()) throw Error(ErrorCode::InvalidConfig, "http embedding needs --model");
        HttpEmbeddingConfig c;
        const auto slash = provider.find('/', provider.find("://") + 3);
        c.base_url = provider.substr(0, slash);
        if (slash != std::string::npos) c.path = provider.substr(slash);
        c.model_tag = model;
        c.auth_env = auth_env;
        c.batch_size = batch;
        emb = std::make_unique<HttpEmbeddingProvider>(c);
    } else {
        emb = std::make_unique<PrecomputedEmbeddingProvider>(provider);
    }
    const auto texts = embedding_inputs(split, what);
    EmbeddingStore store;
    for (auto& rec : embed_questions(*emb, texts)) store.add(std::move(rec));
    store.save(out);
    std::cout << store.size() << " vectors of dim " << store.dim() << " from " << store.provider_tag() << " -> "
              << out << "\n";
    return 0;
}

fs::path reasoning_path(const ExperimentConfig* cfg, const std::string& store) {
    if (!store.empty()) return store;
    if (cfg && !cfg->reasoning_store.empty()) return cfg->reasoning_store;
    throw Error(ErrorCode::InvalidConfig, "no reasoning store: pass --store or set reasoning_store");
}

int cmd_gen_reasoning(const Globals& g, const std::string& subtask, const std::string& generator,
                      const std::string& store_arg, std::size_t max_length) {
    const auto cfg = need_config(g);
    const Subtask s = subtask_arg(subtask);
    const auto train = load_split(cfg.data_for(s).train, s, Role::train, cfg.load_options());
    auto store = ReasoningStore::open(reasoning_path(&cfg, store_arg));
    auto gw = gateway_for(g, cfg.provider);
    ReasoningBuildOptions opts;
    opts.max_length = max_length;
    opts.workers = cfg.workers;
    opts.params = cfg.params;
    const auto st = build_reasoning_store(train, *gw, generator, store, opts);
    std::cout << "attempted " << st.attempted << ", ok " << st.ok << ", failed " << st.failed << ", skipped "
              << st.skipped << "\n";
    return st.failed == 0 ? 0 : 3;
}

int cmd_import_reasoning(const Globals& g, const std::string& file, const std::string& generator,
                         const std::string& store_arg) {
    std::optional<ExperimentConfig> cfg;
    if (!g.config.empty()) cfg = need_config(g);
    auto store = ReasoningStore::open(reasoning_path(cfg ? &*cfg : nullptr, store_arg));
    std::cout << "imported " << import_reasoning(file, generator, store) << " rationales under '" << generator
              << "'\n";
    return 0;
}

int cmd_run(const Globals& g, std::optional<std::size_t> limit, const std::vector<std::string>& only) {
    const auto cfg = need_config(g);
    const auto specs = plan_for(g, cfg);
    const std::set<std::string> wanted(only.begin(), only.end());

    std::map<Subtask, SubtaskInputs> inputs;
    std::optional<ReasoningStore> reasoning;
    auto gw = gateway_for(g, cfg.provider);
    RunOptions opts;
    opts.runs_root = g.out_dir;
    opts.workers = cfg.workers;
    opts.limit = limit;

    int incomplete = 0;
    for (const auto& spec : specs) {
        if (!wanted.empty() && !wanted.count(spec.run_id)) continue;
        if (!inputs.count(spec.subtask)) inputs.emplace(spec.subtask, load_inputs(cfg, spec.subtask));
        if (spec.strategy.uses_reasoning() && !reasoning) reasoning = ReasoningStore::load(reasoning_path(&cfg, {}));
        RunInputs in = inputs.at(spec.subtask).view(reasoning ? &*reasoning : nullptr);
        in.provenance["config"] = cfg.to_text();
        const auto r = execute_run(spec, in, *gw, opts);
        std::cout << spec.run_id << "  " << to_string(spec.subtask) << "  " << spec.label() << "  ";
        if (r.complete()) {
            std::cout << "overall " << r.metrics->overall.render3();
            if (r.failed_instances) std::cout << " (" << r.failed_instances << " failed)";
        } else {
            ++incomplete;
            std::cout << "partial";
        }
        std::cout << "\n";
    }
    const auto st = gw->stats();
    std::cerr << "provider calls " << st.backend_calls << ", cache hits " << st.cache_hits << ", retries "
              << st.retries << "\n";
    return incomplete == 0 ? 0 : 3;
}

int cmd_score(const Globals& g, const std::string& run_dir, const std::string& predictions,
              const std::string& test, const std::string& subtask) {
    if (!run_dir.empty()) {
        const auto r = load_run_result(run_dir);
        if (!r.complete()) throw Error(ErrorCode::MissingPrediction, "run in " + run_dir + " is not complete");
        print_metrics(r.spec.label(), *r.metrics);
        return 0;
    }
    if (predictions.empty() || subtask.empty())
        throw Error(ErrorCode::InvalidConfig, "score needs --run, or --predictions with --subtask");
    const Subtask s = subtask_arg(subtask);
    fs::path test_path = test;
    LoadOptions options;
    if (test_path.empty()) {
        const auto cfg = need_config(g);
        test_path = cfg.data_for(s).test;
        options = cfg.load_options();
    }
    const auto split = load_split(test_path, s, Role::test, options);
    const auto preds = load_predictions(predictions);
    print_metrics(fs::path(predictions).stem().string(), score_run(preds, split, derive_groups(split)));
    return 0;
}

int cmd_report(const Globals& g, const std::string& dest) {
    std::vector<RunResult> results;
    if (!g.config.empty()) {
        // Config order, only the runs it plans.
        for (const auto& spec : plan_for(g, need_config(g))) {
            const fs::path dir = fs::path(g.out_dir) / spec.run_id;
            if (fs::exists(dir / "metrics.json")) results.push_back(load_run_result(dir));
        }
    } else {
        std::vector<fs::path> dirs;
        for (const auto& e : fs::directory_iterator(g.out_dir)) {
            if (fs::exists(e.path() / "metrics.json")) dirs.push_back(e.path());
        }
        std::sort(dirs.begin(), dirs.end());
        for (const auto& d : dirs) results.push_back(load_run_result(d));
    }
    for (const auto& p : emit_report(results, dest)) std::cout << p.string() << "\n";
    return 0;
}

int cmd_render(const Globals& g, const std::string& run_id, std::size_t index, const std::string& instance) {
    const auto cfg = need_config(g);
    const auto specs = plan_for(g, cfg);
    const RunSpec* spec = nullptr;
    if (!run_id.empty()) {
        for (const auto& s : specs) {
            if (s.run_id == run_id) spec = &s;
        }
        if (!spec) throw Error(ErrorCode::InvalidConfig, "config plans no run " + run_id);
    } else {
        if (index >= specs.size()) throw Error(ErrorCode::InvalidConfig, "run index out of range");
        spec = &specs[index];
    }
    const auto in = load_inputs(cfg, spec->subtask);
    std::optional<ReasoningStore> reasoning;
    if (spec->strategy.uses_reasoning()) reasoning = ReasoningStore::load(reasoning_path(&cfg, {}));
    const auto prompts = render_run_prompts(*spec, in.view(reasoning ? &*reasoning : nullptr));
    for (const auto& p : prompts) {
        if (!instance.empty() && p.target_id != instance) continue;
        std::cout << "=== " << spec->run_id << " " << spec->label() << " " << p.target_id << "\n" << p.text << "\n";
        if (!instance.empty()) return 0;
    }
    if (!instance.empty()) throw Error(ErrorCode::UnknownInstance, instance);
    return 0;
}

int cmd_plan(const Globals& g) {
    std::size_t i = 0;
    for (const auto& spec : plan_for(g, need_config(g))) {
        std::cout << i++ << "  " << spec.run_id << "  " << to_string(spec.subtask) << "  " << spec.label() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Brain-teaser evaluation harness"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "Experiment config file");
    app.add_option("--cache-dir", g.cache_dir, "Completion cache directory")->capture_default_str();
    app.add_option("--out-dir", g.out_dir, "Runs root")->capture_default_str();
    app.add_option("--provider", g.provider, "mock, replay, or a provider profile file");
    app.add_option("--max-in-flight", g.max_in_flight, "Concurrent provider requests")->check(CLI::PositiveNumber);
    app.add_option("--rpm", g.rpm, "Provider requests per minute")->check(CLI::PositiveNumber);

    std::function<int()> action;

    std::string subtask, role, in, out, provider_arg = "lexical-hash", model, auth_env, generator, store, file;
    std::string run_dir, predictions, test, dest = "reports", run_id, instance;
    bool derive = false, dry_run = false;
    std::size_t batch = 32, max_length = 4000, index = 0;
    std::optional<std::size_t> limit;
    std::vector<std::string> only;

    auto* ingest = app.add_subcommand("ingest", "Validate a split and write it in canonical form");
    ingest->add_option("--subtask", subtask)->required();
    ingest->add_option("--role", role)->required();
    ingest->add_option("--in", in)->required()->check(CLI::ExistingFile);
    ingest->add_option("--out", out, "Canonical JSON-Lines output");
    ingest->add_flag("--derive-group-from-id", derive, "Group ids from _SR/_CR suffixes");
    ingest->callback([&] { action = [&] { return cmd_ingest(subtask, role, in, out, derive); }; });

    auto* embed = app.add_subcommand("embed", "Build an embedding store for one split");
    embed->add_option("--subtask", subtask)->required();
    embed->add_option("--role", role)->required();
    embed->add_option("--in", in, "Split file (default: from --config)");
    embed->add_option("--provider", provider_arg, "lexical-hash, an http(s) endpoint, or a precomputed file")
        ->capture_default_str();
    embed->add_option("--model", model, "Model tag for an http provider");
    embed->add_option("--auth-env", auth_env, "Variable holding the http provider's key");
    embed->add_option("--batch", batch)->capture_default_str();
    embed->add_option("--out", out)->required();
    embed->callback([&] {
        action = [&] { return cmd_embed(g, subtask, role, in, provider_arg, model, auth_env, batch, out); };
    });

    auto* gen = app.add_subcommand("gen-reasoning", "Generate rationales for a train split");
    gen->add_option("--subtask", subtask)->required();
    gen->add_option("--generator", generator, "Generator tag")->required();
    gen->add_option("--provider", g.provider, "mock, replay, or a provider profile file");
    gen->add_option("--store", store, "Reasoning store (default: from --config)");
    gen->add_option("--max-length", max_length)->capture_default_str();
    gen->callback([&] { action = [&] { return cmd_gen_reasoning(g, subtask, generator, store, max_length); }; });

    auto* imp = app.add_subcommand("import-reasoning", "Import externally produced rationales");
    imp->add_option("--file", file)->required()->check(CLI::ExistingFile);
    imp->add_option("--generator", generator)->required();
    imp->add_option("--store", store, "Reasoning store (default: from --config)");
    imp->callback([&] { action = [&] { return cmd_import_reasoning(g, file, generator, store); }; });

    auto* plan = app.add_subcommand("plan", "List the runs a config expands to");
    plan->callback([&] { action = [&] { return cmd_plan(g); }; });

    auto* run = app.add_subcommand("run", "Execute (or resume) every planned run");
    run->add_option("--limit", limit, "Stop each run after this many new instances");
    run->add_option("--only", only, "Restrict to these run ids");
    run->callback([&] { action = [&] { return cmd_run(g, limit, only); }; });

    auto* score = app.add_subcommand("score", "Score a finished run or a predictions file");
    score->add_option("--run", run_dir, "Run directory");
    score->add_option("--predictions", predictions);
    score->add_option("--test", test, "Test split (default: from --config)");
    score->add_option("--subtask", subtask);
    score->callback([&] { action = [&] { return cmd_score(g, run_dir, predictions, test, subtask); }; });

    auto* report = app.add_subcommand("report", "Emit tables and plot data for finished runs");
    report->add_option("--dest", dest)->capture_default_str();
    report->callback([&] { action = [&] { return cmd_report(g, dest); }; });

    auto* render = app.add_subcommand("render", "Print the prompts of a planned run");
    render->add_flag("--dry-run", dry_run, "Render only; never contacts a provider")->required();
    render->add_option("--run-id", run_id);
    render->add_option("--index", index, "Position in the plan")->capture_default_str();
    render->add_option("--instance", instance, "Only this test instance");
    render->callback([&] { action = [&] { return cmd_render(g, run_id, index, instance); }; });

    CLI11_PARSE(app, argc, argv);
    try {
        return action();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
