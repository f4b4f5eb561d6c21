#include "teaser/provider.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "http_client.hpp"
#include "timestamp.hpp"
#include "teaser/digest.hpp"
#include "teaser/error.hpp"
#include "teaser/jsonl.hpp"

namespace teaser {

namespace fs = std::filesystem;

namespace {

bool is_retryable(int status) { return status == 429 || status >= 500 || status <= 0; }

}  // namespace

// ---------------------------------------------------------------- params

void GenerationParams::validate() const {
    if (!(temperature >= 0.0)) throw Error(ErrorCode::InvalidConfig, "temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw Error(ErrorCode::InvalidConfig, "top_p must be in (0, 1]");
    if (top_k < 1) throw Error(ErrorCode::InvalidConfig, "top_k must be >= 1");
    if (max_output_tokens < 1) throw Error(ErrorCode::InvalidConfig, "max_output_tokens must be >= 1");
}

nlohmann::json GenerationParams::to_json() const {
    return {{"temperature", temperature},
            {"top_p", top_p},
            {"top_k", top_k},
            {"max_output_tokens", max_output_tokens},
            {"provider_model", provider_model}};
}

GenerationParams GenerationParams::from_json(const nlohmann::json& j) {
    GenerationParams p;
    p.temperature = j.value("temperature", p.temperature);
    p.top_p = j.value("top_p", p.top_p);
    p.top_k = j.value("top_k", p.top_k);
    p.max_output_tokens = j.value("max_output_tokens", p.max_output_tokens);
    p.provider_model = j.value("provider_model", p.provider_model);
    p.validate();
    return p;
}

// ---------------------------------------------------------------- profile

std::string_view to_string(ProviderKind k) noexcept {
    switch (k) {
        case ProviderKind::http: return "http";
        case ProviderKind::mock: return "mock";
        case ProviderKind::replay: return "replay";
    }
    return "mock";
}

void ProviderProfile::validate() const {
    if (name.empty()) throw Error(ErrorCode::InvalidConfig, "provider profile needs a name");
    if (!(requests_per_minute > 0.0)) throw Error(ErrorCode::InvalidConfig, "rate limit must be > 0");
    if (max_retries < 0) throw Error(ErrorCode::InvalidConfig, "max_retries must be >= 0");
    if (max_in_flight < 1) throw Error(ErrorCode::InvalidConfig, "max_in_flight must be >= 1");
    if (kind == ProviderKind::http && base_url.empty()) {
        throw Error(ErrorCode::InvalidConfig, "http profile '" + name + "' needs base_url");
    }
}

nlohmann::json ProviderProfile::to_json() const {
    nlohmann::json j = {{"name", name},
                        {"kind", to_string(kind)},
                        {"requests_per_minute", requests_per_minute},
                        {"max_retries", max_retries},
                        {"backoff_ms", backoff_ms},
                        {"max_in_flight", max_in_flight}};
    if (kind == ProviderKind::http) {
        j["base_url"] = base_url;
        j["path"] = path;
        j["auth_env"] = auth_env;
        j["auth_header"] = auth_header;
        j["auth_prefix"] = auth_prefix;
        j["request_template"] = request_template;
        j["response_pointer"] = response_pointer;
        j["supports_top_k"] = supports_top_k;
        j["timeout_ms"] = timeout_ms;
    } else if (kind == ProviderKind::mock) {
        j["mock_reply"] = mock_reply;
        j["answer_keys"] = answer_keys;
    }
    return j;
}

ProviderProfile ProviderProfile::from_json(const nlohmann::json& j) {
    ProviderProfile p;
    try {
        p.name = j.value("name", p.name);
        const std::string kind = j.value("kind", std::string("http"));
        if (kind == "http") {
            p.kind = ProviderKind::http;
        } else if (kind == "mock") {
            p.kind = ProviderKind::mock;
        } else if (kind == "replay") {
            p.kind = ProviderKind::replay;
        } else {
            throw Error(ErrorCode::InvalidConfig, "unknown provider kind '" + kind + "'");
        }
        p.base_url = j.value("base_url", p.base_url);
        p.path = j.value("path", p.path);
        p.auth_env = j.value("auth_env", p.auth_env);
        p.auth_header = j.value("auth_header", p.auth_header);
        p.auth_prefix = j.value("auth_prefix", p.auth_prefix);
        if (j.contains("request_template")) p.request_template = j.at("request_template");
        p.response_pointer = j.value("response_pointer", p.response_pointer);
        p.supports_top_k = j.value("supports_top_k", p.supports_top_k);
        p.timeout_ms = j.value("timeout_ms", p.timeout_ms);
        p.mock_reply = j.value("mock_reply", p.mock_reply);
        if (j.contains("answer_key")) p.answer_keys = {j.at("answer_key").get<std::string>()};
        if (j.contains("answer_keys")) p.answer_keys = j.at("answer_keys").get<std::vector<std::string>>();
        p.requests_per_minute = j.value("requests_per_minute", p.requests_per_minute);
        p.max_retries = j.value("max_retries", p.max_retries);
        p.backoff_ms = j.value("backoff_ms", p.backoff_ms);
        p.max_in_flight = j.value("max_in_flight", p.max_in_flight);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("provider profile: ") + e.what());
    }
    p.validate();
    return p;
}

ProviderProfile ProviderProfile::load(const fs::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(jsonl::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
    }
    ProviderProfile p = from_json(j);
    for (auto& key : p.answer_keys) {
        if (fs::path(key).is_relative()) key = (path.parent_path() / key).lexically_normal().string();
    }
    return p;
}

// ---------------------------------------------------------------- cache

std::string cache_key(std::string_view prompt_text, const GenerationParams& params,
                      std::string_view provider_model, std::string_view salt) {
    // Field order is fixed by nlohmann's sorted object keys; doubles print
    // as shortest round-trip decimals.
    nlohmann::json canon = {
        {"v", 1},
        {"prompt", prompt_text},
        {"model", provider_model},
        {"temperature", params.temperature},
        {"top_p", params.top_p},
        {"top_k", params.top_k},
        {"max_output_tokens", params.max_output_tokens},
    };
    if (!salt.empty()) canon["salt"] = salt;
    return sha256_hex(canon.dump());
}

CompletionCache::CompletionCache(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

fs::path CompletionCache::path_for(const std::string& key) const {
    return root_ / key.substr(0, 2) / (key + ".json");
}

std::optional<CachedCompletion> CompletionCache::lookup(const std::string& key) const {
    const fs::path p = path_for(key);
    std::error_code ec;
    if (!fs::exists(p, ec)) return std::nullopt;
    try {
        const auto j = nlohmann::json::parse(jsonl::read_file(p));
        CachedCompletion c;
        c.key = j.at("key").get<std::string>();
        if (c.key != key) return std::nullopt;
        c.prompt = j.value("prompt", std::string());
        c.params = j.value("params", nlohmann::json::object());
        c.provider_model = j.value("provider_model", std::string());
        c.response = j.at("response").get<std::string>();
        c.created_at = j.value("created_at", std::string());
        return c;
    } catch (const std::exception&) {
        // An unreadable record is a miss; the next store overwrites it.
        return std::nullopt;
    }
}

void CompletionCache::store(const CachedCompletion& entry) {
    nlohmann::json j = {{"key", entry.key},
                        {"prompt", entry.prompt},
                        {"params", entry.params},
                        {"provider_model", entry.provider_model},
                        {"response", entry.response},
                        {"created_at", entry.created_at}};
    const fs::path p = path_for(entry.key);
    // Unique temp name per thread so concurrent writers never share a file.
    std::ostringstream tmp_name;
    tmp_name << p.filename().string() << ".tmp." << std::this_thread::get_id();
    const fs::path tmp = p.parent_path() / tmp_name.str();
    fs::create_directories(p.parent_path());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        out << j.dump(2) << '\n';
    }
    fs::rename(tmp, p);
}

// ---------------------------------------------------------------- limiter

RateLimiter::RateLimiter(double requests_per_minute, NowFn now, SleepFn sleep)
    : now_(now ? std::move(now) : NowFn([] { return SteadyClock::now(); })),
      sleep_(sleep ? std::move(sleep) : SleepFn([](SteadyClock::duration d) { std::this_thread::sleep_for(d); })) {
    if (!(requests_per_minute > 0.0)) throw Error(ErrorCode::InvalidConfig, "rate limit must be > 0");
    // Fractional limits (e.g. 0.5/min) become 1 request per 120 s.
    if (requests_per_minute >= 1.0) {
        capacity_ = static_cast<std::size_t>(std::floor(requests_per_minute));
        window_ = std::chrono::minutes(1);
    } else {
        capacity_ = 1;
        window_ = std::chrono::duration_cast<SteadyClock::duration>(
            std::chrono::duration<double>(60.0 / requests_per_minute));
    }
}

SteadyClock::time_point RateLimiter::acquire() {
    std::unique_lock lock(mu_);
    for (;;) {
        const auto now = now_();
        while (!grants_.empty() && grants_.front() + window_ <= now) grants_.pop_front();
        if (grants_.size() < capacity_) {
            grants_.push_back(now);
            return now;
        }
        const auto wait = grants_.front() + window_ - now;
        lock.unlock();
        sleep_(wait);
        lock.lock();
    }
}

// ---------------------------------------------------------------- backends

HttpJsonBackend::HttpJsonBackend(ProviderProfile profile) : profile_(std::move(profile)) {
    if (profile_.request_template.is_null()) {
        profile_.request_template = {{"model", "${model}"},
                                     {"prompt", "${prompt}"},
                                     {"temperature", "${temperature}"},
                                     {"top_p", "${top_p}"},
                                     {"top_k", "${top_k}"},
                                     {"max_tokens", "${max_output_tokens}"}};
    }
}

nlohmann::json HttpJsonBackend::build_request_body(const BackendRequest& request) const {
    const GenerationParams& p = request.params;
    std::function<nlohmann::json(const nlohmann::json&)> subst = [&](const nlohmann::json& node) -> nlohmann::json {
        if (node.is_object()) {
            nlohmann::json out = nlohmann::json::object();
            for (const auto& [k, v] : node.items()) {
                if (v.is_string() && v.get<std::string>() == "${top_k}" && !profile_.supports_top_k) continue;
                out[k] = subst(v);
            }
            return out;
        }
        if (node.is_array()) {
            nlohmann::json out = nlohmann::json::array();
            for (const auto& v : node) out.push_back(subst(v));
            return out;
        }
        if (!node.is_string()) return node;
        const auto& s = node.get_ref<const std::string&>();
        if (s == "${prompt}") return request.prompt;
        if (s == "${temperature}") return p.temperature;
        if (s == "${top_p}") return p.top_p;
        if (s == "${top_k}") return p.top_k;
        if (s == "${max_output_tokens}") return p.max_output_tokens;
        if (s == "${model}") return p.provider_model;
        return node;
    };
    return subst(profile_.request_template);
}

BackendReply HttpJsonBackend::complete(const BackendRequest& request) {
    if (!profile_.supports_top_k) {
        std::call_once(top_k_notice_, [&] {
            std::cerr << "notice: provider '" << profile_.name << "' does not accept top_k; dropping top_k="
                      << request.params.top_k << "\n";
        });
    }
    std::vector<std::pair<std::string, std::string>> headers;
    if (!profile_.auth_env.empty()) {
        const char* secret = std::getenv(profile_.auth_env.c_str());
        if (secret == nullptr) throw Error(ErrorCode::AuthMissing, profile_.auth_env);
        headers.emplace_back(profile_.auth_header, profile_.auth_prefix + secret);
    }
    const auto http = detail::http_post_json(profile_.base_url, profile_.path, headers,
                                             build_request_body(request).dump(), profile_.timeout_ms);
    BackendReply reply;
    if (http.status == 0) {
        reply.status = http.timed_out ? 0 : -1;
        reply.error = http.error;
        return reply;
    }
    reply.status = http.status;
    if (http.status != 200) {
        reply.error = http.body.substr(0, 512);
        return reply;
    }
    try {
        const auto body = nlohmann::json::parse(http.body);
        reply.text = body.at(nlohmann::json::json_pointer(profile_.response_pointer)).get<std::string>();
    } catch (const std::exception& e) {
        reply.status = 502;
        reply.error = std::string("unexpected response shape: ") + e.what();
    }
    return reply;
}

std::string target_question_of(std::string_view prompt) {
    constexpr std::string_view kQ = "Question: ";
    constexpr std::string_view kC = "\nChoices: ";
    std::size_t at = prompt.rfind(std::string("\n").append(kQ));
    if (at == std::string_view::npos) {
        if (prompt.substr(0, kQ.size()) != kQ) return {};
        at = 0;
    } else {
        at += 1;
    }
    const std::size_t start = at + kQ.size();
    const std::size_t end = prompt.find(kC, start);
    if (end == std::string_view::npos) return {};
    return std::string(prompt.substr(start, end - start));
}

std::unique_ptr<ScriptedBackend> make_answer_key_backend(const DatasetSplit& split) {
    auto key = std::make_shared<std::map<std::string, int>>();
    for (const auto& inst : split.instances) (*key)[inst.question] = inst.label + 1;
    return std::make_unique<ScriptedBackend>([key](const BackendRequest& req) {
        auto it = key->find(target_question_of(req.prompt));
        if (it == key->end()) return BackendReply{200, "I cannot tell which option is correct.", {}};
        return BackendReply{200, "Option " + std::to_string(it->second), {}};
    });
}

std::unique_ptr<ScriptedBackend> make_constant_backend(std::string reply) {
    return std::make_unique<ScriptedBackend>(
        [reply = std::move(reply)](const BackendRequest&) { return BackendReply{200, reply, {}}; });
}

// ---------------------------------------------------------------- gateway

nlohmann::json GatewayStats::to_json() const {
    return {{"backend_calls", backend_calls},
            {"cache_hits", cache_hits},
            {"cache_misses", cache_misses},
            {"retries", retries}};
}

ProviderGateway::ProviderGateway(ProviderProfile profile, std::shared_ptr<TextBackend> backend,
                                 std::shared_ptr<CompletionCache> cache, GatewayHooks hooks)
    : profile_(std::move(profile)),
      backend_(std::move(backend)),
      cache_(std::move(cache)),
      sleep_(hooks.sleep ? hooks.sleep
                         : RateLimiter::SleepFn([](SteadyClock::duration d) { std::this_thread::sleep_for(d); })),
      limiter_(profile_.requests_per_minute, hooks.now, hooks.sleep) {
    profile_.validate();
    if (profile_.kind == ProviderKind::replay) {
        if (!cache_) throw Error(ErrorCode::InvalidConfig, "replay provider needs a cache directory");
    } else if (!backend_) {
        throw Error(ErrorCode::InvalidConfig, "provider '" + profile_.name + "' has no backend");
    }
}

void ProviderGateway::check_auth() const {
    if (profile_.kind == ProviderKind::http && !profile_.auth_env.empty() &&
        std::getenv(profile_.auth_env.c_str()) == nullptr) {
        throw Error(ErrorCode::AuthMissing, "environment variable " + profile_.auth_env + " is not set");
    }
}

GatewayStats ProviderGateway::stats() const {
    std::lock_guard lock(stats_mu_);
    return stats_;
}

std::shared_ptr<std::mutex> ProviderGateway::key_lock(const std::string& key) {
    std::lock_guard lock(keys_mu_);
    auto& weak = key_locks_[key];
    auto strong = weak.lock();
    if (!strong) {
        strong = std::make_shared<std::mutex>();
        weak = strong;
    }
    // Drop dead entries now and then so the map stays small.
    if (key_locks_.size() > 4096) {
        std::erase_if(key_locks_, [](const auto& kv) { return kv.second.expired(); });
    }
    return strong;
}

Completion ProviderGateway::generate(const RenderedPrompt& prompt, const GenerationParams& params,
                                     std::string_view salt) {
    return generate_text(prompt.text, params, salt);
}

Completion ProviderGateway::generate_text(std::string_view prompt_text, const GenerationParams& params,
                                          std::string_view salt) {
    if (prompt_text.empty()) throw Error(ErrorCode::ProviderError, "empty prompt");
    params.validate();
    check_auth();

    const std::string key = cache_key(prompt_text, params, params.provider_model, salt);
    auto lock_holder = key_lock(key);
    std::lock_guard key_guard(*lock_holder);

    if (cache_) {
        if (auto hit = cache_->lookup(key)) {
            std::lock_guard lock(stats_mu_);
            ++stats_.cache_hits;
            return Completion{key, hit->response, 1, true, 0};
        }
        std::lock_guard lock(stats_mu_);
        ++stats_.cache_misses;
    }
    if (profile_.kind == ProviderKind::replay) {
        throw Error(ErrorCode::CacheMiss, "replay provider has no completion for " + key);
    }

    Completion done = call_with_retries(key, prompt_text, params);
    if (cache_) {
        cache_->store(CachedCompletion{key, std::string(prompt_text), params.to_json(), params.provider_model,
                                       done.text, detail::utc_timestamp()});
    }
    return done;
}

Completion ProviderGateway::call_with_retries(const std::string& key, std::string_view prompt_text,
                                              const GenerationParams& params) {
    const BackendRequest request{std::string(prompt_text), params};
    const auto started = SteadyClock::now();
    BackendReply last;
    for (int attempt = 1; attempt <= profile_.max_retries + 1; ++attempt) {
        if (attempt > 1) {
            const auto& sched = profile_.backoff_ms;
            const int delay = sched.empty() ? 0 : sched[std::min<std::size_t>(attempt - 2, sched.size() - 1)];
            if (delay > 0) sleep_(std::chrono::milliseconds(delay));
            std::lock_guard lock(stats_mu_);
            ++stats_.retries;
        }
        limiter_.acquire();
        {
            std::unique_lock lock(flight_mu_);
            flight_cv_.wait(lock, [&] { return in_flight_ < profile_.max_in_flight; });
            ++in_flight_;
            std::lock_guard slock(stats_mu_);
            ++stats_.backend_calls;
            stats_.max_in_flight_observed =
                std::max(stats_.max_in_flight_observed, static_cast<std::size_t>(in_flight_));
        }
        try {
            last = backend_->complete(request);
        } catch (...) {
            {
                std::lock_guard lock(flight_mu_);
                --in_flight_;
            }
            flight_cv_.notify_one();
            throw;
        }
        {
            std::lock_guard lock(flight_mu_);
            --in_flight_;
        }
        flight_cv_.notify_one();

        if (last.status == 200) {
            const auto ms =
                std::chrono::duration_cast<std::chrono::milliseconds>(SteadyClock::now() - started).count();
            return Completion{key, std::move(last.text), attempt, false, ms};
        }
        if (!is_retryable(last.status)) break;
    }

    const std::string detail = last.error.empty() ? "" : (": " + last.error);
    if (last.status == 429) throw Error(ErrorCode::RateLimited, "retries exhausted" + detail);
    if (last.status == 0) throw Error(ErrorCode::Timeout, "retries exhausted" + detail);
    throw Error(ErrorCode::ProviderError, "status " + std::to_string(last.status) + detail);
}

std::unique_ptr<ProviderGateway> make_gateway(const ProviderProfile& profile, std::shared_ptr<CompletionCache> cache) {
    std::shared_ptr<TextBackend> backend;
    switch (profile.kind) {
        case ProviderKind::http:
            backend = std::make_shared<HttpJsonBackend>(profile);
            break;
        case ProviderKind::mock:
            if (!profile.answer_keys.empty()) {
                // Answer keys are test splits; each one's subtask is read from its records.
                DatasetSplit merged;
                for (const auto& path : profile.answer_keys) {
                    const auto rows = jsonl::read_all(path);
                    if (rows.empty()) throw Error(ErrorCode::InvalidConfig, "empty answer key " + path);
                    const auto subtask = parse_subtask(rows.front().value("subtask", std::string()));
                    if (!subtask) throw Error(ErrorCode::InvalidConfig, "answer key " + path + " has no subtask");
                    auto split = load_split(path, *subtask, Role::test);
                    for (auto& inst : split.instances) merged.instances.push_back(std::move(inst));
                }
                backend = make_answer_key_backend(merged);
            } else {
                backend = make_constant_backend(profile.mock_reply);
            }
            break;
        case ProviderKind::replay:
            break;
    }
    return std::make_unique<ProviderGateway>(profile, std::move(backend), std::move(cache));
}

ProviderProfile resolve_profile(std::string_view name_or_path) {
    if (name_or_path == "mock") return ProviderProfile{};
    if (name_or_path == "replay") {
        ProviderProfile p;
        p.name = "replay";
        p.kind = ProviderKind::replay;
        return p;
    }
    const fs::path path(name_or_path);
    if (!fs::exists(path)) {
        throw Error(ErrorCode::InvalidConfig, "unknown provider '" + std::string(name_or_path) +
                                                  "' (expected mock, replay, or a profile file)");
    }
    return ProviderProfile::load(path);
}

}  // namespace teaser
