#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "teaser/dataset.hpp"
#include "teaser/prompt.hpp"

namespace teaser {

/// Decoding parameters. Defaults: temperature 0.1, top_p 1, top_k 1.
struct GenerationParams {
    double temperature = 0.1;
    double top_p = 1.0;
    int top_k = 1;
    int max_output_tokens = 1024;
    std::string provider_model;

    void validate() const;
    nlohmann::json to_json() const;
    static GenerationParams from_json(const nlohmann::json& j);

    bool operator==(const GenerationParams&) const = default;
};

struct Completion {
    std::string prompt_hash;
    std::string text;
    int attempts = 1;
    bool from_cache = false;
    std::int64_t latency_ms = 0;
};

enum class ProviderKind { http, mock, replay };

std::string_view to_string(ProviderKind k) noexcept;

struct ProviderProfile {
    std::string name = "mock";
    ProviderKind kind = ProviderKind::mock;

    // http
    std::string base_url;
    std::string path = "/generate";
    std::string auth_env;
    std::string auth_header = "Authorization";
    std::string auth_prefix = "Bearer ";
    /// Request body with "${prompt}", "${temperature}", "${top_p}", "${top_k}",
    /// "${max_output_tokens}", "${model}" string leaves replaced by typed values.
    nlohmann::json request_template;
    /// JSON pointer to the generated text in the response body.
    std::string response_pointer = "/text";
    bool supports_top_k = true;
    int timeout_ms = 60000;

    // mock
    std::string mock_reply = "Option 1";
    /// Test splits whose gold labels the mock answers with. Relative paths in
    /// a profile file resolve against the file's directory.
    std::vector<std::string> answer_keys;

    // dispatch
    double requests_per_minute = 60.0;
    int max_retries = 3;
    /// Delay before retry i (clamped to the last entry).
    std::vector<int> backoff_ms = {500, 1000, 2000};
    int max_in_flight = 4;

    void validate() const;
    nlohmann::json to_json() const;
    static ProviderProfile from_json(const nlohmann::json& j);
    static ProviderProfile load(const std::filesystem::path& path);
};

/// Hex SHA-256 over a canonical encoding of prompt, params and model. A
/// non-empty `salt` marks deliberate re-asks of the same prompt.
std::string cache_key(std::string_view prompt_text, const GenerationParams& params,
                      std::string_view provider_model, std::string_view salt = {});

struct CachedCompletion {
    std::string key;
    std::string prompt;
    nlohmann::json params;
    std::string provider_model;
    std::string response;
    std::string created_at;
};

/// Directory of digest-named records: <root>/<first 2 hex>/<digest>.json.
/// Writes go through a temp file and rename, so readers never see a torn
/// record.
class CompletionCache {
public:
    explicit CompletionCache(std::filesystem::path root);

    std::optional<CachedCompletion> lookup(const std::string& key) const;
    void store(const CachedCompletion& entry);
    std::filesystem::path path_for(const std::string& key) const;
    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
};

using SteadyClock = std::chrono::steady_clock;

/// Waits so that at most `requests_per_minute` grants fall in any 60 s
/// window. Shared by all workers of a gateway.
class RateLimiter {
public:
    using NowFn = std::function<SteadyClock::time_point()>;
    using SleepFn = std::function<void(SteadyClock::duration)>;

    explicit RateLimiter(double requests_per_minute, NowFn now = {}, SleepFn sleep = {});

    /// Blocks until a request may be sent; returns the grant time.
    SteadyClock::time_point acquire();

private:
    std::size_t capacity_;
    SteadyClock::duration window_;
    NowFn now_;
    SleepFn sleep_;
    std::mutex mu_;
    std::deque<SteadyClock::time_point> grants_;
};

struct BackendRequest {
    std::string prompt;
    GenerationParams params;
};

/// HTTP-style outcome. 200 is success; 429 and 5xx are retried; 0 means
/// the call timed out; other statuses fail immediately.
struct BackendReply {
    int status = 200;
    std::string text;
    std::string error;
};

class TextBackend {
public:
    virtual ~TextBackend() = default;
    virtual BackendReply complete(const BackendRequest& request) = 0;
};

/// Generic JSON-over-HTTP provider driven by a profile.
class HttpJsonBackend final : public TextBackend {
public:
    explicit HttpJsonBackend(ProviderProfile profile);
    BackendReply complete(const BackendRequest& request) override;

    nlohmann::json build_request_body(const BackendRequest& request) const;

private:
    ProviderProfile profile_;
    std::once_flag top_k_notice_;
};

/// Scripted answers for tests and offline dry runs.
class ScriptedBackend final : public TextBackend {
public:
    using Script = std::function<BackendReply(const BackendRequest&)>;
    explicit ScriptedBackend(Script script) : script_(std::move(script)) {}
    BackendReply complete(const BackendRequest& request) override {
        ++calls_;
        return script_(request);
    }
    std::size_t calls() const { return calls_.load(); }

private:
    Script script_;
    std::atomic<std::size_t> calls_{0};
};

/// The question text after the last "Question: " line of an evaluation
/// prompt, or empty.
std::string target_question_of(std::string_view prompt);

/// Replies "Option k" with the gold option of whichever instance's
/// question the prompt targets; unknown questions get a refusal.
std::unique_ptr<ScriptedBackend> make_answer_key_backend(const DatasetSplit& split);

std::unique_ptr<ScriptedBackend> make_constant_backend(std::string reply);

struct GatewayStats {
    std::size_t backend_calls = 0;
    std::size_t cache_hits = 0;
    std::size_t cache_misses = 0;
    std::size_t retries = 0;
    std::size_t max_in_flight_observed = 0;

    nlohmann::json to_json() const;
};

struct GatewayHooks {
    RateLimiter::NowFn now;
    RateLimiter::SleepFn sleep;
};

/// Cache-first, rate-limited, retrying front door to one provider. Safe to
/// call from many threads.
class ProviderGateway {
public:
    /// `backend` may be null only for replay profiles. `cache` may be null to
    /// disable caching (not allowed for replay).
    ProviderGateway(ProviderProfile profile, std::shared_ptr<TextBackend> backend,
                    std::shared_ptr<CompletionCache> cache, GatewayHooks hooks = {});

    Completion generate(const RenderedPrompt& prompt, const GenerationParams& params, std::string_view salt = {});
    Completion generate_text(std::string_view prompt_text, const GenerationParams& params,
                             std::string_view salt = {});

    /// Throws AuthMissing when the profile names an unset variable.
    void check_auth() const;

    GatewayStats stats() const;
    const ProviderProfile& profile() const { return profile_; }

private:
    Completion call_with_retries(const std::string& key, std::string_view prompt_text,
                                 const GenerationParams& params);
    std::shared_ptr<std::mutex> key_lock(const std::string& key);

    ProviderProfile profile_;
    std::shared_ptr<TextBackend> backend_;
    std::shared_ptr<CompletionCache> cache_;
    RateLimiter::SleepFn sleep_;
    RateLimiter limiter_;

    std::mutex flight_mu_;
    std::condition_variable flight_cv_;
    int in_flight_ = 0;

    std::mutex keys_mu_;
    std::map<std::string, std::weak_ptr<std::mutex>> key_locks_;

    mutable std::mutex stats_mu_;
    GatewayStats stats_;
};

/// Builds a gateway for `profile`: HTTP backend, answer-key/constant mock,
/// or cache-only replay.
std::unique_ptr<ProviderGateway> make_gateway(const ProviderProfile& profile,
                                              std::shared_ptr<CompletionCache> cache);

/// "mock", "replay", or a path to a profile JSON file.
ProviderProfile resolve_profile(std::string_view name_or_path);

}  // namespace teaser
