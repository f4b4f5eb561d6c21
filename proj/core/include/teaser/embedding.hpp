#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace teaser {

struct EmbeddingRecord {
    std::string instance_id;
    std::vector<double> vector;
    std::string provider_tag;
    std::size_t dim = 0;

    bool operator==(const EmbeddingRecord&) const = default;
};

/// Vectors from a single provider, all of one dimension. Immutable once
/// built; queries are safe from any number of threads.
class EmbeddingStore {
public:
    EmbeddingStore() = default;
    EmbeddingStore(std::string provider_tag, std::size_t dim)
        : provider_tag_(std::move(provider_tag)), dim_(dim) {}

    /// The first record fixes tag and dim for an empty, untagged store.
    /// Throws DimensionMismatch, ProviderTagMismatch, ZeroVector, DuplicateId.
    void add(EmbeddingRecord record);

    const EmbeddingRecord* find(std::string_view instance_id) const;
    const std::map<std::string, EmbeddingRecord, std::less<>>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    const std::string& provider_tag() const { return provider_tag_; }
    std::size_t dim() const { return dim_; }

    /// JSON-Lines of {instance_id, provider_tag, vector}, ascending id.
    void save(const std::filesystem::path& path) const;
    static EmbeddingStore load(const std::filesystem::path& path);

private:
    std::string provider_tag_;
    std::size_t dim_ = 0;
    std::map<std::string, EmbeddingRecord, std::less<>> records_;
};

enum class ExemplarOrder { most_similar_first, most_similar_last };

std::string_view to_string(ExemplarOrder o) noexcept;

struct RetrievalConfig {
    std::size_t n = 1;
    ExemplarOrder order_in_prompt = ExemplarOrder::most_similar_first;
};

/// dot(a, b) / (|a| |b|). Throws DimensionMismatch or ZeroVector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Ids of the `cfg.n` most similar store entries, similarity descending,
/// ties by ascending instance id. `query_id` itself is never returned.
/// Throws EmptyStore.
std::vector<std::string> top_n_similar(std::string_view query_id, std::span<const double> query_vec,
                                       const EmbeddingStore& store, const RetrievalConfig& cfg);

/// Reorders a top_n_similar result for prompt placement.
std::vector<std::string> order_for_prompt(std::vector<std::string> ranked, ExemplarOrder order);

using IdText = std::pair<std::string, std::string>;

/// Anything that turns question texts into vectors. Pooling is the
/// provider's business.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string tag() const = 0;
    /// One vector per input, same order. Throws ProviderUnavailable.
    virtual std::vector<std::vector<double>> embed(std::span<const IdText> texts) = 0;
};

/// Serves vectors from a precomputed JSON-Lines file, keyed by instance id.
class PrecomputedEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit PrecomputedEmbeddingProvider(const std::filesystem::path& path);
    std::string tag() const override { return store_.provider_tag(); }
    std::vector<std::vector<double>> embed(std::span<const IdText> texts) override;

private:
    EmbeddingStore store_;
};

/// Deterministic hashed bag-of-words vectors. No model, no network; useful
/// for dry runs and for exercising dynamic selection offline.
class LexicalHashEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit LexicalHashEmbeddingProvider(std::size_t dim = 256) : dim_(dim) {}
    std::string tag() const override { return "lexical-hash-" + std::to_string(dim_); }
    std::vector<std::vector<double>> embed(std::span<const IdText> texts) override;

private:
    std::size_t dim_;
};

struct HttpEmbeddingConfig {
    std::string base_url;  // scheme://host[:port]
    std::string path = "/embed";
    std::string model_tag;
    std::string auth_env;  // empty: no auth header
    std::string auth_header = "Authorization";
    std::string auth_prefix = "Bearer ";
    std::size_t batch_size = 32;
    int timeout_ms = 60000;
};

/// POSTs {"model": tag, "inputs": [texts...]} and expects
/// {"embeddings": [[...], ...]} back.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(HttpEmbeddingConfig config) : config_(std::move(config)) {}
    std::string tag() const override { return config_.model_tag; }
    std::vector<std::vector<double>> embed(std::span<const IdText> texts) override;

private:
    HttpEmbeddingConfig config_;
};

/// Embeds every (id, text) pair and returns one record each, input order.
/// Throws DimensionMismatch when the provider is inconsistent.
std::vector<EmbeddingRecord> embed_questions(EmbeddingProvider& provider, std::span<const IdText> texts);

}  // namespace teaser
