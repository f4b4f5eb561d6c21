#include "teaser/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <nlohmann/json.hpp>

#include "teaser/digest.hpp"
#include "teaser/error.hpp"
#include "teaser/jsonl.hpp"

namespace teaser {

namespace {

bool all_zero(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

}  // namespace

std::string_view to_string(ExemplarOrder o) noexcept {
    return o == ExemplarOrder::most_similar_first ? "most_similar_first" : "most_similar_last";
}

void EmbeddingStore::add(EmbeddingRecord record) {
    if (record.vector.empty() || record.dim != record.vector.size()) {
        throw Error(ErrorCode::DimensionMismatch, "record " + record.instance_id + " has dim " +
                                                      std::to_string(record.dim) + " but " +
                                                      std::to_string(record.vector.size()) + " values");
    }
    if (all_zero(record.vector)) throw Error(ErrorCode::ZeroVector, record.instance_id);
    if (records_.empty() && provider_tag_.empty() && dim_ == 0) {
        provider_tag_ = record.provider_tag;
        dim_ = record.dim;
    }
    if (record.provider_tag != provider_tag_) {
        throw Error(ErrorCode::ProviderTagMismatch,
                    "store holds '" + provider_tag_ + "', record " + record.instance_id + " has '" +
                        record.provider_tag + "'");
    }
    if (record.dim != dim_) {
        throw Error(ErrorCode::DimensionMismatch, "store dim " + std::to_string(dim_) + ", record " +
                                                      record.instance_id + " dim " + std::to_string(record.dim));
    }
    std::string key = record.instance_id;
    if (!records_.emplace(std::move(key), std::move(record)).second) {
        throw Error(ErrorCode::DuplicateId, "embedding for " + key);
    }
}

const EmbeddingRecord* EmbeddingStore::find(std::string_view instance_id) const {
    auto it = records_.find(instance_id);
    return it == records_.end() ? nullptr : &it->second;
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
    std::vector<nlohmann::json> rows;
    rows.reserve(records_.size());
    for (const auto& [id, rec] : records_) {
        rows.push_back({{"instance_id", id}, {"provider_tag", rec.provider_tag}, {"vector", rec.vector}});
    }
    jsonl::write_all(path, rows);
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
    EmbeddingStore store;
    jsonl::for_each(path, [&](std::size_t line_no, const nlohmann::json& obj) {
        EmbeddingRecord rec;
        try {
            rec.instance_id = obj.at("instance_id").get<std::string>();
            rec.provider_tag = obj.at("provider_tag").get<std::string>();
            rec.vector = obj.at("vector").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::MalformedRecord,
                        path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        rec.dim = rec.vector.size();
        store.add(std::move(rec));
    });
    return store;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    // One pass; each sum still accumulates in index order.
    double dot = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    // Also catches vectors whose squares all underflow.
    if (aa == 0.0 || bb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
    const double sim = dot / (std::sqrt(aa) * std::sqrt(bb));
    return std::clamp(sim, -1.0, 1.0);
}

std::vector<std::string> top_n_similar(std::string_view query_id, std::span<const double> query_vec,
                                       const EmbeddingStore& store, const RetrievalConfig& cfg) {
    if (store.empty()) throw Error(ErrorCode::EmptyStore, "no vectors to retrieve from");
    if (query_vec.size() != store.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "query dim " + std::to_string(query_vec.size()) +
                                                      ", store dim " + std::to_string(store.dim()));
    }

    struct Scored {
        double sim;
        const std::string* id;
    };
    std::vector<Scored> scored;
    scored.reserve(store.size());
    for (const auto& [id, rec] : store.records()) {
        if (id == query_id) continue;
        scored.push_back({cosine_similarity(query_vec, rec.vector), &id});
    }

    const std::size_t keep = std::min(cfg.n, scored.size());
    auto better = [](const Scored& x, const Scored& y) {
        if (x.sim != y.sim) return x.sim > y.sim;
        return *x.id < *y.id;
    };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), better);

    std::vector<std::string> out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) out.push_back(*scored[i].id);
    return out;
}

std::vector<std::string> order_for_prompt(std::vector<std::string> ranked, ExemplarOrder order) {
    if (order == ExemplarOrder::most_similar_last) std::reverse(ranked.begin(), ranked.end());
    return ranked;
}

PrecomputedEmbeddingProvider::PrecomputedEmbeddingProvider(const std::filesystem::path& path)
    : store_(EmbeddingStore::load(path)) {}

std::vector<std::vector<double>> PrecomputedEmbeddingProvider::embed(std::span<const IdText> texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& [id, text] : texts) {
        const EmbeddingRecord* rec = store_.find(id);
        if (!rec) throw Error(ErrorCode::ProviderUnavailable, "no precomputed vector for " + id);
        out.push_back(rec->vector);
    }
    return out;
}

std::vector<std::vector<double>> LexicalHashEmbeddingProvider::embed(std::span<const IdText> texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& [id, text] : texts) {
        std::vector<double> v(dim_, 0.0);
        std::string token;
        auto flush = [&] {
            if (token.empty()) return;
            // First 8 hex digits of the token digest pick the bucket.
            const std::string h = sha256_hex(token);
            const auto bucket = std::stoull(h.substr(0, 8), nullptr, 16) % dim_;
            v[bucket] += 1.0;
            token.clear();
        };
        for (unsigned char c : text) {
            if (std::isalnum(c)) {
                token.push_back(static_cast<char>(std::tolower(c)));
            } else {
                flush();
            }
        }
        flush();
        if (all_zero(v)) v[0] = 1.0;
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<EmbeddingRecord> embed_questions(EmbeddingProvider& provider, std::span<const IdText> texts) {
    if (texts.empty()) return {};
    auto vectors = provider.embed(texts);
    if (vectors.size() != texts.size()) {
        throw Error(ErrorCode::ProviderUnavailable, "provider returned " + std::to_string(vectors.size()) +
                                                        " vectors for " + std::to_string(texts.size()) + " inputs");
    }
    const std::string tag = provider.tag();
    const std::size_t dim = vectors.front().size();
    std::vector<EmbeddingRecord> records;
    records.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (vectors[i].size() != dim || dim == 0) {
            throw Error(ErrorCode::DimensionMismatch, texts[i].first + " has dim " +
                                                          std::to_string(vectors[i].size()) + ", expected " +
                                                          std::to_string(dim));
        }
        records.push_back({texts[i].first, std::move(vectors[i]), tag, dim});
    }
    return records;
}

}  // namespace teaser
