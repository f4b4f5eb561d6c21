#include <algorithm>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "http_client.hpp"
#include "teaser/embedding.hpp"
#include "teaser/error.hpp"

namespace teaser {

std::vector<std::vector<double>> HttpEmbeddingProvider::embed(std::span<const IdText> texts) {
    std::vector<std::pair<std::string, std::string>> headers;
    if (!config_.auth_env.empty()) {
        const char* secret = std::getenv(config_.auth_env.c_str());
        if (secret == nullptr) throw Error(ErrorCode::AuthMissing, config_.auth_env);
        headers.emplace_back(config_.auth_header, config_.auth_prefix + secret);
    }
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    const std::size_t batch = std::max<std::size_t>(1, config_.batch_size);
    for (std::size_t begin = 0; begin < texts.size(); begin += batch) {
        const std::size_t end = std::min(texts.size(), begin + batch);
        nlohmann::json body = {{"model", config_.model_tag}, {"inputs", nlohmann::json::array()}};
        for (std::size_t i = begin; i < end; ++i) body["inputs"].push_back(texts[i].second);

        const auto http = detail::http_post_json(config_.base_url, config_.path, headers, body.dump(),
                                                 config_.timeout_ms);
        if (http.status != 200) {
            throw Error(ErrorCode::ProviderUnavailable,
                        config_.base_url + config_.path + ": " +
                            (http.status ? "status " + std::to_string(http.status) : http.error));
        }
        try {
            const auto reply = nlohmann::json::parse(http.body);
            const auto& vecs = reply.at("embeddings");
            if (vecs.size() != end - begin) {
                throw Error(ErrorCode::ProviderUnavailable, "embedding count does not match the batch");
            }
            for (const auto& v : vecs) out.push_back(v.get<std::vector<double>>());
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ProviderUnavailable, std::string("bad embedding response: ") + e.what());
        }
    }
    return out;
}

}  // namespace teaser
