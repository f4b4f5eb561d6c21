#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "http_client.hpp"

#include <httplib.h>

namespace teaser::detail {

HttpResult http_post_json(const std::string& base_url, const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& headers,
                          const std::string& body, int timeout_ms) {
    HttpResult result;
    httplib::Client client(base_url);
    if (!client.is_valid()) {
        result.error = "invalid base url " + base_url;
        return result;
    }
    const auto sec = timeout_ms / 1000;
    const auto usec = (timeout_ms % 1000) * 1000;
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);

    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);

    auto res = client.Post(path, hdrs, body, "application/json");
    if (!res) {
        const auto err = res.error();
        result.timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                           err == httplib::Error::Write;
        result.error = httplib::to_string(err);
        return result;
    }
    result.status = res->status;
    result.body = res->body;
    return result;
}

}  // namespace teaser::detail
