#pragma once

#include <string>
#include <utility>
#include <vector>

namespace teaser::detail {

struct HttpResult {
    int status = 0;  // 0 when no response arrived
    bool timed_out = false;
    std::string body;
    std::string error;
};

/// POST a JSON body to base_url + path. Never throws for transport errors.
HttpResult http_post_json(const std::string& base_url, const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& headers,
                          const std::string& body, int timeout_ms);

}  // namespace teaser::detail
