#pragma once

#include <ctime>
#include <iomanip>
#include <sstream>
#include <string>

namespace teaser::detail {

inline std::string utc_timestamp() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

}  // namespace teaser::detail
