#pragma once

#include "trendlens/error.hpp"

#include <string>
#include <string_view>
#include <utility>

namespace trendlens::detail {

/// "http://host:port/path" -> {"http://host:port", "/path"}.
inline std::pair<std::string, std::string> split_url(std::string_view url) {
    const auto scheme = url.find("://");
    if (scheme == std::string_view::npos) {
        throw ValidationError("url must carry a scheme: '" + std::string(url) + "'");
    }
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string_view::npos) {
        return {std::string(url), "/"};
    }
    return {std::string(url.substr(0, slash)), std::string(url.substr(slash))};
}

/// Joins a base path and an endpoint without doubling the slash.
inline std::string join_path(std::string_view base, std::string_view endpoint) {
    std::string out(base);
    while (!out.empty() && out.back() == '/') {
        out.pop_back();
    }
    return out + std::string(endpoint);
}

}  // namespace trendlens::detail
