#pragma once

#include <string>
#include <string_view>

#include "ragrade/error.hpp"

namespace ragrade::detail {

// "http://host:port/path" split into the origin httplib::Client takes and
// the request path.
struct SplitUrl {
  std::string origin;
  std::string path;
};

inline SplitUrl split_url(std::string_view url) {
  const auto scheme = url.find("://");
  if (scheme == std::string_view::npos) {
    throw Error(ErrorCode::InvalidConfig, "endpoint URL lacks a scheme: " + std::string(url));
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, slash)), std::string(url.substr(slash))};
}

}  // namespace ragrade::detail
