#pragma once

// Thin wrapper over the vendored HTTP client so that only one translation
// unit pays for including it.

#include <string>
#include <utility>
#include <vector>

namespace ras::http {

struct Response {
  int status = 0;
  std::string body;
  std::string error; // transport error, empty when a response was received
};

using Headers = std::vector<std::pair<std::string, std::string>>;

/// POSTs `body` to an absolute http(s) URL.
Response post_json(const std::string &url, const std::string &body,
                   const Headers &headers, int timeout_seconds);

} // namespace ras::http
