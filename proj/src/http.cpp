#include "ras/http.hpp"

#include <httplib.h>

#include "ras/error.hpp"

namespace ras::http {

namespace {

struct UrlParts {
  std::string origin; // scheme://host[:port]
  std::string path;
};

UrlParts split_url(const std::string &url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw InvalidArgument("URL lacks a scheme: " + url);
  const auto path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos)
    return {url, "/"};
  return {url.substr(0, path_begin), url.substr(path_begin)};
}

} // namespace

Response post_json(const std::string &url, const std::string &body,
                   const Headers &headers, int timeout_seconds) {
  const UrlParts parts = split_url(url);
  httplib::Client client(parts.origin);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  client.set_write_timeout(timeout_seconds, 0);

  httplib::Headers hdrs;
  for (const auto &[k, v] : headers)
    hdrs.emplace(k, v);

  Response out;
  auto res = client.Post(parts.path, hdrs, body, "application/json");
  if (!res) {
    out.error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  return out;
}

} // namespace ras::http
