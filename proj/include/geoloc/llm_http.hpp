#pragma once

// cpp-httplib implementation of HttpPoster. Kept out of llm_gateway.hpp so
// translation units that only replay transcripts do not pull in httplib.

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>

#include "geoloc/llm_gateway.hpp"

namespace geoloc {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

inline ParsedUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint URL \"" + url + "\" has no scheme");
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw ValidationError("endpoint URL \"" + url + "\" must use http or https");
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibPoster : public HttpPoster {
 public:
  HttpResponse post(const std::string& url, const std::string& body,
                    const std::vector<std::pair<std::string, std::string>>& headers, int timeout_s) override {
    auto parts = split_url(url);
    httplib::Client client(parts.origin);
    client.set_connection_timeout(timeout_s, 0);
    client.set_read_timeout(timeout_s, 0);
    client.set_write_timeout(timeout_s, 0);
    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (k == "Content-Type")
        content_type = v;
      else
        h.emplace(k, v);
    }
    auto res = client.Post(parts.path, h, body, content_type);
    if (!res) throw TransportError("request to " + parts.origin + " failed: " + httplib::to_string(res.error()), 0);
    return {res->status, res->body};
  }
};

inline std::shared_ptr<ChatBackend> make_http_backend(const ModelConfig& cfg) {
  return std::make_shared<HttpChatBackend>(cfg, std::make_shared<HttplibPoster>());
}

}  // namespace geoloc
