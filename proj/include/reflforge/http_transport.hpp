#pragma once

// Real HTTP transport for OpenAiBackend, kept out of gateway.hpp so unit
// tests can inject an in-process fake instead of opening sockets.

#if __has_include(<openssl/ssl.h>)
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <memory>

#include "reflforge/gateway.hpp"

namespace reflforge {

inline HttpPostFn httplib_post_fn() {
  return [](const std::string& scheme_host_port, const std::string& path,
            const std::string& body, const std::string& api_key,
            int timeout_ms) -> HttpResponse {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (scheme_host_port.rfind("https://", 0) == 0) {
      HttpResponse out;
      out.error = "https support not compiled in";
      return out;
    }
#endif
    // One client per call: httplib clients are not safe for concurrent
    // use, and the admission limiter already bounds how many exist.
    httplib::Client client(scheme_host_port);
    client.set_connection_timeout(0, timeout_ms * 1000LL);
    client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    client.set_write_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    const auto res = client.Post(path, headers, body, "application/json");
    HttpResponse out;
    if (!res) {
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.transport_ok = true;
    out.status = res->status;
    out.body = res->body;
    return out;
  };
}

// Backend factory: scripted when the config says mock, HTTP otherwise.
inline std::shared_ptr<Backend> make_backend(const BackendConfig& config) {
  if (const auto problems = config.problems(); !problems.empty())
    throw ConfigError("backend config: " + problems.front());
  if (config.kind == "mock" || !config.mock_script.empty())
    return MockBackend::from_file(config.mock_script, config);
  return std::make_shared<OpenAiBackend>(config, httplib_post_fn());
}

}  // namespace reflforge
