#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace flowcorr::inject {

struct InjectionSpec {
  std::string asset_url;
  std::string width_attr = "1px";
  std::string match_tag = "</body>";
};

/// The exact tag inserted in front of the matched closing tag:
/// <img src="URL" width="W" />
std::string injected_tag(const InjectionSpec& spec);

struct InjectResult {
  std::string body;
  bool matched = false;
};

/// Rewrites the LAST case-insensitive occurrence of spec.match_tag to
/// injected_tag + the original tag bytes. No occurrence: body unchanged,
/// matched = false.
InjectResult inject_asset(std::string_view body, const InjectionSpec& spec);

struct HttpMessageView {
  std::string start_line;
  std::vector<std::pair<std::string, std::string>> headers;  // order-preserving
  std::string body;
};

/// Removes If-Modified-Since and If-None-Match; everything else is kept
/// byte-identical and in order.
HttpMessageView strip_cache_headers(HttpMessageView request);

struct TransformOutcome {
  HttpMessageView message;
  bool injected = false;
  bool passed_through = false;  // non-HTML or chunked/compressed body
};

/// Applies inject_asset to buffered text/html bodies and recomputes
/// Content-Length. Non-HTML, chunked and content-encoded responses pass
/// through byte-identical.
TransformOutcome transform_response(HttpMessageView response, const InjectionSpec& spec);

struct ProxyOptions {
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;
  std::string origin_host;
  int origin_port = 80;
  InjectionSpec spec;
  std::vector<std::string> host_allowlist;  // empty = transform everything
};

/// Single-origin reverse proxy applying strip_cache_headers on the way in
/// and transform_response on the way out. Blocks until stop() is called.
class InjectingProxy {
 public:
  explicit InjectingProxy(ProxyOptions options);
  ~InjectingProxy();
  InjectingProxy(const InjectingProxy&) = delete;
  InjectingProxy& operator=(const InjectingProxy&) = delete;

  /// Blocks serving requests. Returns false if the listen socket failed.
  bool run();
  /// Binds the listen socket and reports readiness without serving yet.
  bool bind();
  /// Binds to an OS-assigned free port; returns it, or -1 on failure.
  int bind_any_port();
  /// Serves on an already-bound socket (pair with bind()).
  bool listen_after_bind();
  /// Blocks until the server accepts connections (pair with listen_after_bind()).
  void wait_ready();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace flowcorr::inject
