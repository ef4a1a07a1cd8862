#include "flowcorr/html_injector.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>

#include <httplib.h>

namespace flowcorr::inject {
namespace {

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) { return lower(x) == lower(y); });
}

/// Byte offset of the last case-insensitive occurrence of needle, or npos.
size_t rfind_ci(std::string_view haystack, std::string_view needle) {
  if (needle.empty() || haystack.size() < needle.size()) return std::string_view::npos;
  for (size_t pos = haystack.size() - needle.size();; --pos) {
    if (iequals(haystack.substr(pos, needle.size()), needle)) return pos;
    if (pos == 0) return std::string_view::npos;
  }
}

std::string header_get(const HttpMessageView& msg, std::string_view name) {
  for (const auto& [key, value] : msg.headers)
    if (iequals(key, name)) return value;
  return {};
}

void header_set(HttpMessageView& msg, std::string_view name, const std::string& value) {
  for (auto& [key, val] : msg.headers) {
    if (iequals(key, name)) {
      val = value;
      return;
    }
  }
  msg.headers.emplace_back(std::string(name), value);
}

}  // namespace

std::string injected_tag(const InjectionSpec& spec) {
  return "<img src=\"" + spec.asset_url + "\" width=\"" + spec.width_attr + "\" />";
}

InjectResult inject_asset(std::string_view body, const InjectionSpec& spec) {
  size_t pos = rfind_ci(body, spec.match_tag);
  if (pos == std::string_view::npos) return {std::string(body), false};

  std::string out;
  const std::string tag = injected_tag(spec);
  out.reserve(body.size() + tag.size());
  out.append(body.substr(0, pos));
  out.append(tag);
  out.append(body.substr(pos));  // original tag bytes, casing preserved
  return {std::move(out), true};
}

HttpMessageView strip_cache_headers(HttpMessageView request) {
  std::erase_if(request.headers, [](const auto& h) {
    return iequals(h.first, "If-Modified-Since") || iequals(h.first, "If-None-Match");
  });
  return request;
}

TransformOutcome transform_response(HttpMessageView response, const InjectionSpec& spec) {
  const std::string content_type = header_get(response, "Content-Type");
  const bool is_html = content_type.find("text/html") != std::string::npos;
  const bool chunked = header_get(response, "Transfer-Encoding").find("chunked") != std::string::npos;
  const bool encoded = !header_get(response, "Content-Encoding").empty();

  if (!is_html || chunked || encoded)
    return {std::move(response), false, true};

  InjectResult result = inject_asset(response.body, spec);
  const bool injected = result.matched;
  response.body = std::move(result.body);
  header_set(response, "Content-Length", std::to_string(response.body.size()));
  return {std::move(response), injected, false};
}

struct InjectingProxy::Impl {
  ProxyOptions options;
  httplib::Server server;

  bool host_allowed(const std::string& host) const {
    if (options.host_allowlist.empty()) return true;
    return std::any_of(options.host_allowlist.begin(), options.host_allowlist.end(),
                       [&](const std::string& allowed) { return iequals(allowed, host); });
  }

  void handle(const httplib::Request& req, httplib::Response& res) {
    HttpMessageView upstream;
    upstream.start_line = req.method + " " + req.path + " HTTP/1.1";
    for (const auto& [key, value] : req.headers) upstream.headers.emplace_back(key, value);
    upstream.body = req.body;
    upstream = strip_cache_headers(std::move(upstream));

    httplib::Client origin(options.origin_host, options.origin_port);
    origin.set_connection_timeout(5);
    httplib::Headers fwd_headers;
    for (const auto& [key, value] : upstream.headers) {
      // httplib re-derives these for the outbound request
      if (iequals(key, "Host") || iequals(key, "Content-Length") || iequals(key, "LOCAL_ADDR") ||
          iequals(key, "LOCAL_PORT") || iequals(key, "REMOTE_ADDR") || iequals(key, "REMOTE_PORT"))
        continue;
      fwd_headers.emplace(key, value);
    }

    httplib::Result upstream_res =
        req.method == "POST"
            ? origin.Post(req.path, fwd_headers, upstream.body, req.get_header_value("Content-Type"))
            : origin.Get(req.path, fwd_headers);
    if (!upstream_res) {
      res.status = 502;
      res.set_content("origin unreachable", "text/plain");
      return;
    }

    HttpMessageView view;
    view.start_line = "HTTP/1.1 " + std::to_string(upstream_res->status);
    for (const auto& [key, value] : upstream_res->headers) view.headers.emplace_back(key, value);
    view.body = upstream_res->body;

    const bool transform = host_allowed(options.origin_host);
    TransformOutcome outcome =
        transform ? transform_response(std::move(view), options.spec)
                  : TransformOutcome{std::move(view), false, true};

    res.status = upstream_res->status;
    std::string content_type;
    for (const auto& [key, value] : outcome.message.headers) {
      if (iequals(key, "Content-Type")) content_type = value;
      if (iequals(key, "Content-Length") || iequals(key, "Transfer-Encoding") ||
          iequals(key, "Connection"))
        continue;
      res.set_header(key, value);
    }
    res.set_content(outcome.message.body, content_type.empty() ? "application/octet-stream" : content_type);
  }
};

InjectingProxy::InjectingProxy(ProxyOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  auto handler = [this](const httplib::Request& req, httplib::Response& res) { impl_->handle(req, res); };
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
}

InjectingProxy::~InjectingProxy() { stop(); }

bool InjectingProxy::run() {
  return impl_->server.listen(impl_->options.listen_host, impl_->options.listen_port);
}

bool InjectingProxy::bind() {
  return impl_->server.bind_to_port(impl_->options.listen_host, impl_->options.listen_port);
}

int InjectingProxy::bind_any_port() {
  int port = impl_->server.bind_to_any_port(impl_->options.listen_host);
  if (port > 0) impl_->options.listen_port = port;
  return port;
}

bool InjectingProxy::listen_after_bind() { return impl_->server.listen_after_bind(); }

void InjectingProxy::wait_ready() { impl_->server.wait_until_ready(); }

void InjectingProxy::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace flowcorr::inject
