#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <thread>

#include "ode/error.hpp"
#include "ode/http_server.hpp"
#include "ode/services.hpp"

namespace ode {
namespace {

struct SplitUrl {
  std::string scheme_host_port;
  std::string prefix;
};

SplitUrl split_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("endpoint URL '" + base_url + "' has no scheme");
  }
  const std::string scheme = base_url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ValidationError("unsupported endpoint scheme '" + scheme + "'");
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

class HttpTransport final : public Transport {
 public:
  WireResponse post(std::string_view path, const std::string& body,
                    const ServiceEndpoint& endpoint) override {
    const SplitUrl url = split_url(endpoint.base_url);
    // httplib clients are not safe for concurrent requests; one per call.
    httplib::Client client(url.scheme_host_port);
    client.set_connection_timeout(endpoint.timeout);
    client.set_read_timeout(endpoint.timeout);
    client.set_write_timeout(endpoint.timeout);
    if (!endpoint.bearer_token.empty()) client.set_bearer_token_auth(endpoint.bearer_token);
    auto result = client.Post(url.prefix + std::string(path), body, "application/json");
    if (!result) throw TransportFailure(httplib::to_string(result.error()));
    return WireResponse{result->status, result->body};
  }
};

}  // namespace

std::shared_ptr<Transport> make_http_transport() { return std::make_shared<HttpTransport>(); }

struct HttpServiceServer::Impl {
  std::shared_ptr<Transport> backend;
  httplib::Server server;
  std::thread worker;
};

HttpServiceServer::HttpServiceServer(std::shared_ptr<Transport> backend)
    : impl_(std::make_unique<Impl>()) {
  impl_->backend = std::move(backend);
  for (const std::string_view path : {kTxt2ImgPath, kDetectPath, kQueryPath}) {
    impl_->server.Post(std::string(path), [this, path](const httplib::Request& req,
                                                       httplib::Response& res) {
      ServiceEndpoint self;
      self.base_url = "loopback://";
      WireResponse reply;
      try {
        reply = impl_->backend->post(path, req.body, self);
      } catch (const TransportFailure& e) {
        reply = WireResponse{503, std::string("{\"error\":\"") + e.what() + "\"}"};
      }
      res.status = reply.status;
      res.set_content(reply.body, "application/json");
    });
  }
}

HttpServiceServer::~HttpServiceServer() { stop(); }

int HttpServiceServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServiceServer::serve(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw IoError("cannot serve on " + host + ":" + std::to_string(port));
  }
}

void HttpServiceServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace ode
