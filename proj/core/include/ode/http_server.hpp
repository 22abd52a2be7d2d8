#pragma once

#include <memory>
#include <string>

#include "ode/services.hpp"

namespace ode {

/// Exposes any Transport (typically a mock) as an HTTP service speaking the
/// /v1/* wire contract. Used by loopback tests of
/// the HTTP client.
class HttpServiceServer {
 public:
  explicit HttpServiceServer(std::shared_ptr<Transport> backend);
  ~HttpServiceServer();

  HttpServiceServer(const HttpServiceServer&) = delete;
  HttpServiceServer& operator=(const HttpServiceServer&) = delete;

  /// Binds (port 0 picks a free port), starts serving on a background
  /// thread and returns the bound port.
  int start(const std::string& host, int port = 0);

  /// Binds and serves on the calling thread until stop().
  void serve(const std::string& host, int port);

  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ode
