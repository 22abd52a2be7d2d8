#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ode/hashing.hpp"
#include "ode/prompts.hpp"

namespace ode {

// Wire paths, relative to an endpoint's base_url.
inline constexpr std::string_view kTxt2ImgPath = "/v1/txt2img";
inline constexpr std::string_view kDetectPath = "/v1/detect";
inline constexpr std::string_view kQueryPath = "/v1/query";

// Environment variables that override configured base URLs.
inline constexpr const char* kTxt2ImgUrlEnv = "ODE_T2I_URL";
inline constexpr const char* kDetectUrlEnv = "ODE_DETECT_URL";
inline constexpr const char* kModelUrlEnv = "ODE_MODEL_URL";

inline constexpr double kDefaultDetectionThreshold = 0.5;

struct Detection {
  std::string label;
  double confidence = 0.0;
  std::array<double, 4> bbox{};  // x0, y0, x1, y1 in pixels

  friend bool operator==(const Detection&, const Detection&) = default;
};

nlohmann::json to_json(const Detection& detection);
Detection detection_from_json(const nlohmann::json& doc);

struct ServiceEndpoint {
  /// http(s)://host[:port][/prefix], or mock://<role>?... for in-process mocks.
  std::string base_url;
  std::chrono::milliseconds timeout{60000};
  std::size_t max_in_flight = 4;
  std::size_t retries = 2;
  std::chrono::milliseconds backoff{200};  // doubled after each failed attempt
  std::string bearer_token;
};

nlohmann::json to_json(const ServiceEndpoint& endpoint);  // token is redacted
ServiceEndpoint endpoint_from_json(const nlohmann::json& doc);
void validate(const ServiceEndpoint& endpoint);

struct WireResponse {
  int status = 200;
  std::string body;
};

/// Connection-level failure (refused, reset, timed out). Retryable.
class TransportFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Moves one request body to a service and returns its reply. Must be safe
/// to call from several threads at once.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual WireResponse post(std::string_view path, const std::string& body,
                            const ServiceEndpoint& endpoint) = 0;
};

/// Plain HTTP (and HTTPS) via cpp-httplib.
std::shared_ptr<Transport> make_http_transport();

/// Request-keyed response cache. Implementations must be thread-safe.
class ResponseCache {
 public:
  virtual ~ResponseCache() = default;
  virtual std::optional<std::string> lookup(const std::string& key) = 0;
  virtual void store(const std::string& key, const std::string& value) = 0;
};

/// Receives one structured entry per completed call. Thread-safe.
class RequestLog {
 public:
  virtual ~RequestLog() = default;
  virtual void record(const nlohmann::json& entry) = 0;
};

struct ClientStats {
  std::size_t calls = 0;          // call() invocations
  std::size_t network_calls = 0;  // transport posts, including retries
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
  std::size_t retries = 0;
};

/// Client for one service endpoint: caps in-flight requests, retries
/// transport failures and 5xx replies with exponential backoff, consults the
/// cache before the network and logs every request/response by content hash.
class ServiceClient {
 public:
  /// Throws ProtocolError from inside to reject a reply (and keep it out of
  /// the cache).
  using Validator = std::function<void(const nlohmann::json&)>;

  ServiceClient(ServiceEndpoint endpoint, std::shared_ptr<Transport> transport,
                ResponseCache* cache = nullptr, RequestLog* log = nullptr);

  ServiceClient(const ServiceClient&) = delete;
  ServiceClient& operator=(const ServiceClient&) = delete;

  nlohmann::json call(std::string_view path, const nlohmann::json& request,
                      const Validator& validate = {});

  ClientStats stats() const;
  const ServiceEndpoint& endpoint() const { return endpoint_; }

  /// Cache key: content hash of "<base_url>\n<path>\n<canonical body>". The
  /// URL is part of the key so two models never share cached answers.
  static std::string request_key(std::string_view base_url, std::string_view path,
                                 const std::string& body);

 private:
  class Slot;

  std::string post_with_retries(std::string_view path, const std::string& body,
                                std::size_t& attempts_made);

  ServiceEndpoint endpoint_;
  std::shared_ptr<Transport> transport_;
  ResponseCache* cache_;
  RequestLog* log_;

  std::mutex slots_mutex_;
  std::condition_variable slots_cv_;
  std::size_t in_flight_ = 0;

  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> cache_misses_{0};
  std::atomic<std::size_t> retries_{0};
};

// Bit-exact request bodies.
nlohmann::json txt2img_request(const ImagePromptSpec& spec, std::uint32_t width,
                               std::uint32_t height);
nlohmann::json detect_request(std::string_view png, const std::vector<std::string>& vocabulary,
                              double threshold);
nlohmann::json query_request(std::string_view png, std::string_view prompt);

struct GeneratedImage {
  Bytes png;
  std::string backend_id;
};

/// Returns the decoded PNG; a reply that is not a structurally valid PNG is
/// a ProtocolError.
GeneratedImage txt2img(ServiceClient& client, const ImagePromptSpec& spec,
                       std::uint32_t width = 512, std::uint32_t height = 512);

/// Detections with confidence >= threshold, confidence desc then label asc.
/// Replies that break Detection invariants are ProtocolErrors.
std::vector<Detection> detect(ServiceClient& client, std::string_view png,
                              const std::vector<std::string>& vocabulary, double threshold);

/// Raw model text, unmodified.
std::string query_model(ServiceClient& client, std::string_view png, std::string_view prompt);

}  // namespace ode
