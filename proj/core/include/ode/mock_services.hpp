#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ode/prompts.hpp"
#include "ode/services.hpp"

namespace ode {

// tEXt keywords the mock text-to-image service writes and the mock detector
// and mock model read back.
inline constexpr const char* kMockLabelsKey = "ode:labels";
inline constexpr const char* kMockPromptKey = "ode:prompt";

/// Labels embedded in a PNG's ode:labels chunk (empty when absent).
std::vector<std::string> embedded_labels(std::string_view png);

/// Builds a 64x64-style test PNG carrying `labels` (and optionally a prompt)
/// in text chunks; pixels are a pure function of `salt`.
Bytes make_labeled_png(const std::vector<std::string>& labels, std::string_view prompt = {},
                       std::string_view salt = {}, std::uint32_t size = 64);

/// Text-to-image mock: parses the two labels out of the prompt and returns
/// a PNG carrying them. Pure function of the request body.
class MockTxt2Img {
 public:
  explicit MockTxt2Img(PromptTemplates templates = {}, std::uint32_t size = 64)
      : templates_(std::move(templates)), size_(size) {}
  WireResponse handle(const std::string& body) const;

 private:
  PromptTemplates templates_;
  std::uint32_t size_;
};

struct MockDetectorOptions {
  double confidence = 0.9;
  /// Fraction of prompts for which one of the two labels goes undetected.
  double omit_fraction = 0.0;
  std::uint64_t script_seed = 0;
};

/// Detector mock: reports every embedded label that is in the requested
/// vocabulary at a fixed confidence, except for the scripted omissions.
class MockDetector {
 public:
  explicit MockDetector(MockDetectorOptions options = {}, PromptTemplates templates = {})
      : options_(options), templates_(std::move(templates)) {}
  WireResponse handle(const std::string& body) const;

  /// The label this detector drops for `prompt`, if any. Exposed so tests
  /// can state which cases must be filtered.
  std::optional<std::string> omitted_label(std::string_view prompt) const;

 private:
  MockDetectorOptions options_;
  PromptTemplates templates_;
};

enum class MockScript {
  truthful,               // names exactly the embedded labels; honest yes/no
  always_yes,             // "Yes" to every yes/no question; truthful captions
  always_no,              // "No" to every yes/no question; truthful captions
  refuser,                // "I cannot answer that." to everything
  add_one_hallucination,  // truthful, plus one vocabulary label that is absent
};

std::string_view to_string(MockScript script) noexcept;
MockScript mock_script_from_string(std::string_view text);

/// Caption used by the scripted models: "The image shows a, b." with
/// underscores rendered as spaces.
std::string mock_caption(const std::vector<std::string>& labels);

/// MLLM mock driven by a fixed script.
class MockModel {
 public:
  MockModel(MockScript script, std::vector<std::string> vocabulary, PromptTemplates templates = {})
      : script_(script), vocabulary_(std::move(vocabulary)), templates_(std::move(templates)) {}
  WireResponse handle(const std::string& body) const;

 private:
  MockScript script_;
  std::vector<std::string> vocabulary_;
  PromptTemplates templates_;
};

/// In-process Transport routing wire paths to handler functions. Tracks the
/// peak number of concurrent requests and can inject latency and failures.
class MockTransport final : public Transport {
 public:
  using Handler = std::function<WireResponse(const std::string& body)>;

  void route(std::string_view path, Handler handler);

  /// Every call sleeps this long while counted as in flight.
  void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }
  /// The first `n` calls fail with HTTP 503.
  void fail_first(std::size_t n) { fail_remaining_ = n; }
  /// All calls raise TransportFailure, as if the host refused connections.
  void set_unreachable(bool unreachable) { unreachable_ = unreachable; }

  WireResponse post(std::string_view path, const std::string& body,
                    const ServiceEndpoint& endpoint) override;

  std::size_t calls() const { return calls_.load(); }
  std::size_t peak_in_flight() const { return peak_.load(); }

 private:
  std::mutex routes_mutex_;
  std::map<std::string, Handler, std::less<>> routes_;
  std::chrono::milliseconds latency_{0};
  std::atomic<std::size_t> fail_remaining_{0};
  std::atomic<bool> unreachable_{false};
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> peak_{0};
};

/// What a mock:// endpoint may need to know about the run.
struct MockContext {
  std::vector<std::string> vocabulary;
  PromptTemplates templates;
};

/// Parses mock://<role>[?key=value&...] where role is t2i, detect or model.
///   detect: confidence, omit, seed
///   model:  script (truthful | always_yes | always_no | refuser | add_one_hallucination)
///   any:    latency_ms, fail_first
std::shared_ptr<MockTransport> make_mock_transport(const std::string& url,
                                                   const MockContext& context);

/// HTTP transport for http(s):// URLs, in-process mock for mock:// URLs.
std::shared_ptr<Transport> make_transport(const ServiceEndpoint& endpoint,
                                          const MockContext& context);

}  // namespace ode
