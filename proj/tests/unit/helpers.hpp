#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ode/concept_graph.hpp"
#include "ode/hashing.hpp"
#include "ode/mock_services.hpp"
#include "ode/prompts.hpp"
#include "ode/records.hpp"
#include "ode/services.hpp"
#include "ode/store.hpp"

namespace ode::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ode-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline SceneRecord scene(std::initializer_list<std::pair<const char*, Level>> items) {
  SceneRecord r;
  for (const auto& [label, level] : items) r.concepts.push_back(Concept{label, level});
  return r;
}

/// {dog,frisbee,grass}x3, {dog,grass}x2, {car,sky}x1 with grass and sky as
/// environments.
inline std::vector<SceneRecord> example_records() {
  constexpr auto E = Level::entity;
  constexpr auto V = Level::environment;
  std::vector<SceneRecord> records;
  for (int i = 0; i < 3; ++i) records.push_back(scene({{"dog", E}, {"frisbee", E}, {"grass", V}}));
  for (int i = 0; i < 2; ++i) records.push_back(scene({{"dog", E}, {"grass", V}}));
  records.push_back(scene({{"car", E}, {"sky", V}}));
  return records;
}

inline ConceptGraph example_graph() { return build_graph(example_records()); }

/// A synthesized case over example_graph() with a consistent question set.
inline TestCase make_case(const std::string& a, const std::string& b, Criterion criterion,
                          std::set<std::string> truth, std::set<std::string> targets,
                          std::string image_ref, std::uint64_t seed = 0,
                          Style style = Style::photo) {
  TestCase c;
  c.pair = make_pair(example_graph(), a, b, criterion);
  c.style = style;
  c.seed = seed;
  c.case_id = synthesized_case_id(c.pair, style, seed);
  c.image_seed = seed_from_hash(c.case_id);
  c.image_ref = std::move(image_ref);
  c.truth = std::move(truth);
  c.hallucination_targets = std::move(targets);
  c.questions = question_set(c.truth, c.hallucination_targets);
  for (const auto& label : c.truth) c.detections.push_back(Detection{label, 0.9, {0, 0, 8, 8}});
  return c;
}

/// A mock service plus a client for it, sharing an optional cache.
struct MockService {
  std::shared_ptr<MockTransport> transport;
  std::unique_ptr<ServiceClient> client;

  MockService(const std::string& url, const MockContext& context, ResponseCache* cache = nullptr,
              std::size_t max_in_flight = 4, std::size_t retries = 2)
      : transport(make_mock_transport(url, context)) {
    ServiceEndpoint endpoint;
    endpoint.base_url = url;
    endpoint.max_in_flight = max_in_flight;
    endpoint.retries = retries;
    endpoint.backoff = std::chrono::milliseconds(1);
    client = std::make_unique<ServiceClient>(endpoint, transport, cache);
  }
};

}  // namespace ode::testing
