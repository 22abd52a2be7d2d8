#include <doctest.h>

#include <map>
#include <mutex>
#include <thread>

#include "helpers.hpp"
#include "ode/error.hpp"
#include "ode/hashing.hpp"
#include "ode/mock_services.hpp"
#include "ode/parallel.hpp"
#include "ode/png.hpp"
#include "ode/services.hpp"

using namespace ode;
using ode::testing::MockService;
using nlohmann::json;

namespace {

class MemoryCache final : public ResponseCache {
 public:
  std::optional<std::string> lookup(const std::string& key) override {
    std::lock_guard lock(mutex_);
    const auto it = entries.find(key);
    if (it == entries.end()) return std::nullopt;
    return it->second;
  }
  void store(const std::string& key, const std::string& value) override {
    std::lock_guard lock(mutex_);
    entries[key] = value;
  }
  std::map<std::string, std::string> entries;

 private:
  std::mutex mutex_;
};

class MemoryLog final : public RequestLog {
 public:
  void record(const json& entry) override {
    std::lock_guard lock(mutex_);
    entries.push_back(entry);
  }
  std::vector<json> entries;

 private:
  std::mutex mutex_;
};

// Replies with a fixed status and body to every request.
class FixedTransport final : public Transport {
 public:
  explicit FixedTransport(WireResponse reply) : reply_(std::move(reply)) {}
  WireResponse post(std::string_view, const std::string&, const ServiceEndpoint&) override {
    ++calls;
    return reply_;
  }
  std::atomic<int> calls{0};

 private:
  WireResponse reply_;
};

ServiceEndpoint fast_endpoint(std::size_t retries = 2) {
  ServiceEndpoint e;
  e.base_url = "mock://test";
  e.retries = retries;
  e.backoff = std::chrono::milliseconds(1);
  return e;
}

const MockContext kContext{{"car", "dog", "frisbee", "grass"}, {}};

ImagePromptSpec dog_frisbee_spec(std::uint64_t seed = 1) {
  return image_prompt(make_pair(ode::testing::example_graph(), "dog", "frisbee", Criterion::common), Style::photo, seed);
}

}  // namespace

TEST_CASE("request bodies have exactly the contract fields") {
  const auto t2i = txt2img_request(dog_frisbee_spec(7), 512, 512);
  CHECK(t2i.dump() ==
        R"({"height":512,"negative_prompt":"blurry, low quality, extra limbs, watermark, text",)"
        R"("prompt":"a picture of dog and frisbee, photograph, realistic, high detail",)"
        R"("seed":7,"style":"photo","width":512})");
  const auto det = detect_request("abc", {"dog"}, 0.5);
  CHECK(det.dump() == R"({"confidence_threshold":0.5,"image_png_base64":"YWJj","vocabulary":["dog"]})");
  CHECK(query_request("abc", "Is there a dog in the image?").dump() ==
        R"({"image_png_base64":"YWJj","prompt":"Is there a dog in the image?"})");
}

TEST_CASE("mock services close the generate, detect and query loop") {
  MockService t2i("mock://t2i", kContext);
  MockService det("mock://detect?confidence=0.8", kContext);
  MockService model("mock://model?script=truthful", kContext);

  const auto image = txt2img(*t2i.client, dog_frisbee_spec());
  CHECK(looks_like_png(image.png));
  CHECK(embedded_labels(image.png) == std::vector<std::string>{"dog", "frisbee"});

  const auto found = detect(*det.client, image.png, kContext.vocabulary, 0.5);
  REQUIRE(found.size() == 2);
  CHECK(found[0].label == "dog");
  CHECK(found[1].label == "frisbee");
  CHECK(found[0].confidence == doctest::Approx(0.8));
  CHECK(detect(*det.client, image.png, kContext.vocabulary, 0.9).empty());

  CHECK(query_model(*model.client, image.png, "Is there a dog in the image?") == "Yes, there is a dog in the image.");
  CHECK(query_model(*model.client, image.png, "Is there a car in the image?") == "No, there is no car in the image.");
  CHECK(query_model(*model.client, image.png, "Please describe this image.") ==
        mock_caption({"dog", "frisbee"}));
}

TEST_CASE("mock models follow their scripts") {
  const Bytes png = make_labeled_png({"dog", "grass"});
  const auto ask = [&](const char* url, const char* prompt) {
    MockService m(url, kContext);
    return query_model(*m.client, png, prompt);
  };
  CHECK(ask("mock://model?script=always_yes", "Is there a car in the image?") == "Yes");
  CHECK(ask("mock://model?script=always_no", "Is there a dog in the image?") == "No");
  CHECK(ask("mock://model?script=refuser", "Is there a dog in the image?") == "I cannot answer that.");
  CHECK(ask("mock://model?script=add_one_hallucination", "Please describe this image.") ==
        mock_caption({"dog", "grass", "car"}));
  CHECK_THROWS_AS(ask("mock://model?script=poet", "x"), ValidationError);
}

TEST_CASE("transient failures are retried with backoff") {
  MockService svc("mock://t2i?fail_first=2", kContext, nullptr, 4, 2);
  const auto image = txt2img(*svc.client, dog_frisbee_spec());
  CHECK(looks_like_png(image.png));
  const auto s = svc.client->stats();
  CHECK(s.network_calls == 3);
  CHECK(s.retries == 2);

  MockService exhausted("mock://t2i?fail_first=3", kContext, nullptr, 4, 2);
  try {
    txt2img(*exhausted.client, dog_frisbee_spec());
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.attempts().size() == 3);
  }
}

TEST_CASE("unreachable hosts surface as TransportError") {
  auto transport = make_mock_transport("mock://t2i", kContext);
  transport->set_unreachable(true);
  ServiceClient client(fast_endpoint(1), transport);
  CHECK_THROWS_AS(txt2img(client, dog_frisbee_spec()), TransportError);
  CHECK(transport->calls() == 2);
}

TEST_CASE("4xx replies are protocol errors and are not retried") {
  auto transport = std::make_shared<FixedTransport>(WireResponse{400, R"({"error":"bad"})"});
  ServiceClient client(fast_endpoint(3), transport);
  CHECK_THROWS_AS(client.call("/v1/x", json::object()), ProtocolError);
  CHECK(transport->calls == 1);
}

TEST_CASE("malformed replies are protocol errors") {
  const auto fails = [](std::string body) {
    auto transport = std::make_shared<FixedTransport>(WireResponse{200, std::move(body)});
    ServiceClient client(fast_endpoint(0), transport);
    CHECK_THROWS_AS(txt2img(client, dog_frisbee_spec()), ProtocolError);
  };
  fails("");
  fails("not json");
  fails(R"({"backend_id":"x"})");
  fails(R"({"image_png_base64":"bm90IGEgcG5n"})");

  const Bytes png = make_labeled_png({"dog"});
  const auto det_fails = [&](json detections) {
    auto transport = std::make_shared<FixedTransport>(
        WireResponse{200, json{{"detections", std::move(detections)}}.dump()});
    ServiceClient client(fast_endpoint(0), transport);
    CHECK_THROWS_AS(detect(client, png, {"dog"}, 0.5), ProtocolError);
  };
  det_fails(json::array({{{"label", "cat"}, {"confidence", 0.9}, {"bbox", {0, 0, 1, 1}}}}));
  det_fails(json::array({{{"label", "dog"}, {"confidence", 1.5}, {"bbox", {0, 0, 1, 1}}}}));
  det_fails(json::array({{{"label", "dog"}, {"confidence", 0.9}, {"bbox", {1, 0, 1, 1}}}}));
  det_fails("nope");
}

TEST_CASE("cache answers repeated requests without the network") {
  MemoryCache cache;
  MemoryLog log;
  auto transport = make_mock_transport("mock://t2i", kContext);
  ServiceClient client(fast_endpoint(), transport, &cache, &log);
  const auto first = txt2img(client, dog_frisbee_spec());
  const auto second = txt2img(client, dog_frisbee_spec());
  CHECK(first.png == second.png);
  CHECK(transport->calls() == 1);
  const auto s = client.stats();
  CHECK(s.cache_hits == 1);
  CHECK(s.cache_misses == 1);
  CHECK(cache.entries.size() == 1);
  REQUIRE(log.entries.size() == 2);
  CHECK(log.entries[0]["cached"] == false);
  CHECK(log.entries[1]["cached"] == true);
  CHECK(log.entries[0]["request_hash"] == log.entries[1]["request_hash"]);

  const std::string body = txt2img_request(dog_frisbee_spec(), 512, 512).dump();
  CHECK(cache.entries.count(ServiceClient::request_key("mock://test", kTxt2ImgPath, body)) == 1);
  txt2img(client, dog_frisbee_spec(2));
  CHECK(transport->calls() == 2);
}

TEST_CASE("different endpoints never share cached replies") {
  MemoryCache cache;
  const Bytes png = make_labeled_png({"dog"});
  MockService yes("mock://model?script=always_yes", kContext, &cache);
  MockService no("mock://model?script=always_no", kContext, &cache);
  CHECK(query_model(*yes.client, png, "Is there a car in the image?") == "Yes");
  CHECK(query_model(*no.client, png, "Is there a car in the image?") == "No");
  CHECK(cache.entries.size() == 2);
}

TEST_CASE("invalid replies never enter the cache and stale entries are bypassed") {
  MemoryCache cache;
  {
    auto bad = std::make_shared<FixedTransport>(WireResponse{200, R"({"image_png_base64":"AAAA"})"});
    ServiceClient client(fast_endpoint(0), bad, &cache);
    CHECK_THROWS_AS(txt2img(client, dog_frisbee_spec()), ProtocolError);
    CHECK(cache.entries.empty());
  }
  const std::string body = txt2img_request(dog_frisbee_spec(), 512, 512).dump();
  cache.store(ServiceClient::request_key("mock://test", kTxt2ImgPath, body), R"({"image_png_base64":"AAAA"})");
  auto transport = make_mock_transport("mock://t2i", kContext);
  ServiceClient client(fast_endpoint(), transport, &cache);
  CHECK(looks_like_png(txt2img(client, dog_frisbee_spec()).png));
  CHECK(transport->calls() == 1);
  CHECK(client.stats().cache_misses == 1);
}

TEST_CASE("in-flight requests never exceed max_in_flight") {
  for (const std::size_t cap : {1U, 3U}) {
    auto transport = make_mock_transport("mock://t2i?latency_ms=5", kContext);
    ServiceEndpoint e = fast_endpoint();
    e.max_in_flight = cap;
    ServiceClient client(e, transport);
    parallel_for(24, 8, [&](std::size_t i) { txt2img(client, dog_frisbee_spec(i)); });
    CHECK(transport->calls() == 24);
    CHECK(transport->peak_in_flight() <= cap);
    CHECK(transport->peak_in_flight() >= 1);
  }
}

TEST_CASE("mock detector omissions are scripted and reproducible") {
  MockDetector detector(MockDetectorOptions{0.9, 0.5, 11});
  std::size_t omitted = 0;
  for (int i = 0; i < 200; ++i) {
    const std::string prompt = "a picture of a" + std::to_string(i) +
                               " and b, photograph, realistic, high detail";
    const auto label = detector.omitted_label(prompt);
    CHECK(label == detector.omitted_label(prompt));
    if (label) {
      ++omitted;
      CHECK((*label == "a" + std::to_string(i) || *label == "b"));
    }
  }
  CHECK(omitted > 60);
  CHECK(omitted < 140);
  CHECK_FALSE(MockDetector{}.omitted_label("a picture of dog and frisbee, anime style illustration"));
}

TEST_CASE("endpoints validate and redact their token") {
  ServiceEndpoint e = fast_endpoint();
  e.bearer_token = "secret";
  const auto doc = to_json(e);
  CHECK(doc["bearer_token"] == "<redacted>");
  CHECK(endpoint_from_json(json("http://localhost:1")).base_url == "http://localhost:1");
  e.max_in_flight = 0;
  CHECK_THROWS_AS(validate(e), ValidationError);
}
