#include <doctest.h>

#include "helpers.hpp"
#include "ode/error.hpp"
#include "ode/http_server.hpp"
#include "ode/mock_services.hpp"
#include "ode/png.hpp"
#include "ode/services.hpp"

using namespace ode;

namespace {

const MockContext kContext{{"car", "dog", "frisbee"}, {}};

ServiceEndpoint http_endpoint(int port, std::size_t retries = 0) {
  ServiceEndpoint e;
  e.base_url = "http://127.0.0.1:" + std::to_string(port);
  e.retries = retries;
  e.backoff = std::chrono::milliseconds(1);
  e.timeout = std::chrono::milliseconds(5000);
  return e;
}

ImagePromptSpec spec() {
  return image_prompt(make_pair(ode::testing::example_graph(), "dog", "frisbee", Criterion::common), Style::photo, 3);
}

}  // namespace

TEST_CASE("HTTP client talks to a served mock over loopback") {
  auto backend = std::make_shared<MockTransport>();
  const auto t2i = make_mock_transport("mock://t2i", kContext);
  const auto det = make_mock_transport("mock://detect", kContext);
  const auto model = make_mock_transport("mock://model?script=truthful", kContext);
  backend->route(kTxt2ImgPath, [t2i](const std::string& b) { return t2i->post(kTxt2ImgPath, b, {}); });
  backend->route(kDetectPath, [det](const std::string& b) { return det->post(kDetectPath, b, {}); });
  backend->route(kQueryPath, [model](const std::string& b) { return model->post(kQueryPath, b, {}); });

  HttpServiceServer server(backend);
  const int port = server.start("127.0.0.1", 0);
  REQUIRE(port > 0);

  ServiceClient client(http_endpoint(port), make_http_transport());
  const auto image = txt2img(client, spec());
  CHECK(embedded_labels(image.png) == std::vector<std::string>{"dog", "frisbee"});
  const auto found = detect(client, image.png, kContext.vocabulary, 0.5);
  CHECK(found.size() == 2);
  CHECK(query_model(client, image.png, "Is there a frisbee in the image?") == "Yes, there is a frisbee in the image.");

  // The in-process path and the HTTP path produce the same bytes.
  ServiceClient direct(ServiceEndpoint{"mock://t2i"}, t2i);
  CHECK(txt2img(direct, spec()).png == image.png);

  // Paths under a URL prefix are not served.
  ServiceEndpoint prefixed = http_endpoint(port);
  prefixed.base_url += "/api/";
  ServiceClient wrong(prefixed, make_http_transport());
  CHECK_THROWS_AS(txt2img(wrong, spec()), ProtocolError);
  server.stop();
}

TEST_CASE("server-side 5xx is retried and then reported as TransportError") {
  auto backend = std::make_shared<MockTransport>();
  backend->route(kQueryPath, [](const std::string&) { return WireResponse{503, "{}"}; });
  HttpServiceServer server(backend);
  const int port = server.start("127.0.0.1", 0);
  ServiceClient client(http_endpoint(port, 2), make_http_transport());
  const Bytes png = make_labeled_png({"dog"});
  try {
    query_model(client, png, "Please describe this image.");
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.attempts().size() == 3);
  }
  CHECK(client.stats().network_calls == 3);
}

TEST_CASE("refused connections are TransportErrors") {
  int port = 0;
  {
    HttpServiceServer server(std::make_shared<MockTransport>());
    port = server.start("127.0.0.1", 0);
    server.stop();
  }
  ServiceClient client(http_endpoint(port, 1), make_http_transport());
  CHECK_THROWS_AS(txt2img(client, spec()), TransportError);
  CHECK(client.stats().network_calls == 2);
}

TEST_CASE("unsupported URL schemes are rejected") {
  ServiceEndpoint e;
  e.base_url = "ftp://example";
  e.retries = 0;
  ServiceClient client(e, make_http_transport());
  CHECK_THROWS_AS(txt2img(client, spec()), ValidationError);
}
