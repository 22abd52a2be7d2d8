#include "ode/mock_services.hpp"

#include <algorithm>
#include <thread>

#include <nlohmann/json.hpp>

#include "ode/error.hpp"
#include "ode/png.hpp"

namespace ode {

using nlohmann::json;

namespace {

WireResponse bad_request(const std::string& message) {
  return WireResponse{400, json{{"error", message}}.dump()};
}

WireResponse ok(const json& doc) { return WireResponse{200, doc.dump()}; }

std::optional<PngInfo> decode_image_field(const json& doc, std::string* png_out = nullptr) {
  if (!doc.contains("image_png_base64") || !doc.at("image_png_base64").is_string()) {
    return std::nullopt;
  }
  try {
    Bytes png = base64_decode(doc.at("image_png_base64").get<std::string>());
    PngInfo info = inspect_png(png);
    if (png_out) *png_out = std::move(png);
    return info;
  } catch (const ParseError&) {
    return std::nullopt;
  }
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size() && !text.empty()) {
    const auto end = text.find('\n', pos);
    out.push_back(text.substr(pos, end - pos));
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return out;
}

std::vector<std::string> labels_from_info(const PngInfo& info) {
  const auto it = info.text.find(kMockLabelsKey);
  if (it == info.text.end()) return {};
  auto labels = split_lines(it->second);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

std::string display_label(std::string label) {
  std::replace(label.begin(), label.end(), '_', ' ');
  return label;
}

}  // namespace

std::vector<std::string> embedded_labels(std::string_view png) {
  return labels_from_info(inspect_png(png));
}

Bytes make_labeled_png(const std::vector<std::string>& labels, std::string_view prompt,
                       std::string_view salt, std::uint32_t size) {
  RasterImage image;
  image.width = size;
  image.height = size;
  image.rgb.resize(std::size_t{size} * size * 3);
  const std::string digest = sha256_hex(salt);
  for (std::size_t i = 0; i < image.rgb.size(); ++i) {
    const auto nibble = static_cast<std::uint8_t>(digest[i % digest.size()]);
    image.rgb[i] = static_cast<std::uint8_t>(nibble * 7 + (i / 3) % size * 3);
  }
  std::map<std::string, std::string> text;
  std::string joined;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) joined.push_back('\n');
    joined += labels[i];
  }
  text[kMockLabelsKey] = joined;
  if (!prompt.empty()) text[kMockPromptKey] = std::string(prompt);
  return encode_png(image, text);
}

WireResponse MockTxt2Img::handle(const std::string& body) const {
  const json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return bad_request("body is not a JSON object");
  for (const char* key : {"prompt", "negative_prompt", "style"}) {
    if (!doc.contains(key) || !doc.at(key).is_string()) {
      return bad_request(std::string("missing string field ") + key);
    }
  }
  for (const char* key : {"seed", "width", "height"}) {
    if (!doc.contains(key) || !doc.at(key).is_number_unsigned()) {
      return bad_request(std::string("missing unsigned field ") + key);
    }
  }
  const auto prompt = doc.at("prompt").get<std::string>();
  const auto labels = parse_image_prompt(prompt, templates_);
  if (!labels) return bad_request("prompt does not match the image template");
  const Bytes png = make_labeled_png({labels->first, labels->second}, prompt, body, size_);
  return ok(json{{"backend_id", "mock-t2i/v1"}, {"image_png_base64", base64_encode(png)}});
}

std::optional<std::string> MockDetector::omitted_label(std::string_view prompt) const {
  if (options_.omit_fraction <= 0.0) return std::nullopt;
  const auto labels = parse_image_prompt(prompt, templates_);
  if (!labels) return std::nullopt;
  const std::uint64_t draw = seed_from_hash(
      sha256_hex(std::to_string(options_.script_seed) + "|" + std::string(prompt)));
  if (static_cast<double>(draw % 1000000) >= options_.omit_fraction * 1e6) return std::nullopt;
  return ((draw >> 32) & 1) ? labels->second : labels->first;
}

WireResponse MockDetector::handle(const std::string& body) const {
  const json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return bad_request("body is not a JSON object");
  const auto info = decode_image_field(doc);
  if (!info) return bad_request("image_png_base64 is not a valid PNG");
  if (!doc.contains("vocabulary") || !doc.at("vocabulary").is_array() ||
      doc.at("vocabulary").empty()) {
    return bad_request("vocabulary must be a non-empty array");
  }
  if (!doc.contains("confidence_threshold") || !doc.at("confidence_threshold").is_number()) {
    return bad_request("missing confidence_threshold");
  }
  const auto vocabulary = doc.at("vocabulary").get<std::vector<std::string>>();
  const double threshold = doc.at("confidence_threshold").get<double>();
  const auto prompt_it = info->text.find(kMockPromptKey);
  const std::optional<std::string> omitted =
      prompt_it == info->text.end() ? std::nullopt : omitted_label(prompt_it->second);

  json detections = json::array();
  double offset = 0.0;
  for (const auto& label : labels_from_info(*info)) {
    if (std::find(vocabulary.begin(), vocabulary.end(), label) == vocabulary.end()) continue;
    if (omitted && *omitted == label) continue;
    if (options_.confidence < threshold) continue;
    const double w = info->width;
    const double h = info->height;
    detections.push_back(to_json(Detection{
        label, options_.confidence, {offset, offset, std::max(w, offset + 1), std::max(h, offset + 1)}}));
    offset += 2.0;
  }
  return ok(json{{"detections", detections}});
}

std::string_view to_string(MockScript script) noexcept {
  switch (script) {
    case MockScript::truthful: return "truthful";
    case MockScript::always_yes: return "always_yes";
    case MockScript::always_no: return "always_no";
    case MockScript::refuser: return "refuser";
    case MockScript::add_one_hallucination: return "add_one_hallucination";
  }
  return "unknown";
}

MockScript mock_script_from_string(std::string_view text) {
  for (auto s : {MockScript::truthful, MockScript::always_yes, MockScript::always_no,
                 MockScript::refuser, MockScript::add_one_hallucination}) {
    if (to_string(s) == text) return s;
  }
  throw ValidationError("unknown mock script '" + std::string(text) + "'");
}

std::string mock_caption(const std::vector<std::string>& labels) {
  if (labels.empty()) return "The image shows nothing recognizable.";
  std::string out = "The image shows ";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ", ";
    out += display_label(labels[i]);
  }
  return out + ".";
}

WireResponse MockModel::handle(const std::string& body) const {
  const json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return bad_request("body is not a JSON object");
  const auto info = decode_image_field(doc);
  if (!info) return bad_request("image_png_base64 is not a valid PNG");
  if (!doc.contains("prompt") || !doc.at("prompt").is_string() ||
      doc.at("prompt").get<std::string>().empty()) {
    return bad_request("prompt must be a non-empty string");
  }
  const auto prompt = doc.at("prompt").get<std::string>();
  if (script_ == MockScript::refuser) return ok(json{{"text", "I cannot answer that."}});

  std::vector<std::string> labels = labels_from_info(*info);
  if (const auto target = parse_existence_question(prompt, templates_)) {
    const bool present = std::find(labels.begin(), labels.end(), *target) != labels.end();
    std::string text;
    switch (script_) {
      case MockScript::always_yes: text = "Yes"; break;
      case MockScript::always_no: text = "No"; break;
      default:
        text = present ? "Yes, there is a " + display_label(*target) + " in the image."
                       : "No, there is no " + display_label(*target) + " in the image.";
    }
    return ok(json{{"text", text}});
  }
  if (script_ == MockScript::add_one_hallucination) {
    for (const auto& candidate : vocabulary_) {
      if (std::find(labels.begin(), labels.end(), candidate) == labels.end()) {
        labels.push_back(candidate);
        break;
      }
    }
  }
  return ok(json{{"text", mock_caption(labels)}});
}

void MockTransport::route(std::string_view path, Handler handler) {
  std::lock_guard lock(routes_mutex_);
  routes_[std::string(path)] = std::move(handler);
}

WireResponse MockTransport::post(std::string_view path, const std::string& body,
                                 const ServiceEndpoint&) {
  ++calls_;
  if (unreachable_) throw TransportFailure("connection refused (mock endpoint unreachable)");
  const std::size_t now = ++in_flight_;
  std::size_t peak = peak_.load();
  while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
  }
  struct Leave {
    std::atomic<std::size_t>& counter;
    ~Leave() { --counter; }
  } leave{in_flight_};

  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
  std::size_t remaining = fail_remaining_.load();
  while (remaining > 0 && !fail_remaining_.compare_exchange_weak(remaining, remaining - 1)) {
  }
  if (remaining > 0) return WireResponse{503, R"({"error":"injected failure"})"};

  Handler handler;
  {
    std::lock_guard lock(routes_mutex_);
    const auto it = routes_.find(path);
    if (it == routes_.end()) return WireResponse{404, R"({"error":"no such route"})"};
    handler = it->second;
  }
  return handler(body);
}

namespace {

std::map<std::string, std::string> parse_query(std::string_view query) {
  std::map<std::string, std::string> out;
  while (!query.empty()) {
    const auto amp = query.find('&');
    const std::string_view item = query.substr(0, amp);
    const auto eq = item.find('=');
    out[std::string(item.substr(0, eq))] =
        eq == std::string_view::npos ? "" : std::string(item.substr(eq + 1));
    if (amp == std::string_view::npos) break;
    query.remove_prefix(amp + 1);
  }
  return out;
}

}  // namespace

std::shared_ptr<MockTransport> make_mock_transport(const std::string& url,
                                                   const MockContext& context) {
  constexpr std::string_view scheme = "mock://";
  if (url.rfind(scheme, 0) != 0) throw ValidationError("not a mock URL: " + url);
  std::string_view rest(url);
  rest.remove_prefix(scheme.size());
  const auto q = rest.find('?');
  std::string role(rest.substr(0, q));
  while (!role.empty() && role.back() == '/') role.pop_back();
  const auto params =
      q == std::string_view::npos ? std::map<std::string, std::string>{} : parse_query(rest.substr(q + 1));
  const auto param = [&params](const char* key) -> std::optional<std::string> {
    const auto it = params.find(key);
    return it == params.end() ? std::nullopt : std::optional<std::string>(it->second);
  };

  auto transport = std::make_shared<MockTransport>();
  try {
    if (role == "t2i") {
      MockTxt2Img service(context.templates);
      transport->route(kTxt2ImgPath, [service](const std::string& b) { return service.handle(b); });
    } else if (role == "detect") {
      MockDetectorOptions options;
      if (auto v = param("confidence")) options.confidence = std::stod(*v);
      if (auto v = param("omit")) options.omit_fraction = std::stod(*v);
      if (auto v = param("seed")) options.script_seed = std::stoull(*v);
      MockDetector service(options, context.templates);
      transport->route(kDetectPath, [service](const std::string& b) { return service.handle(b); });
    } else if (role == "model") {
      const MockScript script = mock_script_from_string(param("script").value_or("truthful"));
      MockModel service(script, context.vocabulary, context.templates);
      transport->route(kQueryPath, [service](const std::string& b) { return service.handle(b); });
    } else {
      throw ValidationError("unknown mock role '" + role + "' (expected t2i, detect, model)");
    }
    if (auto v = param("latency_ms")) transport->set_latency(std::chrono::milliseconds(std::stoll(*v)));
    if (auto v = param("fail_first")) transport->fail_first(std::stoull(*v));
  } catch (const std::logic_error& e) {  // std::stod & co.
    throw ValidationError("bad mock URL parameter in '" + url + "': " + e.what());
  }
  return transport;
}

std::shared_ptr<Transport> make_transport(const ServiceEndpoint& endpoint,
                                          const MockContext& context) {
  if (endpoint.base_url.rfind("mock://", 0) == 0) {
    return make_mock_transport(endpoint.base_url, context);
  }
  return make_http_transport();
}

}  // namespace ode
