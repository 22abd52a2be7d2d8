#include "ode/services.hpp"

#include <algorithm>
#include <set>
#include <thread>

#include "ode/error.hpp"
#include "ode/png.hpp"

namespace ode {

using nlohmann::json;

json to_json(const Detection& d) {
  return json{{"bbox", d.bbox}, {"confidence", d.confidence}, {"label", d.label}};
}

Detection detection_from_json(const json& doc) {
  Detection d;
  d.label = doc.at("label").get<std::string>();
  d.confidence = doc.at("confidence").get<double>();
  const auto& box = doc.at("bbox");
  if (!box.is_array() || box.size() != 4) throw ProtocolError("bbox must have 4 numbers");
  for (std::size_t i = 0; i < 4; ++i) d.bbox[i] = box[i].get<double>();
  return d;
}

json to_json(const ServiceEndpoint& e) {
  return json{{"backoff_ms", e.backoff.count()},
              {"base_url", e.base_url},
              {"bearer_token", e.bearer_token.empty() ? "" : "<redacted>"},
              {"max_in_flight", e.max_in_flight},
              {"retries", e.retries},
              {"timeout_ms", e.timeout.count()}};
}

ServiceEndpoint endpoint_from_json(const json& doc) {
  ServiceEndpoint e;
  if (doc.is_string()) {
    e.base_url = doc.get<std::string>();
    return e;
  }
  if (!doc.is_object()) throw ValidationError("endpoint must be a URL string or an object");
  e.base_url = doc.value("base_url", std::string());
  e.timeout = std::chrono::milliseconds(doc.value("timeout_ms", e.timeout.count()));
  e.max_in_flight = doc.value("max_in_flight", e.max_in_flight);
  e.retries = doc.value("retries", e.retries);
  e.backoff = std::chrono::milliseconds(doc.value("backoff_ms", e.backoff.count()));
  e.bearer_token = doc.value("bearer_token", std::string());
  validate(e);
  return e;
}

void validate(const ServiceEndpoint& e) {
  if (e.max_in_flight < 1) throw ValidationError("max_in_flight must be >= 1");
  if (e.timeout.count() <= 0) throw ValidationError("timeout must be positive");
  if (e.backoff.count() < 0) throw ValidationError("backoff must be non-negative");
}

// RAII hold on one of the endpoint's in-flight slots.
class ServiceClient::Slot {
 public:
  explicit Slot(ServiceClient& client) : client_(client) {
    std::unique_lock lock(client_.slots_mutex_);
    client_.slots_cv_.wait(lock,
                           [this] { return client_.in_flight_ < client_.endpoint_.max_in_flight; });
    ++client_.in_flight_;
  }
  ~Slot() {
    {
      std::lock_guard lock(client_.slots_mutex_);
      --client_.in_flight_;
    }
    client_.slots_cv_.notify_one();
  }
  Slot(const Slot&) = delete;
  Slot& operator=(const Slot&) = delete;

 private:
  ServiceClient& client_;
};

ServiceClient::ServiceClient(ServiceEndpoint endpoint, std::shared_ptr<Transport> transport,
                             ResponseCache* cache, RequestLog* log)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)), cache_(cache), log_(log) {
  validate(endpoint_);
  if (!transport_) throw ValidationError("service client needs a transport");
}

std::string ServiceClient::request_key(std::string_view base_url, std::string_view path,
                                       const std::string& body) {
  std::string material(base_url);
  material.push_back('\n');
  material.append(path);
  material.push_back('\n');
  material.append(body);
  return content_hash(material);
}

ClientStats ServiceClient::stats() const {
  return ClientStats{calls_.load(), network_calls_.load(), cache_hits_.load(),
                     cache_misses_.load(), retries_.load()};
}

std::string ServiceClient::post_with_retries(std::string_view path, const std::string& body,
                                             std::size_t& attempts_made) {
  std::vector<std::string> attempt_log;
  const std::string target = endpoint_.base_url + std::string(path);
  for (std::size_t attempt = 0; attempt <= endpoint_.retries; ++attempt) {
    if (attempt > 0) {
      ++retries_;
      std::this_thread::sleep_for(endpoint_.backoff * (1LL << std::min<std::size_t>(attempt - 1, 16)));
    }
    ++network_calls_;
    attempts_made = attempt + 1;
    WireResponse response;
    try {
      response = transport_->post(path, body, endpoint_);
    } catch (const TransportFailure& e) {
      attempt_log.push_back("attempt " + std::to_string(attempt + 1) + ": " + e.what());
      continue;
    }
    if (response.status >= 500) {
      attempt_log.push_back("attempt " + std::to_string(attempt + 1) + ": HTTP " +
                            std::to_string(response.status));
      continue;
    }
    if (response.status < 200 || response.status >= 300) {
      throw ProtocolError("HTTP " + std::to_string(response.status) + " from " + target + ": " +
                          response.body.substr(0, 200));
    }
    return std::move(response.body);
  }
  throw TransportError(target + " failed after " + std::to_string(attempt_log.size()) +
                           " attempt(s)",
                       std::move(attempt_log));
}

json ServiceClient::call(std::string_view path, const json& request, const Validator& validate) {
  ++calls_;
  const std::string body = request.dump();
  const std::string key = request_key(endpoint_.base_url, path, body);

  if (cache_) {
    if (auto hit = cache_->lookup(key)) {
      json doc = json::parse(*hit, nullptr, false);
      bool usable = !doc.is_discarded();
      if (usable && validate) {
        try {
          validate(doc);
        } catch (const ProtocolError&) {
          usable = false;
        }
      }
      if (usable) {
        ++cache_hits_;
        if (log_) {
          log_->record(json{{"attempts", 0}, {"cached", true}, {"path", path},
                            {"request_hash", key}, {"response_hash", content_hash(*hit)}});
        }
        return doc;
      }
    }
    ++cache_misses_;
  }

  std::size_t attempts = 0;
  std::string reply;
  {
    Slot slot(*this);
    reply = post_with_retries(path, body, attempts);
  }
  if (reply.empty()) {
    throw ProtocolError("empty response body from " + endpoint_.base_url + std::string(path));
  }
  json doc = json::parse(reply, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ProtocolError("response from " + endpoint_.base_url + std::string(path) +
                        " is not a JSON object");
  }
  if (validate) validate(doc);
  if (cache_) cache_->store(key, reply);
  if (log_) {
    log_->record(json{{"attempts", attempts}, {"cached", false}, {"path", path},
                      {"request_hash", key}, {"response_hash", content_hash(reply)}});
  }
  return doc;
}

json txt2img_request(const ImagePromptSpec& spec, std::uint32_t width, std::uint32_t height) {
  return json{{"height", height},
              {"negative_prompt", spec.negative_prompt},
              {"prompt", spec.prompt},
              {"seed", spec.seed},
              {"style", to_string(spec.style)},
              {"width", width}};
}

json detect_request(std::string_view png, const std::vector<std::string>& vocabulary,
                    double threshold) {
  return json{{"confidence_threshold", threshold},
              {"image_png_base64", base64_encode(png)},
              {"vocabulary", vocabulary}};
}

json query_request(std::string_view png, std::string_view prompt) {
  return json{{"image_png_base64", base64_encode(png)}, {"prompt", prompt}};
}

namespace {

std::string require_string(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_string()) {
    throw ProtocolError(std::string("response lacks string field '") + key + "'");
  }
  return doc.at(key).get<std::string>();
}

Bytes decode_png_field(const json& doc) {
  Bytes png;
  try {
    png = base64_decode(require_string(doc, "image_png_base64"));
    inspect_png(png);
  } catch (const ParseError& e) {
    throw ProtocolError(std::string("txt2img payload is not a valid PNG: ") + e.what());
  }
  return png;
}

}  // namespace

GeneratedImage txt2img(ServiceClient& client, const ImagePromptSpec& spec, std::uint32_t width,
                       std::uint32_t height) {
  const json reply = client.call(kTxt2ImgPath, txt2img_request(spec, width, height),
                                 [](const json& doc) { decode_png_field(doc); });
  return GeneratedImage{decode_png_field(reply), reply.value("backend_id", std::string())};
}

std::vector<Detection> detect(ServiceClient& client, std::string_view png,
                              const std::vector<std::string>& vocabulary, double threshold) {
  if (vocabulary.empty()) throw ValidationError("detect needs a non-empty vocabulary");
  inspect_png(png);
  const std::set<std::string, std::less<>> allowed(vocabulary.begin(), vocabulary.end());
  std::vector<Detection> parsed;
  const auto parse = [&allowed](const json& doc) {
    if (!doc.contains("detections") || !doc.at("detections").is_array()) {
      throw ProtocolError("response lacks 'detections' array");
    }
    std::vector<Detection> out;
    for (const auto& item : doc.at("detections")) {
      Detection d;
      try {
        d = detection_from_json(item);
      } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed detection: ") + e.what());
      }
      if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
        throw ProtocolError("detection confidence outside [0,1]");
      }
      if (!(d.bbox[0] < d.bbox[2] && d.bbox[1] < d.bbox[3])) {
        throw ProtocolError("degenerate detection bbox for '" + d.label + "'");
      }
      if (!allowed.count(d.label)) {
        throw ProtocolError("detection label '" + d.label + "' not in requested vocabulary");
      }
      out.push_back(std::move(d));
    }
    return out;
  };
  const json reply = client.call(kDetectPath, detect_request(png, vocabulary, threshold),
                                 [&parse](const json& doc) { parse(doc); });
  for (auto& d : parse(reply)) {
    if (d.confidence >= threshold) parsed.push_back(std::move(d));
  }
  std::stable_sort(parsed.begin(), parsed.end(), [](const Detection& x, const Detection& y) {
    if (x.confidence != y.confidence) return x.confidence > y.confidence;
    return x.label < y.label;
  });
  return parsed;
}

std::string query_model(ServiceClient& client, std::string_view png, std::string_view prompt) {
  if (prompt.empty()) throw ValidationError("query_model needs a non-empty prompt");
  const json reply = client.call(kQueryPath, query_request(png, prompt),
                                 [](const json& doc) { require_string(doc, "text"); });
  return reply.at("text").get<std::string>();
}

}  // namespace ode
