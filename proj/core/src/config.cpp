#include "ode/config.hpp"

#include <set>

#include "ode/error.hpp"
#include "ode/hashing.hpp"
#include "ode/store.hpp"

namespace ode {

using nlohmann::json;

std::string_view to_string(PositiveClass positive) noexcept {
  return positive == PositiveClass::yes ? "yes" : "no";
}

PositiveClass positive_class_from_string(std::string_view text) {
  if (text == "yes") return PositiveClass::yes;
  if (text == "no") return PositiveClass::no;
  throw ValidationError("positive_class must be 'yes' or 'no', got '" + std::string(text) + "'");
}

std::string_view to_string(EvalMode mode) noexcept {
  switch (mode) {
    case EvalMode::generative: return "generative";
    case EvalMode::discriminative: return "discriminative";
    case EvalMode::both: return "both";
  }
  return "unknown";
}

EvalMode eval_mode_from_string(std::string_view text) {
  if (text == "generative") return EvalMode::generative;
  if (text == "discriminative") return EvalMode::discriminative;
  if (text == "both") return EvalMode::both;
  throw ValidationError("mode must be generative, discriminative or both");
}

RunConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  static const std::set<std::string> known = {
      "store",          "graph",          "run_id",       "endpoints",    "threshold",
      "k",              "criteria",       "styles",       "hallucination_cap",
      "seed",           "image_width",    "image_height", "max_regen_attempts",
      "concurrency",    "templates",      "synonyms",     "positive_class",
      "eval_mode",      "cluster_k",      "cluster_seed"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) throw ValidationError("unknown config key '" + key + "'");
  }
  RunConfig c;
  try {
    if (doc.contains("store")) c.store_root = doc.at("store").get<std::string>();
    if (doc.contains("graph")) c.graph_path = doc.at("graph").get<std::string>();
    c.run_id = doc.value("run_id", c.run_id);
    if (doc.contains("endpoints")) {
      const auto& endpoints = doc.at("endpoints");
      for (const auto& [key, value] : endpoints.items()) {
        if (key != "t2i" && key != "detect" && key != "model") {
          throw ValidationError("unknown endpoint '" + key + "' (expected t2i, detect, model)");
        }
      }
      if (endpoints.contains("t2i")) c.t2i = endpoint_from_json(endpoints.at("t2i"));
      if (endpoints.contains("detect")) c.detector = endpoint_from_json(endpoints.at("detect"));
      if (endpoints.contains("model")) c.model = endpoint_from_json(endpoints.at("model"));
    }
    c.threshold = doc.value("threshold", c.threshold);
    c.k = doc.value("k", c.k);
    if (doc.contains("criteria")) {
      c.criteria.clear();
      for (const auto& item : doc.at("criteria")) {
        c.criteria.push_back(criterion_from_string(item.get<std::string>()));
      }
    }
    if (doc.contains("styles")) {
      c.styles.clear();
      for (const auto& item : doc.at("styles")) c.styles.push_back(style_from_string(item.get<std::string>()));
    }
    c.hallucination_cap = doc.value("hallucination_cap", c.hallucination_cap);
    c.seed = doc.value("seed", c.seed);
    c.image_width = doc.value("image_width", c.image_width);
    c.image_height = doc.value("image_height", c.image_height);
    c.max_regen_attempts = doc.value("max_regen_attempts", c.max_regen_attempts);
    c.concurrency = doc.value("concurrency", c.concurrency);
    if (doc.contains("templates")) c.templates = templates_from_json(doc.at("templates"));
    if (doc.contains("synonyms")) c.synonyms_path = doc.at("synonyms").get<std::string>();
    if (doc.contains("positive_class")) {
      c.positive_class = positive_class_from_string(doc.at("positive_class").get<std::string>());
    }
    if (doc.contains("eval_mode")) c.eval_mode = eval_mode_from_string(doc.at("eval_mode").get<std::string>());
    c.cluster_k = doc.value("cluster_k", c.cluster_k);
    c.cluster_seed = doc.value("cluster_seed", c.cluster_seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config type error: ") + e.what());
  }
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), e.byte);
  }
  return config_from_json(doc);
}

json to_json(const RunConfig& c) {
  json criteria = json::array();
  for (auto criterion : c.criteria) criteria.push_back(to_string(criterion));
  json styles = json::array();
  for (auto style : c.styles) styles.push_back(to_string(style));
  return json{{"cluster_k", c.cluster_k},
              {"cluster_seed", c.cluster_seed},
              {"concurrency", c.concurrency},
              {"criteria", criteria},
              {"endpoints",
               {{"detect", to_json(c.detector)}, {"model", to_json(c.model)}, {"t2i", to_json(c.t2i)}}},
              {"eval_mode", to_string(c.eval_mode)},
              {"graph", c.graph_path.string()},
              {"hallucination_cap", c.hallucination_cap},
              {"image_height", c.image_height},
              {"image_width", c.image_width},
              {"k", c.k},
              {"max_regen_attempts", c.max_regen_attempts},
              {"positive_class", to_string(c.positive_class)},
              {"run_id", c.run_id},
              {"seed", c.seed},
              {"store", c.store_root.string()},
              {"styles", styles},
              {"synonyms", c.synonyms_path.string()},
              {"templates", to_json(c.templates)},
              {"threshold", c.threshold}};
}

void apply_env_overrides(RunConfig& config,
                         const std::function<const char*(const char*)>& getenv_fn) {
  const auto apply = [&getenv_fn](const char* name, ServiceEndpoint& endpoint) {
    const char* value = getenv_fn(name);
    if (value && *value) endpoint.base_url = value;
  };
  apply(kTxt2ImgUrlEnv, config.t2i);
  apply(kDetectUrlEnv, config.detector);
  apply(kModelUrlEnv, config.model);
}

std::string derived_run_id(const RunConfig& config) {
  json key = to_json(config);
  key.erase("run_id");
  key.erase("store");
  key.erase("concurrency");
  key.erase("eval_mode");
  key.erase("positive_class");
  key.erase("cluster_k");
  key.erase("cluster_seed");
  // Retry/timeouts do not change what gets generated.
  for (auto& [name, endpoint] : key["endpoints"].items()) {
    endpoint = endpoint["base_url"];
  }
  return content_hash(key.dump()).substr(0, 12);
}

void validate(const RunConfig& c) {
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) {
    throw ValidationError("threshold must lie in [0, 1]");
  }
  if (c.k == 0) throw ValidationError("k must be at least 1");
  if (c.criteria.empty()) throw ValidationError("at least one criterion is required");
  if (c.styles.empty()) throw ValidationError("at least one style is required");
  if (c.image_width == 0 || c.image_height == 0) throw ValidationError("image size must be positive");
  if (c.max_regen_attempts == 0) throw ValidationError("max_regen_attempts must be at least 1");
  if (c.concurrency == 0) throw ValidationError("concurrency must be at least 1");
  if (c.cluster_k == 0) throw ValidationError("cluster_k must be at least 1");
}

}  // namespace ode
