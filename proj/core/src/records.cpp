#include "ode/records.hpp"

#include <nlohmann/json.hpp>

#include "ode/error.hpp"
#include "ode/hashing.hpp"

namespace ode {

using nlohmann::json;

std::string_view to_string(Source source) noexcept {
  return source == Source::synthesized ? "synthesized" : "ingested";
}

Source source_from_string(std::string_view text) {
  if (text == "synthesized") return Source::synthesized;
  if (text == "ingested") return Source::ingested;
  throw ValidationError("unknown source '" + std::string(text) + "'");
}

json to_json(const ConceptPair& pair) {
  return json{{"a", {{"label", pair.a.label}, {"level", to_string(pair.a.level)}}},
              {"b", {{"label", pair.b.label}, {"level", to_string(pair.b.level)}}},
              {"criterion", to_string(pair.criterion)},
              {"weight", pair.weight}};
}

ConceptPair concept_pair_from_json(const json& doc) {
  ConceptPair pair;
  pair.a = Concept{doc.at("a").at("label").get<std::string>(),
                   level_from_string(doc.at("a").at("level").get<std::string>())};
  pair.b = Concept{doc.at("b").at("label").get<std::string>(),
                   level_from_string(doc.at("b").at("level").get<std::string>())};
  pair.weight = doc.at("weight").get<std::uint64_t>();
  pair.criterion = criterion_from_string(doc.at("criterion").get<std::string>());
  if (!(pair.a.label < pair.b.label)) {
    throw ValidationError("pair labels out of canonical order: " + pair.a.label + ", " +
                          pair.b.label);
  }
  if (!edge_allowed(pair.a.level, pair.b.level)) {
    throw ValidationError("environment-environment pair " + pair.a.label + ", " + pair.b.label);
  }
  return pair;
}

std::string synthesized_case_id(const ConceptPair& pair, Style style, std::uint64_t seed) {
  const json key{{"a", pair.a.label},
                 {"b", pair.b.label},
                 {"criterion", to_string(pair.criterion)},
                 {"seed", seed},
                 {"style", to_string(style)}};
  return content_hash(key.dump());
}

std::string ingested_case_id(const ConceptPair& pair, Style style, std::string_view image_ref) {
  const json key{{"a", pair.a.label},
                 {"b", pair.b.label},
                 {"criterion", to_string(pair.criterion)},
                 {"image_ref", image_ref},
                 {"style", to_string(style)}};
  return content_hash(key.dump());
}

void validate(const TestCase& c, const PromptTemplates& templates) {
  if (c.case_id.empty()) throw ValidationError("test case without case_id");
  if (!c.truth.count(c.pair.a.label) || !c.truth.count(c.pair.b.label)) {
    throw ValidationError("case " + c.case_id + ": pair labels missing from truth");
  }
  for (const auto& label : c.hallucination_targets) {
    if (c.truth.count(label)) {
      throw ValidationError("case " + c.case_id + ": '" + label +
                            "' is both truth and hallucination target");
    }
  }
  if (c.questions != question_set(c.truth, c.hallucination_targets, templates)) {
    throw ValidationError("case " + c.case_id + ": questions do not match question_set");
  }
}

json to_json(const TestCase& c) {
  json questions = json::array();
  for (const auto& q : c.questions) questions.push_back(to_json(q));
  json detections = json::array();
  for (const auto& d : c.detections) detections.push_back(to_json(d));
  return json{{"case_id", c.case_id},
              {"detections", detections},
              {"hallucination_targets", c.hallucination_targets},
              {"image_ref", c.image_ref},
              {"image_seed", c.image_seed},
              {"origin", c.origin},
              {"pair", to_json(c.pair)},
              {"questions", questions},
              {"seed", c.seed},
              {"source", to_string(c.source)},
              {"style", to_string(c.style)},
              {"truth", c.truth}};
}

TestCase test_case_from_json(const json& doc, const PromptTemplates& templates) {
  TestCase c;
  try {
    c.case_id = doc.at("case_id").get<std::string>();
    c.pair = concept_pair_from_json(doc.at("pair"));
    c.style = style_from_string(doc.at("style").get<std::string>());
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.image_seed = doc.at("image_seed").get<std::uint64_t>();
    c.image_ref = doc.at("image_ref").get<std::string>();
    c.truth = doc.at("truth").get<std::set<std::string>>();
    c.hallucination_targets = doc.at("hallucination_targets").get<std::set<std::string>>();
    for (const auto& q : doc.at("questions")) c.questions.push_back(question_from_json(q));
    for (const auto& d : doc.at("detections")) c.detections.push_back(detection_from_json(d));
    c.source = source_from_string(doc.at("source").get<std::string>());
    c.origin = doc.value("origin", std::string());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed test case record: ") + e.what());
  }
  validate(c, templates);
  return c;
}

json to_json(const FilteredRecord& r) {
  return json{{"attempts", r.attempts},
              {"case_id", r.case_id},
              {"image_ref", r.image_ref},
              {"image_seed", r.image_seed},
              {"origin", r.origin},
              {"pair", to_json(r.pair)},
              {"reason", r.reason},
              {"seed", r.seed},
              {"source", to_string(r.source)},
              {"style", to_string(r.style)}};
}

FilteredRecord filtered_record_from_json(const json& doc) {
  FilteredRecord r;
  try {
    r.case_id = doc.at("case_id").get<std::string>();
    r.pair = concept_pair_from_json(doc.at("pair"));
    r.style = style_from_string(doc.at("style").get<std::string>());
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.image_seed = doc.at("image_seed").get<std::uint64_t>();
    r.image_ref = doc.at("image_ref").get<std::string>();
    r.reason = doc.at("reason").get<std::string>();
    r.attempts = doc.value("attempts", std::size_t{1});
    r.source = source_from_string(doc.at("source").get<std::string>());
    r.origin = doc.value("origin", std::string());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed filtered record: ") + e.what());
  }
  return r;
}

json to_json(const ErrorRecord& r) {
  return json{{"case_id", r.case_id}, {"criterion", r.criterion}, {"kind", r.kind},
              {"message", r.message}, {"origin", r.origin}};
}

}  // namespace ode
