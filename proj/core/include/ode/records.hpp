#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ode/prompts.hpp"
#include "ode/sampler.hpp"
#include "ode/services.hpp"

namespace ode {

inline constexpr std::string_view kToolVersion = "ode 0.1.0";

enum class Source { synthesized, ingested };

std::string_view to_string(Source source) noexcept;
Source source_from_string(std::string_view text);

/// One accepted image with its truth annotation and question set.
struct TestCase {
  std::string case_id;
  ConceptPair pair;
  Style style = Style::photo;
  std::uint64_t seed = 0;        // batch seed that, with pair and style, fixes case_id
  std::uint64_t image_seed = 0;  // seed sent to the text-to-image service
  std::string image_ref;
  std::set<std::string> truth;
  std::set<std::string> hallucination_targets;
  std::vector<Question> questions;
  std::vector<Detection> detections;
  Source source = Source::synthesized;
  std::string origin;  // ingested file name; empty when synthesized

  friend bool operator==(const TestCase&, const TestCase&) = default;
};

/// Throws ValidationError when a case breaks its invariants: both pair
/// labels in truth, truth and targets disjoint, questions equal to
/// question_set(truth, targets).
void validate(const TestCase& test_case, const PromptTemplates& templates = {});

nlohmann::json to_json(const TestCase& test_case);
/// Parses and validates.
TestCase test_case_from_json(const nlohmann::json& doc, const PromptTemplates& templates = {});

/// A generated or ingested image that did not pass the detection filter.
struct FilteredRecord {
  std::string case_id;
  ConceptPair pair;
  Style style = Style::photo;
  std::uint64_t seed = 0;
  std::uint64_t image_seed = 0;
  std::string image_ref;
  std::string reason;  // "missing: <label>[, <label>]"
  std::size_t attempts = 1;
  Source source = Source::synthesized;
  std::string origin;

  friend bool operator==(const FilteredRecord&, const FilteredRecord&) = default;
};

nlohmann::json to_json(const FilteredRecord& record);
FilteredRecord filtered_record_from_json(const nlohmann::json& doc);

/// A case that could not be completed (service failure, unreadable file).
struct ErrorRecord {
  std::string case_id;
  std::string criterion;
  std::string origin;
  std::string kind;
  std::string message;
};

nlohmann::json to_json(const ErrorRecord& record);

nlohmann::json to_json(const ConceptPair& pair);
ConceptPair concept_pair_from_json(const nlohmann::json& doc);

/// Content hash identifying a synthesized case.
std::string synthesized_case_id(const ConceptPair& pair, Style style, std::uint64_t seed);
/// Content hash identifying an ingested case; the image hash stands in for
/// the seed.
std::string ingested_case_id(const ConceptPair& pair, Style style, std::string_view image_ref);

}  // namespace ode
