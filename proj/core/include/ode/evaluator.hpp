#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ode/config.hpp"
#include "ode/prompts.hpp"
#include "ode/records.hpp"
#include "ode/services.hpp"
#include "ode/store.hpp"

namespace ode {

/// Maps surface forms to canonical labels. A surface form belongs to at
/// most one canonical label.
class SynonymTable {
 public:
  SynonymTable() = default;
  explicit SynonymTable(std::string version) : version_(std::move(version)) {}

  /// Lowercases and space-normalizes `surface`. Throws ValidationError when
  /// it is empty or already mapped to a different canonical label.
  void add(std::string_view canonical, std::string_view surface);

  std::optional<std::string> canonical_for(std::string_view surface) const;
  const std::map<std::string, std::set<std::string>>& entries() const { return forms_; }
  const std::string& version() const { return version_; }
  std::size_t size() const { return by_surface_.size(); }

  /// Built-in table: irregular plurals and common compounds / variants.
  static SynonymTable defaults();
  /// Lines "canonical<TAB>surface"; blank lines and lines starting with '#'
  /// are skipped. The version is derived from the content hash.
  static SynonymTable parse(std::string_view text, std::string_view origin = "synonyms");
  static SynonymTable load(const std::filesystem::path& path);

 private:
  std::string version_ = "builtin";
  std::map<std::string, std::set<std::string>> forms_;
  std::map<std::string, std::string, std::less<>> by_surface_;
};

inline constexpr std::string_view kDefaultSynonymVersion = "ode-synonyms/v1";

/// Surface form of a label: lowercase, non-letters turned into single spaces.
std::string surface_form(std::string_view label);

/// Closed-vocabulary mention matcher. Text is lowercased and split on
/// non-letters; at each position the longest run of tokens naming a label
/// (directly or through a synonym) wins. The last token of a run may carry
/// a plural "s" or "es". Synonyms whose canonical label is outside the
/// vocabulary are ignored. Throws ValidationError when a label has no
/// letters or two labels share a surface form ("obj1" and "obj2").
class MentionExtractor {
 public:
  MentionExtractor(const std::vector<std::string>& vocabulary, const SynonymTable& synonyms);

  std::set<std::string> extract(std::string_view text) const;

 private:
  std::optional<std::string> match(const std::vector<std::string>& tokens, std::size_t begin,
                                   std::size_t length) const;

  std::map<std::string, std::string, std::less<>> surfaces_;
  std::size_t max_tokens_ = 1;
};

std::set<std::string> extract_mentions(std::string_view text,
                                       const std::vector<std::string>& vocabulary,
                                       const SynonymTable& synonyms = {});

enum class Verdict { yes, no, invalid };

std::string_view to_string(Verdict verdict) noexcept;
Verdict verdict_from_string(std::string_view text);

/// Leading "yes"/"no" word of the first sentence decides; otherwise the
/// first standalone "yes"/"no" anywhere; otherwise invalid.
Verdict parse_verdict(std::string_view text);

/// One model answer to one question of a case.
struct ModelResponse {
  std::string case_id;
  std::size_t q = 0;  // index into TestCase::questions
  std::string raw;
  QuestionKind kind = QuestionKind::generative;
  std::set<std::string> mentions;      // generative
  Verdict verdict = Verdict::invalid;  // factual / hallucination
  std::string error;                   // set when the query itself failed

  bool generative() const { return kind == QuestionKind::generative; }

  friend bool operator==(const ModelResponse&, const ModelResponse&) = default;
};

/// {"case_id","q","raw","parsed":{...}} plus "error" when the query failed.
nlohmann::json to_json(const ModelResponse& response);
ModelResponse model_response_from_json(const nlohmann::json& doc);

std::vector<ModelResponse> load_responses(const std::filesystem::path& path);
void save_responses(const std::filesystem::path& path, const std::vector<ModelResponse>& responses);

struct EvaluationOptions {
  EvalMode mode = EvalMode::both;
  std::size_t concurrency = 4;
};

/// Queries the model for every selected question of every case. Output is
/// sorted by (case_id, q) whatever the completion order. Transport and
/// protocol failures become invalid responses with an error tag.
std::vector<ModelResponse> evaluate_cases(const std::vector<TestCase>& cases, const Store& store,
                                          ServiceClient& model, const MentionExtractor& extractor,
                                          const EvaluationOptions& options = {});

}  // namespace ode
