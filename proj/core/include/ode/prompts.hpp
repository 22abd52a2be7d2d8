#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ode/sampler.hpp"

namespace ode {

enum class Style { photo, anime };

std::string_view to_string(Style style) noexcept;
Style style_from_string(std::string_view text);

/// Every template string the generator emits. Defaults are the shipped
/// constants; a run config may override any of them, and `version` is
/// recorded in the run manifest either way.
struct PromptTemplates {
  std::string version = "ode-templates/v1";
  std::string image_prompt = "a picture of {a} and {b}";
  std::string photo_suffix = ", photograph, realistic, high detail";
  std::string anime_suffix = ", anime style illustration";
  std::string photo_negative = "blurry, low quality, extra limbs, watermark, text";
  std::string anime_negative = "blurry, low quality, extra limbs, watermark, text";
  std::string describe = "Please describe this image.";
  std::string existence = "Is there a {object} in the image?";
};

nlohmann::json to_json(const PromptTemplates& templates);
/// Starts from the defaults and overrides whichever keys are present.
PromptTemplates templates_from_json(const nlohmann::json& doc);

struct ImagePromptSpec {
  ConceptPair pair;
  Style style = Style::photo;
  std::string prompt;
  std::string negative_prompt;
  std::uint64_t seed = 0;

  friend bool operator==(const ImagePromptSpec&, const ImagePromptSpec&) = default;
};

ImagePromptSpec image_prompt(const ConceptPair& pair, Style style, std::uint64_t seed,
                             const PromptTemplates& templates = {});

/// Recovers the two labels from a prompt built by image_prompt (the style
/// suffix, if any, is ignored). Returns nullopt when the text does not fit
/// the template.
std::optional<std::pair<std::string, std::string>> parse_image_prompt(
    std::string_view prompt, const PromptTemplates& templates = {});

enum class QuestionKind { generative, factual, hallucination };
enum class GroundTruth { yes, no, none };

std::string_view to_string(QuestionKind kind) noexcept;
QuestionKind question_kind_from_string(std::string_view text);
std::string_view to_string(GroundTruth truth) noexcept;
GroundTruth ground_truth_from_string(std::string_view text);

struct Question {
  QuestionKind kind = QuestionKind::generative;
  std::string text;
  std::optional<std::string> target;
  GroundTruth ground_truth = GroundTruth::none;

  friend bool operator==(const Question&, const Question&) = default;
};

nlohmann::json to_json(const Question& question);
Question question_from_json(const nlohmann::json& doc);

std::string existence_question(std::string_view label, const PromptTemplates& templates = {});

/// Inverse of existence_question; nullopt if `text` does not match.
std::optional<std::string> parse_existence_question(std::string_view text,
                                                    const PromptTemplates& templates = {});

/// One describe prompt, then one yes-question per truth label and one
/// no-question per hallucination target, each group in label order. The sets
/// must be disjoint and truth non-empty (ValidationError otherwise).
std::vector<Question> question_set(const std::set<std::string>& truth,
                                   const std::set<std::string>& hallucination_targets,
                                   const PromptTemplates& templates = {});

}  // namespace ode
