#include "ode/prompts.hpp"

#include <nlohmann/json.hpp>

#include "ode/error.hpp"

namespace ode {

using nlohmann::json;

namespace {

std::string substitute(std::string_view pattern, std::string_view placeholder,
                       std::string_view value) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto hit = pattern.find(placeholder, pos);
    out.append(pattern.substr(pos, hit - pos));
    if (hit == std::string_view::npos) break;
    out.append(value);
    pos = hit + placeholder.size();
  }
  return out;
}

// Splits a template around a single placeholder.
std::pair<std::string_view, std::string_view> around(std::string_view pattern,
                                                     std::string_view placeholder) {
  const auto hit = pattern.find(placeholder);
  if (hit == std::string_view::npos) {
    throw ValidationError("template '" + std::string(pattern) + "' lacks " +
                          std::string(placeholder));
  }
  return {pattern.substr(0, hit), pattern.substr(hit + placeholder.size())};
}

}  // namespace

std::string_view to_string(Style style) noexcept {
  return style == Style::photo ? "photo" : "anime";
}

Style style_from_string(std::string_view text) {
  if (text == "photo") return Style::photo;
  if (text == "anime") return Style::anime;
  throw ValidationError("unknown style '" + std::string(text) + "' (expected photo or anime)");
}

json to_json(const PromptTemplates& t) {
  return json{{"anime_negative", t.anime_negative}, {"anime_suffix", t.anime_suffix},
              {"describe", t.describe},             {"existence", t.existence},
              {"image_prompt", t.image_prompt},     {"photo_negative", t.photo_negative},
              {"photo_suffix", t.photo_suffix},     {"version", t.version}};
}

PromptTemplates templates_from_json(const json& doc) {
  PromptTemplates t;
  if (doc.is_null()) return t;
  if (!doc.is_object()) throw ValidationError("templates must be an object");
  const auto take = [&doc](const char* key, std::string& field) {
    if (doc.contains(key)) field = doc.at(key).get<std::string>();
  };
  take("version", t.version);
  take("image_prompt", t.image_prompt);
  take("photo_suffix", t.photo_suffix);
  take("anime_suffix", t.anime_suffix);
  take("photo_negative", t.photo_negative);
  take("anime_negative", t.anime_negative);
  take("describe", t.describe);
  take("existence", t.existence);
  around(t.image_prompt, "{a}");
  around(t.image_prompt, "{b}");
  around(t.existence, "{object}");
  return t;
}

ImagePromptSpec image_prompt(const ConceptPair& pair, Style style, std::uint64_t seed,
                             const PromptTemplates& templates) {
  std::string head = substitute(templates.image_prompt, "{a}", pair.a.label);
  head = substitute(head, "{b}", pair.b.label);
  const bool photo = style == Style::photo;
  return ImagePromptSpec{pair, style, head + (photo ? templates.photo_suffix : templates.anime_suffix),
                         photo ? templates.photo_negative : templates.anime_negative, seed};
}

std::optional<std::pair<std::string, std::string>> parse_image_prompt(
    std::string_view prompt, const PromptTemplates& templates) {
  const std::string_view pattern = templates.image_prompt;
  const auto pa = pattern.find("{a}");
  const auto pb = pattern.find("{b}");
  if (pa == std::string_view::npos || pb == std::string_view::npos || pb < pa) return std::nullopt;
  const std::string_view prefix = pattern.substr(0, pa);
  const std::string_view middle = pattern.substr(pa + 3, pb - pa - 3);
  const std::string_view tail = pattern.substr(pb + 3);
  if (prompt.substr(0, prefix.size()) != prefix) return std::nullopt;
  prompt.remove_prefix(prefix.size());
  // Strip a known style suffix before splitting on the middle separator.
  for (const std::string* suffix : {&templates.photo_suffix, &templates.anime_suffix}) {
    if (!suffix->empty() && prompt.size() >= suffix->size() &&
        prompt.substr(prompt.size() - suffix->size()) == *suffix) {
      prompt.remove_suffix(suffix->size());
      break;
    }
  }
  if (!tail.empty()) {
    if (prompt.size() < tail.size() || prompt.substr(prompt.size() - tail.size()) != tail) {
      return std::nullopt;
    }
    prompt.remove_suffix(tail.size());
  }
  const auto split = prompt.find(middle);
  if (middle.empty() || split == std::string_view::npos || split == 0 ||
      split + middle.size() >= prompt.size()) {
    return std::nullopt;
  }
  return std::make_pair(std::string(prompt.substr(0, split)),
                        std::string(prompt.substr(split + middle.size())));
}

std::string_view to_string(QuestionKind kind) noexcept {
  switch (kind) {
    case QuestionKind::generative: return "generative";
    case QuestionKind::factual: return "factual";
    case QuestionKind::hallucination: return "hallucination";
  }
  return "unknown";
}

QuestionKind question_kind_from_string(std::string_view text) {
  if (text == "generative") return QuestionKind::generative;
  if (text == "factual") return QuestionKind::factual;
  if (text == "hallucination") return QuestionKind::hallucination;
  throw ValidationError("unknown question kind '" + std::string(text) + "'");
}

std::string_view to_string(GroundTruth truth) noexcept {
  switch (truth) {
    case GroundTruth::yes: return "yes";
    case GroundTruth::no: return "no";
    case GroundTruth::none: return "none";
  }
  return "unknown";
}

GroundTruth ground_truth_from_string(std::string_view text) {
  if (text == "yes") return GroundTruth::yes;
  if (text == "no") return GroundTruth::no;
  if (text == "none") return GroundTruth::none;
  throw ValidationError("unknown ground truth '" + std::string(text) + "'");
}

json to_json(const Question& q) {
  return json{{"ground_truth", to_string(q.ground_truth)},
              {"kind", to_string(q.kind)},
              {"target", q.target ? json(*q.target) : json(nullptr)},
              {"text", q.text}};
}

Question question_from_json(const json& doc) {
  Question q;
  q.kind = question_kind_from_string(doc.at("kind").get<std::string>());
  q.text = doc.at("text").get<std::string>();
  if (doc.contains("target") && !doc.at("target").is_null()) {
    q.target = doc.at("target").get<std::string>();
  }
  q.ground_truth = ground_truth_from_string(doc.at("ground_truth").get<std::string>());
  const bool consistent =
      (q.kind == QuestionKind::generative && !q.target && q.ground_truth == GroundTruth::none) ||
      (q.kind == QuestionKind::factual && q.target && q.ground_truth == GroundTruth::yes) ||
      (q.kind == QuestionKind::hallucination && q.target && q.ground_truth == GroundTruth::no);
  if (!consistent) throw ValidationError("question kind/target/ground_truth mismatch: " + doc.dump());
  return q;
}

std::string existence_question(std::string_view label, const PromptTemplates& templates) {
  return substitute(templates.existence, "{object}", label);
}

std::optional<std::string> parse_existence_question(std::string_view text,
                                                    const PromptTemplates& templates) {
  const auto [prefix, suffix] = around(templates.existence, "{object}");
  if (text.size() <= prefix.size() + suffix.size()) return std::nullopt;
  if (text.substr(0, prefix.size()) != prefix) return std::nullopt;
  if (text.substr(text.size() - suffix.size()) != suffix) return std::nullopt;
  return std::string(text.substr(prefix.size(), text.size() - prefix.size() - suffix.size()));
}

std::vector<Question> question_set(const std::set<std::string>& truth,
                                   const std::set<std::string>& hallucination_targets,
                                   const PromptTemplates& templates) {
  if (truth.empty()) throw ValidationError("question_set needs at least one truth label");
  for (const auto& label : hallucination_targets) {
    if (truth.count(label)) {
      throw ValidationError("label '" + label + "' is both truth and hallucination target");
    }
  }
  std::vector<Question> out;
  out.reserve(1 + truth.size() + hallucination_targets.size());
  out.push_back(Question{QuestionKind::generative, templates.describe, std::nullopt,
                         GroundTruth::none});
  for (const auto& label : truth) {
    out.push_back(Question{QuestionKind::factual, existence_question(label, templates), label,
                           GroundTruth::yes});
  }
  for (const auto& label : hallucination_targets) {
    out.push_back(Question{QuestionKind::hallucination, existence_question(label, templates),
                           label, GroundTruth::no});
  }
  return out;
}

}  // namespace ode
