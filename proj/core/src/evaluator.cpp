#include "ode/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

#include <nlohmann/json.hpp>

#include "ode/error.hpp"
#include "ode/hashing.hpp"
#include "ode/parallel.hpp"
#include "ode/store.hpp"

namespace ode {

using nlohmann::json;

namespace {

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char c : text) {
    if (is_letter(c)) {
      current += lower(c);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string join(const std::vector<std::string>& tokens, std::size_t begin, std::size_t length,
                 std::string_view last) {
  std::string out;
  for (std::size_t i = begin; i < begin + length; ++i) {
    if (!out.empty()) out += ' ';
    out += i + 1 == begin + length ? std::string(last) : tokens[i];
  }
  return out;
}

}  // namespace

std::string surface_form(std::string_view label) {
  std::string out;
  for (const auto& token : tokenize(label)) {
    if (!out.empty()) out += ' ';
    out += token;
  }
  return out;
}

void SynonymTable::add(std::string_view canonical, std::string_view surface) {
  const std::string form = surface_form(surface);
  const std::string label = normalize_label(canonical);
  if (form.empty()) throw ValidationError("synonym surface form has no letters: '" + std::string(surface) + "'");
  if (label.empty()) throw ValidationError("synonym canonical label is empty");
  const auto [it, inserted] = by_surface_.emplace(form, label);
  if (!inserted && it->second != label) {
    throw ValidationError("surface form '" + form + "' maps to both '" + it->second + "' and '" +
                          label + "'");
  }
  forms_[label].insert(form);
}

std::optional<std::string> SynonymTable::canonical_for(std::string_view surface) const {
  const auto it = by_surface_.find(surface_form(surface));
  if (it == by_surface_.end()) return std::nullopt;
  return it->second;
}

SynonymTable SynonymTable::defaults() {
  SynonymTable table{std::string(kDefaultSynonymVersion)};
  static constexpr std::pair<const char*, const char*> kEntries[] = {
      {"person", "people"},       {"person", "man"},          {"person", "men"},
      {"person", "woman"},        {"person", "women"},        {"person", "persons"},
      {"person", "child"},        {"person", "children"},     {"person", "boy"},
      {"person", "girl"},         {"mouse", "mice"},          {"knife", "knives"},
      {"sheep", "sheep"},         {"bicycle", "bike"},        {"motorcycle", "motorbike"},
      {"airplane", "plane"},      {"airplane", "aeroplane"},  {"tv", "television"},
      {"couch", "sofa"},          {"cell_phone", "cellphone"}, {"cell_phone", "mobile phone"},
      {"hot_dog", "hotdog"},      {"hair_drier", "hair dryer"}, {"dining_table", "dinner table"},
      {"potted_plant", "houseplant"}, {"teddy_bear", "teddy"}, {"wine_glass", "wineglass"},
      {"leaf", "leaves"},         {"shelf", "shelves"},       {"goose", "geese"},
      {"foot", "feet"},           {"tooth", "teeth"},
  };
  for (const auto& [canonical, surface] : kEntries) table.add(canonical, surface);
  return table;
}

SynonymTable SynonymTable::parse(std::string_view text, std::string_view origin) {
  SynonymTable table{"sha256:" + content_hash(text)};
  std::size_t line_number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos) {
      throw ParseError(std::string(origin) + ": line " + std::to_string(line_number) +
                           ": expected canonical<TAB>surface",
                       0);
    }
    try {
      table.add(line.substr(0, tab), line.substr(tab + 1));
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(origin) + ": line " + std::to_string(line_number) + ": " +
                            e.what());
    }
    if (end == text.size()) break;
  }
  return table;
}

SynonymTable SynonymTable::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw NotFoundError("synonym table not found: " + path.string());
  return parse(read_file(path), path.string());
}

MentionExtractor::MentionExtractor(const std::vector<std::string>& vocabulary,
                                   const SynonymTable& synonyms) {
  const std::set<std::string> vocab(vocabulary.begin(), vocabulary.end());
  // Vocabulary labels first so a synonym can never shadow a label's own name.
  for (const auto& label : vocab) {
    const std::string form = surface_form(label);
    if (form.empty()) {
      throw ValidationError("label '" + label + "' has no letters and cannot be matched in text");
    }
    const auto [it, added] = surfaces_.emplace(form, label);
    if (!added) {
      throw ValidationError("labels '" + it->second + "' and '" + label +
                            "' read the same in text ('" + form + "')");
    }
  }
  for (const auto& [canonical, forms] : synonyms.entries()) {
    if (!vocab.count(canonical)) continue;
    for (const auto& form : forms) surfaces_.emplace(form, canonical);
  }
  for (const auto& [form, label] : surfaces_) {
    max_tokens_ = std::max<std::size_t>(max_tokens_, std::count(form.begin(), form.end(), ' ') + 1);
  }
}

std::optional<std::string> MentionExtractor::match(const std::vector<std::string>& tokens,
                                                   std::size_t begin, std::size_t length) const {
  const std::string& last = tokens[begin + length - 1];
  std::vector<std::string_view> variants{last};
  if (last.size() > 1 && last.back() == 's') {
    variants.push_back(std::string_view(last).substr(0, last.size() - 1));
  }
  if (last.size() > 2 && last.compare(last.size() - 2, 2, "es") == 0) {
    variants.push_back(std::string_view(last).substr(0, last.size() - 2));
  }
  for (const auto variant : variants) {
    const auto it = surfaces_.find(join(tokens, begin, length, variant));
    if (it != surfaces_.end()) return it->second;
  }
  return std::nullopt;
}

std::set<std::string> MentionExtractor::extract(std::string_view text) const {
  const auto tokens = tokenize(text);
  std::set<std::string> found;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t advance = 1;
    for (std::size_t length = std::min(max_tokens_, tokens.size() - i); length > 0; --length) {
      if (const auto label = match(tokens, i, length)) {
        found.insert(*label);
        advance = length;
        break;
      }
    }
    i += advance;
  }
  return found;
}

std::set<std::string> extract_mentions(std::string_view text,
                                       const std::vector<std::string>& vocabulary,
                                       const SynonymTable& synonyms) {
  return MentionExtractor(vocabulary, synonyms).extract(text);
}

std::string_view to_string(Verdict verdict) noexcept {
  switch (verdict) {
    case Verdict::yes: return "yes";
    case Verdict::no: return "no";
    case Verdict::invalid: return "invalid";
  }
  return "invalid";
}

Verdict verdict_from_string(std::string_view text) {
  if (text == "yes") return Verdict::yes;
  if (text == "no") return Verdict::no;
  if (text == "invalid") return Verdict::invalid;
  throw ValidationError("unknown verdict '" + std::string(text) + "'");
}

Verdict parse_verdict(std::string_view text) {
  const auto tokens = tokenize(text);
  if (tokens.empty()) return Verdict::invalid;
  if (tokens.front() == "yes") return Verdict::yes;
  if (tokens.front() == "no") return Verdict::no;
  for (const auto& token : tokens) {
    if (token == "yes") return Verdict::yes;
    if (token == "no") return Verdict::no;
  }
  return Verdict::invalid;
}

json to_json(const ModelResponse& response) {
  json parsed;
  if (response.generative()) {
    parsed = json{{"kind", "mentions"},
                  {"labels", std::vector<std::string>(response.mentions.begin(),
                                                      response.mentions.end())}};
  } else {
    parsed = json{{"kind", "verdict"}, {"verdict", to_string(response.verdict)}};
  }
  json doc{{"case_id", response.case_id},
           {"q", response.q},
           {"question_kind", to_string(response.kind)},
           {"raw", response.raw},
           {"parsed", parsed}};
  if (!response.error.empty()) doc["error"] = response.error;
  return doc;
}

ModelResponse model_response_from_json(const json& doc) {
  try {
    ModelResponse r;
    r.case_id = doc.at("case_id").get<std::string>();
    r.q = doc.at("q").get<std::size_t>();
    r.raw = doc.at("raw").get<std::string>();
    r.kind = question_kind_from_string(doc.at("question_kind").get<std::string>());
    const json& parsed = doc.at("parsed");
    const auto kind = parsed.at("kind").get<std::string>();
    if (kind == "mentions") {
      if (!r.generative()) throw ValidationError("mention set on a yes/no question");
      for (const auto& label : parsed.at("labels")) r.mentions.insert(label.get<std::string>());
    } else if (kind == "verdict") {
      if (r.generative()) throw ValidationError("verdict on a generative question");
      r.verdict = verdict_from_string(parsed.at("verdict").get<std::string>());
    } else {
      throw ValidationError("unknown parsed kind '" + kind + "'");
    }
    if (doc.contains("error")) r.error = doc.at("error").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed response record: ") + e.what());
  }
}

std::vector<ModelResponse> load_responses(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw NotFoundError("no responses at " + path.string());
  std::vector<ModelResponse> out;
  std::size_t line_number = 0;
  for (const auto& line : read_lines(path)) {
    ++line_number;
    const json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded()) {
      throw ParseError(path.string() + ": line " + std::to_string(line_number) + ": invalid JSON", 0);
    }
    out.push_back(model_response_from_json(doc));
  }
  return out;
}

void save_responses(const std::filesystem::path& path, const std::vector<ModelResponse>& responses) {
  std::string text;
  for (const auto& r : responses) text += to_json(r).dump() + "\n";
  write_file_atomic(path, text);
}

std::vector<ModelResponse> evaluate_cases(const std::vector<TestCase>& cases, const Store& store,
                                          ServiceClient& model, const MentionExtractor& extractor,
                                          const EvaluationOptions& options) {
  struct Job {
    const TestCase* test_case;
    std::size_t q;
  };
  const bool want_generative = options.mode != EvalMode::discriminative;
  const bool want_discriminative = options.mode != EvalMode::generative;

  std::vector<const TestCase*> ordered;
  for (const auto& c : cases) ordered.push_back(&c);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* x, const auto* y) { return x->case_id < y->case_id; });

  std::vector<Job> jobs;
  for (const auto* c : ordered) {
    for (std::size_t q = 0; q < c->questions.size(); ++q) {
      const bool generative = c->questions[q].kind == QuestionKind::generative;
      if (generative ? want_generative : want_discriminative) jobs.push_back(Job{c, q});
    }
  }

  std::vector<ModelResponse> out(jobs.size());
  parallel_for(jobs.size(), options.concurrency, [&](std::size_t i) {
    const Job& job = jobs[i];
    const Question& question = job.test_case->questions[job.q];
    ModelResponse& r = out[i];
    r.case_id = job.test_case->case_id;
    r.q = job.q;
    r.kind = question.kind;
    try {
      r.raw = query_model(model, store.get_image(job.test_case->image_ref), question.text);
    } catch (const TransportError& e) {
      r.error = std::string("transport: ") + e.what();
    } catch (const ProtocolError& e) {
      r.error = std::string("protocol: ") + e.what();
    }
    if (r.generative()) {
      if (r.error.empty()) r.mentions = extractor.extract(r.raw);
    } else {
      r.verdict = r.error.empty() ? parse_verdict(r.raw) : Verdict::invalid;
    }
  });
  return out;
}

}  // namespace ode
