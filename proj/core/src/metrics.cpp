#include "ode/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "ode/error.hpp"

namespace ode {

using nlohmann::json;

namespace {

std::size_t intersection_size(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t n = 0;
  for (const auto& x : a) n += b.count(x);
  return n;
}

double ratio(std::size_t num, std::size_t den, bool& undefined) {
  undefined = den == 0;
  return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

GenerativeScores score_generative(const std::set<std::string>& mentions,
                                  const std::set<std::string>& truth,
                                  const std::set<std::string>& targets) {
  if (truth.empty()) throw ValidationError("truth set is empty");
  GenerativeScores s;
  const std::size_t hit = intersection_size(mentions, truth);
  s.cover = static_cast<double>(hit) / static_cast<double>(truth.size());
  if (mentions.empty()) {
    s.empty_mentions = true;
    return s;
  }
  const double m = static_cast<double>(mentions.size());
  s.chair = static_cast<double>(mentions.size() - hit) / m;
  s.hal = hit < mentions.size() ? 1.0 : 0.0;
  s.cog = static_cast<double>(intersection_size(mentions, targets)) / m;
  return s;
}

double to_percent(double fraction) { return std::nearbyint(fraction * 1000.0) / 10.0; }

GenerativeSummary aggregate_generative(std::span<const GenerativeScores> scores) {
  if (scores.empty()) throw ValidationError("cannot aggregate an empty score list");
  double chair = 0, cover = 0, hal = 0, cog = 0;
  GenerativeSummary out;
  for (const auto& s : scores) {
    chair += s.chair;
    cover += s.cover;
    hal += s.hal;
    cog += s.cog;
    out.empty_mentions += s.empty_mentions ? 1 : 0;
  }
  const double n = static_cast<double>(scores.size());
  out.responses = scores.size();
  out.chair = to_percent(chair / n);
  out.cover = to_percent(cover / n);
  out.hal = to_percent(hal / n);
  out.cog = to_percent(cog / n);
  return out;
}

DiscriminativeScores score_discriminative(std::span<const std::pair<GroundTruth, Verdict>> answers,
                                          PositiveClass positive) {
  DiscriminativeScores s;
  s.positive = positive;
  ConfusionCounts& c = s.counts;
  for (const auto& [truth, verdict] : answers) {
    if (truth == GroundTruth::none) throw ValidationError("discriminative record without ground truth");
    const bool gt_yes = truth == GroundTruth::yes;
    switch (verdict) {
      case Verdict::yes: ++(gt_yes ? c.tp : c.fp); break;
      case Verdict::no: ++(gt_yes ? c.fn : c.tn); break;
      case Verdict::invalid: ++(gt_yes ? c.invalid_on_yes : c.invalid_on_no); break;
    }
  }
  if (positive == PositiveClass::yes) {
    s.tp = c.tp, s.fp = c.fp, s.tn = c.tn, s.fn = c.fn;
    s.invalid_on_positive = c.invalid_on_yes, s.invalid_on_negative = c.invalid_on_no;
  } else {
    s.tp = c.tn, s.fp = c.fn, s.tn = c.tp, s.fn = c.fp;
    s.invalid_on_positive = c.invalid_on_no, s.invalid_on_negative = c.invalid_on_yes;
  }
  s.accuracy = ratio(s.tp + s.tn, c.total(), s.accuracy_undefined);
  s.precision = ratio(s.tp, s.tp + s.fp, s.precision_undefined);
  s.recall = ratio(s.tp, s.tp + s.fn + s.invalid_on_positive, s.recall_undefined);
  s.f1_undefined = s.precision + s.recall == 0.0;
  s.f1 = s.f1_undefined ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

namespace {

json to_json(const GenerativeSummary& g, std::size_t errors) {
  return json{{"chair", g.chair},         {"cover", g.cover},
              {"hal", g.hal},             {"cog", g.cog},
              {"responses", g.responses}, {"empty_mentions", g.empty_mentions},
              {"errors", errors}};
}

json to_json(const DiscriminativeScores& d) {
  return json{
      {"positive_class", to_string(d.positive)},
      {"accuracy", to_percent(d.accuracy)},
      {"precision", to_percent(d.precision)},
      {"recall", to_percent(d.recall)},
      {"f1", to_percent(d.f1)},
      {"fractions",
       {{"accuracy", d.accuracy}, {"precision", d.precision}, {"recall", d.recall}, {"f1", d.f1}}},
      {"counts",
       {{"tp", d.tp},
        {"fp", d.fp},
        {"tn", d.tn},
        {"fn", d.fn},
        {"invalid_on_positive", d.invalid_on_positive},
        {"invalid_on_negative", d.invalid_on_negative}}},
      {"flags",
       {{"accuracy_undefined", d.accuracy_undefined},
        {"precision_undefined", d.precision_undefined},
        {"recall_undefined", d.recall_undefined},
        {"f1_undefined", d.f1_undefined}}},
  };
}

struct Bucket {
  std::vector<GenerativeScores> generative;
  std::size_t generative_errors = 0;
  std::vector<std::pair<GroundTruth, Verdict>> answers;
  std::size_t discriminative_errors = 0;
};

json bucket_report(const Bucket& b, PositiveClass positive) {
  json out = json::object();
  json headline = json::object();
  if (b.generative.empty()) {
    // Keep the error count visible when every caption request failed.
    out["generative"] = b.generative_errors == 0
                            ? json(nullptr)
                            : json{{"responses", 0}, {"errors", b.generative_errors}};
    for (const char* key : {"chair", "cover", "hal", "cog"}) headline[key] = nullptr;
  } else {
    const auto g = aggregate_generative(b.generative);
    out["generative"] = to_json(g, b.generative_errors);
    headline["chair"] = g.chair;
    headline["cover"] = g.cover;
    headline["hal"] = g.hal;
    headline["cog"] = g.cog;
  }
  if (b.answers.empty()) {
    out["discriminative"] = nullptr;
    for (const char* key : {"accuracy", "precision", "recall", "f1"}) headline[key] = nullptr;
  } else {
    const auto yes = score_discriminative(b.answers, PositiveClass::yes);
    const auto no = score_discriminative(b.answers, PositiveClass::no);
    out["discriminative"] = json{{"positive_yes", to_json(yes)},
                                 {"positive_no", to_json(no)},
                                 {"questions", b.answers.size()},
                                 {"errors", b.discriminative_errors}};
    const auto& chosen = positive == PositiveClass::yes ? yes : no;
    headline["accuracy"] = to_percent(chosen.accuracy);
    headline["precision"] = to_percent(chosen.precision);
    headline["recall"] = to_percent(chosen.recall);
    headline["f1"] = to_percent(chosen.f1);
  }
  out["headline"] = headline;
  return out;
}

}  // namespace

json metrics_report(const std::vector<TestCase>& cases, const std::vector<ModelResponse>& responses,
                    PositiveClass positive) {
  std::map<std::string, const TestCase*> by_id;
  for (const auto& c : cases) by_id[c.case_id] = &c;

  std::map<std::string, Bucket> buckets;
  Bucket overall;
  for (const auto& r : responses) {
    const auto it = by_id.find(r.case_id);
    if (it == by_id.end()) throw NotFoundError("response for unknown case " + r.case_id);
    const TestCase& c = *it->second;
    if (r.q >= c.questions.size()) {
      throw ValidationError("response question index out of range for case " + r.case_id);
    }
    const Question& question = c.questions[r.q];
    if (question.kind != r.kind) {
      throw ValidationError("response kind does not match question kind for case " + r.case_id);
    }
    Bucket& b = buckets[std::string(to_string(c.pair.criterion))];
    if (r.generative()) {
      if (!r.error.empty()) {
        ++b.generative_errors;
        ++overall.generative_errors;
        continue;
      }
      const auto s = score_generative(r.mentions, c.truth, c.hallucination_targets);
      b.generative.push_back(s);
      overall.generative.push_back(s);
    } else {
      if (!r.error.empty()) {
        ++b.discriminative_errors;
        ++overall.discriminative_errors;
      }
      b.answers.emplace_back(question.ground_truth, r.verdict);
      overall.answers.emplace_back(question.ground_truth, r.verdict);
    }
  }

  json criteria = json::object();
  for (const auto& [name, bucket] : buckets) criteria[name] = bucket_report(bucket, positive);
  return json{{"positive_class", to_string(positive)},
              {"cases", cases.size()},
              {"responses", responses.size()},
              {"criteria", criteria},
              {"overall", bucket_report(overall, positive)},
              {"conventions",
               {{"percent_rounding", "half-even, 1 decimal"},
                {"empty_mentions", "chair=0, hal=0, cog=0"},
                {"invalid_answers", "counted incorrect for accuracy and as misses for recall"}}}};
}

}  // namespace ode
