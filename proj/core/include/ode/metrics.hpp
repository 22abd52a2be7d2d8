#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ode/config.hpp"
#include "ode/evaluator.hpp"
#include "ode/prompts.hpp"
#include "ode/records.hpp"

namespace ode {

/// Per-response generative scores, each a fraction in [0, 1].
struct GenerativeScores {
  double chair = 0.0;
  double cover = 0.0;
  double hal = 0.0;
  double cog = 0.0;
  bool empty_mentions = false;
};

/// chair = 1 - |M∩T|/|M|, cover = |M∩T|/|T|, hal = [chair > 0],
/// cog = |M∩H|/|M|; chair and cog are 0 for an empty mention set.
/// Throws ValidationError when truth is empty.
GenerativeScores score_generative(const std::set<std::string>& mentions,
                                  const std::set<std::string>& truth,
                                  const std::set<std::string>& targets);

/// Fraction -> percentage with one decimal, ties to even.
double to_percent(double fraction);

struct GenerativeSummary {
  double chair = 0.0;  // percentages, one decimal
  double cover = 0.0;
  double hal = 0.0;
  double cog = 0.0;
  std::size_t responses = 0;
  std::size_t empty_mentions = 0;
};

/// Field-wise mean x100. Throws ValidationError for an empty input.
GenerativeSummary aggregate_generative(std::span<const GenerativeScores> scores);

/// Confusion cells relative to the ground-truth answer "yes". Invalid
/// answers are kept out of tp/fp/tn/fn and counted per ground truth.
struct ConfusionCounts {
  std::size_t tp = 0;  // gt yes, answered yes
  std::size_t fp = 0;  // gt no, answered yes
  std::size_t tn = 0;  // gt no, answered no
  std::size_t fn = 0;  // gt yes, answered no
  std::size_t invalid_on_yes = 0;
  std::size_t invalid_on_no = 0;

  std::size_t total() const { return tp + fp + tn + fn + invalid_on_yes + invalid_on_no; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct DiscriminativeScores {
  PositiveClass positive = PositiveClass::yes;
  ConfusionCounts counts;  // always relative to "yes"
  // Cells seen from the chosen positive class; invalid answers on positive
  // questions count as misses.
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  std::size_t invalid_on_positive = 0;
  std::size_t invalid_on_negative = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool accuracy_undefined = false;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

/// Accuracy = correct / all (invalid is wrong). Precision = tp/(tp+fp),
/// Recall = tp/(tp+fn+invalid_on_positive). Zero denominators give 0 and
/// set the matching flag. Throws ValidationError if any ground truth is
/// "none".
DiscriminativeScores score_discriminative(
    std::span<const std::pair<GroundTruth, Verdict>> answers,
    PositiveClass positive = PositiveClass::yes);

/// metrics.json contents: per criterion (plus "overall") the generative
/// summary, both discriminative conventions and the headline numbers under
/// the configured positive class. Responses with an error tag are left out
/// of the generative means and counted instead. Throws NotFoundError for a
/// response whose case is unknown.
nlohmann::json metrics_report(const std::vector<TestCase>& cases,
                              const std::vector<ModelResponse>& responses,
                              PositiveClass positive = PositiveClass::yes);

}  // namespace ode
