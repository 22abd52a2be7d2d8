#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "ode/concept_graph.hpp"

namespace ode {

/// Pair-selection criteria, in order of increasing difficulty.
enum class Criterion { common, longtail, random, fictional };

inline constexpr Criterion kAllCriteria[] = {Criterion::common, Criterion::longtail,
                                             Criterion::random, Criterion::fictional};

std::string_view to_string(Criterion criterion) noexcept;
/// Accepts the names above plus "long-tail"; throws ValidationError.
Criterion criterion_from_string(std::string_view text);

/// Concept pair in canonical order (a.label < b.label) with its co-occurrence
/// weight and the criterion that selected it.
struct ConceptPair {
  Concept a;
  Concept b;
  std::uint64_t weight = 0;
  Criterion criterion = Criterion::random;

  friend bool operator==(const ConceptPair&, const ConceptPair&) = default;
};

/// Builds a canonical pair from two graph labels (in either order).
ConceptPair make_pair(const ConceptGraph& graph, std::string_view x, std::string_view y,
                      Criterion criterion);

/// Default pairs per criterion.
inline constexpr std::size_t kDefaultPairsPerCriterion = 40;

/// Identity of the sampling procedure, recorded in run manifests.
inline constexpr std::string_view kSamplerAlgorithm =
    "mt19937_64;bounded=rejection(threshold=(2^64-n)%n,r%n);"
    "order=partial-fisher-yates(i=0..k-1,j=i+bounded(n-i));v1";

/// MT19937-64 (the C++ standard's std::mt19937_64, default-seeded with the
/// run seed) plus an unbiased bounded draw that does not depend on the
/// standard library's distribution implementations.
class SampleRng {
 public:
  explicit SampleRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t bounded(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

/// All pairs eligible under `criterion`:
///   common    positive weight, weight desc
///   longtail  positive weight, weight asc
///   random    every allowed-pattern pair, any weight
///   fictional every allowed-pattern pair with weight 0
/// Ties are broken by (a.label, b.label).
std::vector<ConceptPair> candidate_pairs(const ConceptGraph& graph, Criterion criterion);

/// Top-k prefix for common/longtail; seeded uniform sample without
/// replacement for random/fictional. Returns fewer than k only when the
/// candidates run out. Throws ValidationError for k == 0 and
/// NoCandidatesError when the candidate list is empty.
std::vector<ConceptPair> sample_pairs(const ConceptGraph& graph, Criterion criterion,
                                      std::size_t k, std::uint64_t seed);

}  // namespace ode
