#include "ode/sampler.hpp"

#include <algorithm>

#include "ode/error.hpp"

namespace ode {

std::string_view to_string(Criterion criterion) noexcept {
  switch (criterion) {
    case Criterion::common: return "common";
    case Criterion::longtail: return "longtail";
    case Criterion::random: return "random";
    case Criterion::fictional: return "fictional";
  }
  return "unknown";
}

Criterion criterion_from_string(std::string_view text) {
  if (text == "common") return Criterion::common;
  if (text == "longtail" || text == "long-tail") return Criterion::longtail;
  if (text == "random") return Criterion::random;
  if (text == "fictional") return Criterion::fictional;
  throw ValidationError("unknown criterion '" + std::string(text) +
                        "' (expected common, longtail, random, fictional)");
}

ConceptPair make_pair(const ConceptGraph& graph, std::string_view x, std::string_view y,
                      Criterion criterion) {
  if (x == y) throw ValidationError("pair needs two distinct concepts, got '" +
                                    std::string(x) + "' twice");
  ConceptPair pair{graph.concept_for(std::min(x, y)), graph.concept_for(std::max(x, y)),
                   graph.weight(x, y), criterion};
  if (!edge_allowed(pair.a.level, pair.b.level)) {
    throw ValidationError("pair (" + pair.a.label + ", " + pair.b.label +
                          ") is environment-environment");
  }
  return pair;
}

std::uint64_t SampleRng::bounded(std::uint64_t n) {
  if (n == 0) throw ValidationError("bounded draw needs n > 0");
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = engine_();
    if (r >= threshold) return r % n;
  }
}

std::vector<ConceptPair> candidate_pairs(const ConceptGraph& graph, Criterion criterion) {
  std::vector<ConceptPair> out;
  switch (criterion) {
    case Criterion::common:
    case Criterion::longtail: {
      out.reserve(graph.edge_count());
      for (const auto& [key, w] : graph.edges()) {
        out.push_back(ConceptPair{graph.concept_for(key.first), graph.concept_for(key.second),
                                  w, criterion});
      }
      // edges() iterates in (a, b) order; stable_sort keeps it as the tie-break.
      if (criterion == Criterion::common) {
        std::stable_sort(out.begin(), out.end(),
                         [](const auto& x, const auto& y) { return x.weight > y.weight; });
      } else {
        std::stable_sort(out.begin(), out.end(),
                         [](const auto& x, const auto& y) { return x.weight < y.weight; });
      }
      break;
    }
    case Criterion::random:
    case Criterion::fictional: {
      const auto& concepts = graph.concepts();
      for (auto i = concepts.begin(); i != concepts.end(); ++i) {
        for (auto j = std::next(i); j != concepts.end(); ++j) {
          if (!edge_allowed(i->second, j->second)) continue;
          const std::uint64_t w = graph.weight(i->first, j->first);
          if (criterion == Criterion::fictional && w != 0) continue;
          out.push_back(ConceptPair{Concept{i->first, i->second},
                                    Concept{j->first, j->second}, w, criterion});
        }
      }
      break;
    }
  }
  return out;
}

std::vector<ConceptPair> sample_pairs(const ConceptGraph& graph, Criterion criterion,
                                      std::size_t k, std::uint64_t seed) {
  if (k == 0) throw ValidationError("sample size k must be at least 1");
  std::vector<ConceptPair> candidates = candidate_pairs(graph, criterion);
  if (candidates.empty()) {
    throw NoCandidatesError("no candidates for criterion " + std::string(to_string(criterion)));
  }
  const std::size_t take = std::min(k, candidates.size());
  if (criterion == Criterion::random || criterion == Criterion::fictional) {
    SampleRng rng(seed);
    for (std::size_t i = 0; i < take; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.bounded(candidates.size() - i));
      std::swap(candidates[i], candidates[j]);
    }
  }
  candidates.resize(take);
  return candidates;
}

}  // namespace ode
