#pragma once

// Independent reference for the sampler: brute-force candidate enumeration
// and a from-scratch rendering of the documented draw procedure
// (mt19937_64, rejection-bounded draws, partial Fisher-Yates).

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "ode/concept_graph.hpp"
#include "ode/sampler.hpp"

namespace ode::oracle {

struct Pair {
  std::string a;
  std::string b;
  std::uint64_t w;
  bool operator==(const Pair&) const = default;
};

inline std::vector<Pair> candidates(const ConceptGraph& g, Criterion c) {
  std::vector<std::string> labels;
  for (const auto& [label, level] : g.concepts()) labels.push_back(label);
  std::sort(labels.begin(), labels.end());
  std::vector<Pair> all;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      const bool env_i = g.level(labels[i]) == Level::environment;
      const bool env_j = g.level(labels[j]) == Level::environment;
      if (env_i && env_j) continue;
      const std::uint64_t w = g.weight(labels[i], labels[j]);
      const bool keep = c == Criterion::random || (c == Criterion::fictional ? w == 0 : w > 0);
      if (keep) all.push_back(Pair{labels[i], labels[j], w});
    }
  }
  const auto by_name = [](const Pair& x, const Pair& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); };
  std::sort(all.begin(), all.end(), [&](const Pair& x, const Pair& y) {
    if (c == Criterion::common && x.w != y.w) return x.w > y.w;
    if (c == Criterion::longtail && x.w != y.w) return x.w < y.w;
    return by_name(x, y);
  });
  return all;
}

inline std::vector<Pair> sample(const ConceptGraph& g, Criterion c, std::size_t k, std::uint64_t seed) {
  std::vector<Pair> pool = candidates(g, c);
  const std::size_t take = std::min(k, pool.size());
  if (c == Criterion::random || c == Criterion::fictional) {
    std::mt19937_64 engine(seed);
    const auto draw = [&engine](std::uint64_t n) {
      const std::uint64_t limit = (~n + 1) % n;  // 2^64 mod n
      std::uint64_t r = engine();
      while (r < limit) r = engine();
      return r % n;
    };
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(pool[i], pool[i + draw(pool.size() - i)]);
    }
  }
  pool.resize(take);
  return pool;
}

inline std::vector<Pair> project(const std::vector<ConceptPair>& pairs) {
  std::vector<Pair> out;
  for (const auto& p : pairs) out.push_back(Pair{p.a.label, p.b.label, p.weight});
  return out;
}

}  // namespace ode::oracle
