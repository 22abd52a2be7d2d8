#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "ode/analysis.hpp"
#include "ode/concept_graph.hpp"
#include "ode/evaluator.hpp"
#include "ode/metrics.hpp"
#include "ode/sampler.hpp"

namespace {

std::string letters(std::size_t i) {
  std::string s;
  do {
    s.push_back(static_cast<char>('a' + i % 26));
    i /= 26;
  } while (i > 0);
  return s;
}

ode::ConceptGraph random_graph(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ode::SceneRecord> records(n * 4);
  for (auto& r : records) {
    for (int j = 0; j < 4; ++j) {
      const std::size_t id = rng() % n;
      r.concepts.push_back(ode::Concept{"c" + letters(id), id % 5 == 0 ? ode::Level::environment
                                                                       : ode::Level::entity});
    }
  }
  return ode::build_graph(records);
}

void BM_SamplePairs(benchmark::State& state) {
  const auto graph = random_graph(static_cast<std::size_t>(state.range(0)), 1);
  const auto criterion = static_cast<ode::Criterion>(state.range(1));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(ode::sample_pairs(graph, criterion, 50, ++seed));
}
BENCHMARK(BM_SamplePairs)
    ->ArgsProduct({{50, 200}, {0, 1, 2, 3}})
    ->Unit(benchmark::kMicrosecond);

void BM_ExtractMentions(benchmark::State& state) {
  std::vector<std::string> vocabulary;
  for (std::size_t i = 0; i < static_cast<std::size_t>(state.range(0)); ++i) {
    vocabulary.push_back("thing_" + letters(i));
  }
  const ode::MentionExtractor extractor(vocabulary, {});
  std::string text = "The image shows";
  for (std::size_t i = 0; i < vocabulary.size(); i += 7) text += " a thing " + letters(i) + " and";
  text += " nothing else.";
  for (auto _ : state) benchmark::DoNotOptimize(extractor.extract(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ExtractMentions)->Arg(100)->Arg(1000);

void BM_ScoreDiscriminative(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::vector<std::pair<ode::GroundTruth, ode::Verdict>> answers(static_cast<std::size_t>(state.range(0)));
  for (auto& [t, v] : answers) {
    t = rng() % 2 ? ode::GroundTruth::yes : ode::GroundTruth::no;
    v = static_cast<ode::Verdict>(rng() % 3);
  }
  for (auto _ : state) benchmark::DoNotOptimize(ode::score_discriminative(answers, ode::PositiveClass::yes));
}
BENCHMARK(BM_ScoreDiscriminative)->Arg(10000);

void BM_ClusterConcepts(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(9);
  std::map<std::pair<std::string, std::string>, std::uint64_t> cells;
  for (std::size_t i = 0; i < n * 6; ++i) {
    cells[{"r" + letters(rng() % n), "h" + letters(rng() % n)}] += 1 + rng() % 5;
  }
  const auto matrix = ode::make_matrix(cells);
  for (auto _ : state) benchmark::DoNotOptimize(ode::cluster_concepts(matrix, 4, 7));
}
BENCHMARK(BM_ClusterConcepts)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
