#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ode/concept_graph.hpp"
#include "ode/evaluator.hpp"
#include "ode/records.hpp"

namespace ode {

/// counts[r][c]: how often truth label rows[r] co-occurred with the
/// hallucinated label cols[c] in one response. Rows and cols are sorted.
struct FactHallMatrix {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  std::vector<std::vector<std::uint64_t>> counts;

  std::uint64_t at(const std::string& row, const std::string& col) const;
  std::uint64_t total() const;
  std::uint64_t row_total(std::size_t r) const;

  friend bool operator==(const FactHallMatrix&, const FactHallMatrix&) = default;
};

/// Builds a matrix from explicit cells, sorting and validating labels.
/// Rows with no entries can be listed in `extra_rows`.
FactHallMatrix make_matrix(const std::map<std::pair<std::string, std::string>, std::uint64_t>& cells,
                           const std::vector<std::string>& extra_rows = {});

/// Every successful generative response adds one to counts[t][h] for each
/// truth label t and each hallucinated mention h. Rows cover the truth
/// labels of all evaluated cases. Throws NotFoundError on an unknown case.
FactHallMatrix build_matrix(const std::vector<TestCase>& cases,
                            const std::vector<ModelResponse>& responses);

std::string matrix_csv(const FactHallMatrix& matrix);
nlohmann::json to_json(const FactHallMatrix& matrix);
FactHallMatrix matrix_from_json(const nlohmann::json& doc);

struct ClusterReport {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  std::map<std::string, std::size_t> assignments;
  /// Per cluster, up to five truth labels ranked by row total (ties by label).
  std::vector<std::vector<std::string>> top_truth_concepts;
  std::vector<std::size_t> sizes;
};

inline constexpr std::size_t kClusterMaxIterations = 100;
inline constexpr double kClusterTolerance = 1e-9;
inline constexpr std::size_t kClusterTopConcepts = 5;

/// k-means over L1-normalized rows with Euclidean distance. The first
/// centroid is a non-zero row picked by `seed`; the rest are chosen greedily
/// farthest-first. All-zero rows are assigned to their nearest centroid but
/// never move one. Cluster ids are renumbered by first appearance in row
/// order. Throws ValidationError if k is 0 or exceeds the number of
/// non-zero rows.
ClusterReport cluster_concepts(const FactHallMatrix& matrix, std::size_t k, std::uint64_t seed);

nlohmann::json to_json(const ClusterReport& report);

/// Undirected graph with weight max(counts[a][b], counts[b][a]); levels
/// come from `source`. Environment-environment pairs are dropped because the
/// graph cannot hold them. Throws NotFoundError for labels not in `source`.
ConceptGraph hallucination_graph(const FactHallMatrix& matrix, const ConceptGraph& source);

}  // namespace ode
