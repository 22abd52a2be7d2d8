#include "ode/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "ode/error.hpp"
#include "ode/sampler.hpp"

namespace ode {

using nlohmann::json;

std::uint64_t FactHallMatrix::at(const std::string& row, const std::string& col) const {
  const auto r = std::lower_bound(rows.begin(), rows.end(), row);
  const auto c = std::lower_bound(cols.begin(), cols.end(), col);
  if (r == rows.end() || *r != row || c == cols.end() || *c != col) return 0;
  return counts[static_cast<std::size_t>(r - rows.begin())][static_cast<std::size_t>(c - cols.begin())];
}

std::uint64_t FactHallMatrix::row_total(std::size_t r) const {
  return std::accumulate(counts[r].begin(), counts[r].end(), std::uint64_t{0});
}

std::uint64_t FactHallMatrix::total() const {
  std::uint64_t sum = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) sum += row_total(r);
  return sum;
}

FactHallMatrix make_matrix(const std::map<std::pair<std::string, std::string>, std::uint64_t>& cells,
                           const std::vector<std::string>& extra_rows) {
  std::set<std::string> rows(extra_rows.begin(), extra_rows.end());
  std::set<std::string> cols;
  for (const auto& [key, count] : cells) {
    if (key.first.empty() || key.second.empty()) throw ValidationError("matrix label is empty");
    rows.insert(key.first);
    if (count > 0) cols.insert(key.second);
  }
  FactHallMatrix m;
  m.rows.assign(rows.begin(), rows.end());
  m.cols.assign(cols.begin(), cols.end());
  m.counts.assign(m.rows.size(), std::vector<std::uint64_t>(m.cols.size(), 0));
  for (const auto& [key, count] : cells) {
    if (count == 0) continue;
    const auto r = std::lower_bound(m.rows.begin(), m.rows.end(), key.first) - m.rows.begin();
    const auto c = std::lower_bound(m.cols.begin(), m.cols.end(), key.second) - m.cols.begin();
    m.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] += count;
  }
  return m;
}

FactHallMatrix build_matrix(const std::vector<TestCase>& cases,
                            const std::vector<ModelResponse>& responses) {
  std::map<std::string, const TestCase*> by_id;
  for (const auto& c : cases) by_id[c.case_id] = &c;
  std::map<std::pair<std::string, std::string>, std::uint64_t> cells;
  std::vector<std::string> rows;
  for (const auto& r : responses) {
    const auto it = by_id.find(r.case_id);
    if (it == by_id.end()) throw NotFoundError("response for unknown case " + r.case_id);
    if (!r.generative() || !r.error.empty()) continue;
    const auto& truth = it->second->truth;
    rows.insert(rows.end(), truth.begin(), truth.end());
    for (const auto& h : r.mentions) {
      if (truth.count(h)) continue;
      for (const auto& t : truth) ++cells[{t, h}];
    }
  }
  return make_matrix(cells, rows);
}

std::string matrix_csv(const FactHallMatrix& m) {
  std::string out = "truth";
  for (const auto& c : m.cols) out += "," + c;
  out += "\n";
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    out += m.rows[r];
    for (const auto v : m.counts[r]) out += "," + std::to_string(v);
    out += "\n";
  }
  return out;
}

json to_json(const FactHallMatrix& m) {
  return json{{"rows", m.rows}, {"cols", m.cols}, {"counts", m.counts}, {"total", m.total()}};
}

FactHallMatrix matrix_from_json(const json& doc) {
  FactHallMatrix m;
  try {
    m.rows = doc.at("rows").get<std::vector<std::string>>();
    m.cols = doc.at("cols").get<std::vector<std::string>>();
    m.counts = doc.at("counts").get<std::vector<std::vector<std::uint64_t>>>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed matrix: ") + e.what());
  }
  if (!std::is_sorted(m.rows.begin(), m.rows.end()) ||
      std::adjacent_find(m.rows.begin(), m.rows.end()) != m.rows.end() ||
      !std::is_sorted(m.cols.begin(), m.cols.end()) ||
      std::adjacent_find(m.cols.begin(), m.cols.end()) != m.cols.end()) {
    throw ValidationError("matrix labels must be sorted and unique");
  }
  if (m.counts.size() != m.rows.size()) throw ValidationError("matrix row count mismatch");
  for (const auto& row : m.counts) {
    if (row.size() != m.cols.size()) throw ValidationError("matrix column count mismatch");
  }
  return m;
}

namespace {

using Vec = std::vector<double>;

double squared_distance(const Vec& a, const Vec& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

std::size_t nearest(const Vec& point, const std::vector<Vec>& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(point, centroids[c]);
    if (d < best_d) best_d = d, best = c;
  }
  return best;
}

}  // namespace

ClusterReport cluster_concepts(const FactHallMatrix& matrix, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw ValidationError("cluster count k must be at least 1");
  const std::size_t n = matrix.rows.size();
  std::vector<Vec> profiles(n, Vec(matrix.cols.size(), 0.0));
  std::vector<std::size_t> nonzero;
  for (std::size_t r = 0; r < n; ++r) {
    const auto total = matrix.row_total(r);
    if (total == 0) continue;
    nonzero.push_back(r);
    for (std::size_t c = 0; c < matrix.cols.size(); ++c) {
      profiles[r][c] = static_cast<double>(matrix.counts[r][c]) / static_cast<double>(total);
    }
  }
  if (nonzero.size() < k) {
    throw ValidationError("only " + std::to_string(nonzero.size()) +
                          " truth concepts have hallucinations; choose k <= " +
                          std::to_string(nonzero.size()));
  }

  SampleRng rng(seed);
  std::vector<Vec> centroids{profiles[nonzero[rng.bounded(nonzero.size())]]};
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  while (centroids.size() < k) {
    std::size_t pick = nonzero.front();
    double pick_d = -1.0;
    for (const auto r : nonzero) {
      min_d[r] = std::min(min_d[r], squared_distance(profiles[r], centroids.back()));
      if (min_d[r] > pick_d) pick_d = min_d[r], pick = r;
    }
    centroids.push_back(profiles[pick]);
  }

  std::vector<std::size_t> assign(n, 0);
  ClusterReport report;
  report.k = k;
  report.seed = seed;
  for (std::size_t iter = 1; iter <= kClusterMaxIterations; ++iter) {
    report.iterations = iter;
    for (const auto r : nonzero) assign[r] = nearest(profiles[r], centroids);
    std::vector<Vec> next(k, Vec(matrix.cols.size(), 0.0));
    std::vector<std::size_t> members(k, 0);
    for (const auto r : nonzero) {
      ++members[assign[r]];
      for (std::size_t c = 0; c < matrix.cols.size(); ++c) next[assign[r]][c] += profiles[r][c];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (members[c] == 0) {
        next[c] = centroids[c];
        continue;
      }
      for (auto& v : next[c]) v /= static_cast<double>(members[c]);
      shift = std::max(shift, std::sqrt(squared_distance(next[c], centroids[c])));
    }
    centroids = std::move(next);
    if (shift <= kClusterTolerance) break;
  }
  for (std::size_t r = 0; r < n; ++r) assign[r] = nearest(profiles[r], centroids);

  std::vector<std::size_t> relabel(k, k);
  std::size_t next_id = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (relabel[assign[r]] == k) relabel[assign[r]] = next_id++;
  }
  for (auto& id : relabel) {
    if (id == k) id = next_id++;
  }

  report.top_truth_concepts.assign(k, {});
  report.sizes.assign(k, 0);
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t id = relabel[assign[r]];
    report.assignments[matrix.rows[r]] = id;
    ++report.sizes[id];
    members[id].push_back(r);
  }
  for (std::size_t id = 0; id < k; ++id) {
    auto& rows = members[id];
    std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
      return matrix.row_total(a) > matrix.row_total(b);
    });
    for (std::size_t i = 0; i < rows.size() && i < kClusterTopConcepts; ++i) {
      report.top_truth_concepts[id].push_back(matrix.rows[rows[i]]);
    }
  }
  return report;
}

json to_json(const ClusterReport& report) {
  json clusters = json::array();
  for (std::size_t id = 0; id < report.k; ++id) {
    clusters.push_back(json{{"cluster", id},
                            {"size", report.sizes[id]},
                            {"top_truth_concepts", report.top_truth_concepts[id]}});
  }
  return json{{"k", report.k},
              {"seed", report.seed},
              {"iterations", report.iterations},
              {"assignments", report.assignments},
              {"clusters", clusters}};
}

ConceptGraph hallucination_graph(const FactHallMatrix& matrix, const ConceptGraph& source) {
  ConceptGraph graph;
  std::set<std::string> labels(matrix.rows.begin(), matrix.rows.end());
  labels.insert(matrix.cols.begin(), matrix.cols.end());
  for (const auto& label : labels) {
    if (!source.contains(label)) {
      throw NotFoundError("label '" + label + "' is not in the source graph vocabulary");
    }
    graph.add_concept(source.concept_for(label));
  }
  std::map<std::pair<std::string, std::string>, std::uint64_t> weights;
  for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
    for (std::size_t c = 0; c < matrix.cols.size(); ++c) {
      const auto count = matrix.counts[r][c];
      const auto& a = matrix.rows[r];
      const auto& b = matrix.cols[c];
      if (count == 0 || a == b) continue;
      auto& w = weights[std::minmax(a, b)];
      w = std::max(w, count);
    }
  }
  for (const auto& [key, w] : weights) {
    if (!edge_allowed(graph.level(key.first), graph.level(key.second))) continue;
    graph.add_weight(key.first, key.second, w);
  }
  return graph;
}

}  // namespace ode
