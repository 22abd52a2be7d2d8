#include "ode/concept_graph.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ode/error.hpp"
#include "ode/store.hpp"

namespace ode {

using nlohmann::json;

std::string_view to_string(Level level) noexcept {
  return level == Level::entity ? "entity" : "environment";
}

Level level_from_string(std::string_view text) {
  if (text == "entity") return Level::entity;
  if (text == "environment") return Level::environment;
  throw ValidationError("unknown concept level '" + std::string(text) + "'");
}

std::string normalize_label(std::string_view raw) {
  std::size_t begin = 0;
  std::size_t end = raw.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(raw[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(raw[end - 1]))) --end;
  std::string out(raw.substr(begin, end - begin));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

void ConceptGraph::add_concept(const Concept& node) {
  if (node.label.empty()) throw ValidationError("concept label is empty");
  if (normalize_label(node.label) != node.label) {
    throw ValidationError("concept label '" + node.label + "' is not trimmed lowercase");
  }
  const auto [it, inserted] = concepts_.emplace(node.label, node.level);
  if (!inserted && it->second != node.level) {
    throw ValidationError("conflicting level for concept '" + node.label + "': " +
                          std::string(to_string(it->second)) + " vs " +
                          std::string(to_string(node.level)));
  }
}

void ConceptGraph::add_weight(std::string_view a, std::string_view b, std::uint64_t count) {
  if (a == b) throw ValidationError("self-loop on '" + std::string(a) + "'");
  const Level la = level(a);
  const Level lb = level(b);
  if (!edge_allowed(la, lb)) {
    throw ValidationError("environment-environment edge (" + std::string(a) + ", " +
                          std::string(b) + ")");
  }
  if (count == 0) return;
  std::string lo(std::min(a, b));
  std::string hi(std::max(a, b));
  edges_[{lo, hi}] += count;
  adjacency_[lo][hi] += count;
  adjacency_[hi][lo] += count;
}

bool ConceptGraph::contains(std::string_view label) const {
  return concepts_.find(label) != concepts_.end();
}

Level ConceptGraph::level(std::string_view label) const {
  const auto it = concepts_.find(label);
  if (it == concepts_.end()) throw NotFoundError("unknown concept '" + std::string(label) + "'");
  return it->second;
}

Concept ConceptGraph::concept_for(std::string_view label) const {
  return Concept{std::string(label), level(label)};
}

std::uint64_t ConceptGraph::weight(std::string_view a, std::string_view b) const {
  const auto row = adjacency_.find(a);
  if (row == adjacency_.end()) return 0;
  const auto cell = row->second.find(std::string(b));
  return cell == row->second.end() ? 0 : cell->second;
}

std::vector<Neighbor> ConceptGraph::neighbors(std::string_view label) const {
  if (!contains(label)) throw NotFoundError("unknown concept '" + std::string(label) + "'");
  std::vector<Neighbor> out;
  const auto row = adjacency_.find(label);
  if (row == adjacency_.end()) return out;
  out.reserve(row->second.size());
  for (const auto& [other, w] : row->second) {
    out.push_back(Neighbor{Concept{other, concepts_.find(other)->second}, w});
  }
  std::stable_sort(out.begin(), out.end(), [](const Neighbor& x, const Neighbor& y) {
    return x.weight > y.weight;  // map order already gives the label tie-break
  });
  return out;
}

std::vector<std::string> ConceptGraph::labels() const {
  std::vector<std::string> out;
  out.reserve(concepts_.size());
  for (const auto& entry : concepts_) out.push_back(entry.first);
  return out;
}

SceneRecord parse_scene_record(std::string_view line, std::size_t line_number) {
  const std::string where = "line " + std::to_string(line_number) + ": ";
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(where + "malformed record: " + e.what(), e.byte);
  }
  if (!doc.is_object() || !doc.contains("concepts") || !doc["concepts"].is_array()) {
    throw ValidationError(where + "record must be an object with a 'concepts' array");
  }
  SceneRecord record;
  for (const auto& item : doc["concepts"]) {
    if (!item.is_object()) throw ValidationError(where + "concept entry is not an object");
    if (!item.contains("label") || !item["label"].is_string()) {
      throw ValidationError(where + "concept is missing a label");
    }
    if (!item.contains("level") || !item["level"].is_string()) {
      throw ValidationError(where + "concept '" + item["label"].get<std::string>() +
                            "' is missing a level");
    }
    std::string label = normalize_label(item["label"].get<std::string>());
    if (label.empty()) throw ValidationError(where + "concept label is empty");
    Level level;
    try {
      level = level_from_string(item["level"].get<std::string>());
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
    record.concepts.push_back(Concept{std::move(label), level});
  }
  if (record.concepts.empty()) throw ValidationError(where + "record has no concepts");
  return record;
}

namespace {

void count_record(ConceptGraph& graph, const SceneRecord& record) {
  std::map<std::string, Level> unique;
  for (const auto& c : record.concepts) {
    graph.add_concept(c);  // surfaces level conflicts, also within one record
    unique.emplace(c.label, c.level);
  }
  for (auto i = unique.begin(); i != unique.end(); ++i) {
    for (auto j = std::next(i); j != unique.end(); ++j) {
      if (edge_allowed(i->second, j->second)) graph.add_weight(i->first, j->first, 1);
    }
  }
}

}  // namespace

ConceptGraph build_graph(std::span<const SceneRecord> records) {
  ConceptGraph graph;
  for (const auto& record : records) {
    if (record.concepts.empty()) throw ValidationError("scene record has no concepts");
    count_record(graph, record);
  }
  return graph;
}

ConceptGraph build_graph(std::istream& records) {
  ConceptGraph graph;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(records, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const SceneRecord record = parse_scene_record(line, line_number);
    try {
      count_record(graph, record);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  return graph;
}

std::string serialize_graph(const ConceptGraph& graph) {
  json concepts = json::array();
  for (const auto& [label, level] : graph.concepts()) {
    concepts.push_back({{"label", label}, {"level", to_string(level)}});
  }
  json weights = json::array();
  for (const auto& [key, count] : graph.edges()) {
    weights.push_back({{"a", key.first}, {"b", key.second}, {"count", count}});
  }
  const json doc = {{"concepts", std::move(concepts)},
                    {"format_version", kGraphFormatVersion},
                    {"weights", std::move(weights)}};
  return doc.dump(1) + "\n";
}

ConceptGraph deserialize_graph(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("corrupt graph file at byte ") + std::to_string(e.byte) +
                         ": " + e.what(),
                     e.byte);
  }
  if (!doc.is_object() || !doc.contains("format_version") ||
      !doc["format_version"].is_number_integer()) {
    throw ValidationError("graph file missing integer format_version");
  }
  if (doc["format_version"].get<int>() != kGraphFormatVersion) {
    throw ValidationError("unsupported graph format_version " + doc["format_version"].dump());
  }
  if (!doc.contains("concepts") || !doc["concepts"].is_array() || !doc.contains("weights") ||
      !doc["weights"].is_array()) {
    throw ValidationError("graph file needs 'concepts' and 'weights' arrays");
  }
  ConceptGraph graph;
  for (const auto& item : doc["concepts"]) {
    if (!item.is_object() || !item.contains("label") || !item["label"].is_string() ||
        !item.contains("level") || !item["level"].is_string()) {
      throw ValidationError("graph concept entry needs string label and level");
    }
    const auto label = item["label"].get<std::string>();
    if (graph.contains(label)) throw ValidationError("duplicate concept '" + label + "'");
    graph.add_concept(Concept{label, level_from_string(item["level"].get<std::string>())});
  }
  for (const auto& item : doc["weights"]) {
    if (!item.is_object() || !item.contains("a") || !item["a"].is_string() ||
        !item.contains("b") || !item["b"].is_string() || !item.contains("count") ||
        !item["count"].is_number_unsigned()) {
      throw ValidationError("graph weight entry needs string a, b and unsigned count");
    }
    const auto a = item["a"].get<std::string>();
    const auto b = item["b"].get<std::string>();
    const auto count = item["count"].get<std::uint64_t>();
    if (!graph.contains(a) || !graph.contains(b)) {
      throw ValidationError("weight references unknown concept (" + a + ", " + b + ")");
    }
    if (count == 0) throw ValidationError("zero-weight edge (" + a + ", " + b + ")");
    if (graph.weight(a, b) != 0) throw ValidationError("duplicate edge (" + a + ", " + b + ")");
    graph.add_weight(a, b, count);
  }
  return graph;
}

ConceptGraph load_graph_file(const std::string& path) {
  return deserialize_graph(read_file(path));
}

void save_graph_file(const ConceptGraph& graph, const std::string& path) {
  write_file_atomic(path, serialize_graph(graph));
}

}  // namespace ode
