#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ode {

/// Scene-context concepts ("grass", "sky") vs objects ("dog", "frisbee").
enum class Level { entity, environment };

std::string_view to_string(Level level) noexcept;
/// Accepts "entity" / "environment"; throws ValidationError otherwise.
Level level_from_string(std::string_view text);

/// True for entity-entity and entity-environment. Environment pairs never
/// carry an edge.
constexpr bool edge_allowed(Level a, Level b) noexcept {
  return a == Level::entity || b == Level::entity;
}

struct Concept {
  std::string label;
  Level level = Level::entity;

  friend bool operator==(const Concept&, const Concept&) = default;
};

/// Concepts observed together in one scene annotation.
struct SceneRecord {
  std::vector<Concept> concepts;
};

struct Neighbor {
  Concept node;
  std::uint64_t weight = 0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Trims ASCII whitespace and lowercases. Labels are stored in this form.
std::string normalize_label(std::string_view raw);

/// Weighted undirected co-occurrence graph. Weights are raw scene counts,
/// stored once per unordered pair under (smaller, larger) label order. An
/// edge exists iff its weight is positive.
///
/// Mutation is single-writer; once built, a graph is safe to share across
/// threads for reads.
class ConceptGraph {
 public:
  using EdgeKey = std::pair<std::string, std::string>;

  /// Adds a node. Re-adding with the same level is a no-op; a different
  /// level throws ValidationError naming the label.
  void add_concept(const Concept& node);

  /// Adds `count` to the (a, b) weight. Both labels must already be nodes.
  /// Throws ValidationError on self-loops and environment-environment pairs.
  void add_weight(std::string_view a, std::string_view b, std::uint64_t count);

  bool contains(std::string_view label) const;
  /// Throws NotFoundError for unknown labels.
  Level level(std::string_view label) const;
  Concept concept_for(std::string_view label) const;

  /// Zero for absent edges or unknown labels; symmetric in its arguments.
  std::uint64_t weight(std::string_view a, std::string_view b) const;

  /// Positive-weight partners, weight desc then label asc. Throws
  /// NotFoundError for unknown labels.
  std::vector<Neighbor> neighbors(std::string_view label) const;

  const std::map<std::string, Level, std::less<>>& concepts() const { return concepts_; }
  const std::map<EdgeKey, std::uint64_t>& edges() const { return edges_; }
  std::vector<std::string> labels() const;

  std::size_t node_count() const { return concepts_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  friend bool operator==(const ConceptGraph& lhs, const ConceptGraph& rhs) {
    return lhs.concepts_ == rhs.concepts_ && lhs.edges_ == rhs.edges_;
  }

 private:
  std::map<std::string, Level, std::less<>> concepts_;
  std::map<EdgeKey, std::uint64_t> edges_;
  std::map<std::string, std::map<std::string, std::uint64_t>, std::less<>> adjacency_;
};

/// Parses one line `{"concepts":[{"label":..,"level":..}, ...]}`. Error
/// messages are prefixed with `line <line_number>`.
SceneRecord parse_scene_record(std::string_view line, std::size_t line_number);

/// Counts each allowed-pattern pair once per record. Duplicate labels in a
/// record collapse; environment-environment pairs are skipped. Conflicting
/// levels for the same label are a ValidationError.
ConceptGraph build_graph(std::span<const SceneRecord> records);

/// Streaming variant over line-delimited records; blank lines are skipped.
ConceptGraph build_graph(std::istream& records);

inline constexpr int kGraphFormatVersion = 1;

/// Canonical text form: sorted keys, concepts sorted by label, weights
/// sorted by (a, b). Equal graphs serialize to identical bytes.
std::string serialize_graph(const ConceptGraph& graph);

/// Throws ParseError (with byte offset) on malformed text and
/// ValidationError on invariant violations.
ConceptGraph deserialize_graph(std::string_view text);

ConceptGraph load_graph_file(const std::string& path);
void save_graph_file(const ConceptGraph& graph, const std::string& path);

}  // namespace ode
