#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ode/concept_graph.hpp"
#include "ode/config.hpp"
#include "ode/prompts.hpp"
#include "ode/records.hpp"
#include "ode/sampler.hpp"
#include "ode/services.hpp"
#include "ode/store.hpp"

namespace ode {

/// Hallucination probes for an image: the highest-weight graph neighbours of
/// the truth labels that are not themselves in truth. A label reachable from
/// several truth labels ranks by its largest weight; ties go to the smaller
/// label. Truth labels unknown to the graph contribute nothing.
std::set<std::string> derive_hallucination_targets(const ConceptGraph& graph,
                                                   const std::set<std::string>& truth,
                                                   std::size_t cap);

/// "missing: a, b" for the pair labels absent from `detected`; empty string
/// when both are present.
std::string missing_reason(const ConceptPair& pair, const std::set<std::string>& detected);

struct PipelineOptions {
  double threshold = kDefaultDetectionThreshold;
  std::size_t hallucination_cap = 3;
  std::uint32_t image_width = 512;
  std::uint32_t image_height = 512;
  std::size_t max_regen_attempts = 2;
  std::size_t concurrency = 4;
  PromptTemplates templates;
  nlohmann::json config_snapshot = nlohmann::json::object();
  std::string synonym_table_version;

  static PipelineOptions from_config(const RunConfig& config,
                                     std::string synonym_table_version = {});
};

using CaseOutcome = std::variant<TestCase, FilteredRecord>;
using IngestOutcome = std::variant<TestCase, FilteredRecord, ErrorRecord>;

/// Seed for the n-th generation attempt of a case. Attempt 0 uses the first
/// 8 bytes of the case id, so regeneration needs no stored state.
std::uint64_t image_seed_for(const std::string& case_id, std::size_t attempt);

/// Synthesis -> detection filter -> annotation. Holds references only; the
/// graph, store and clients must outlive it.
class Pipeline {
 public:
  Pipeline(const ConceptGraph& graph, Store& store, ServiceClient& t2i, ServiceClient& detector,
           PipelineOptions options);

  /// Generates the image, runs detection over the whole graph vocabulary and
  /// accepts iff both pair labels are detected at >= threshold. Up to
  /// max_regen_attempts images are tried. Service errors propagate.
  CaseOutcome synthesize_case(const ConceptPair& pair, Style style, std::uint64_t seed) const;

  /// Samples k pairs per criterion, synthesizes every pair x style, appends
  /// new accepted/filtered records (sorted by case_id) and writes the
  /// manifest. Case ids already present in the run are skipped, which makes
  /// the batch resumable. Per-case failures land in errors.jsonl; only store
  /// failures abort the batch.
  RunManifest run_batch(const RunPaths& run, const std::vector<Criterion>& criteria, std::size_t k,
                        const std::vector<Style>& styles, std::uint64_t seed) const;

  /// Runs externally sourced images through the same detect/filter/annotate
  /// path. `sidecar` holds lines {"file","a","b"} with optional "criterion"
  /// (default random) and "style" (default photo). Files without a sidecar
  /// entry, unreadable images and unknown labels become ErrorRecords.
  std::vector<IngestOutcome> ingest_images(const std::filesystem::path& dir,
                                           const std::filesystem::path& sidecar) const;

  /// Number of synthesize_case calls made so far (cache replays included).
  std::size_t synthesis_calls() const { return synthesis_calls_.load(); }

  const PipelineOptions& options() const { return options_; }

 private:
  CaseOutcome annotate(const std::string& case_id, const ConceptPair& pair, Style style,
                       std::uint64_t seed, std::uint64_t image_seed, const Bytes& png,
                       std::size_t attempts, Source source, const std::string& origin) const;

  const ConceptGraph& graph_;
  Store& store_;
  ServiceClient& t2i_;
  ServiceClient& detector_;
  PipelineOptions options_;
  std::vector<std::string> vocabulary_;
  mutable std::atomic<std::size_t> synthesis_calls_{0};
};

/// Appends outcomes whose case ids are not yet in the run, sorted by
/// case_id; error records always go to errors.jsonl. Returns how many
/// case and filtered records were written.
std::size_t persist_outcomes(const RunPaths& run, const std::vector<IngestOutcome>& outcomes);

/// Case ids already recorded in cases.jsonl or filtered.jsonl.
std::set<std::string> recorded_case_ids(const RunPaths& run);

}  // namespace ode
