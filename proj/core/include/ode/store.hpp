#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ode/records.hpp"
#include "ode/services.hpp"

namespace ode {

// File helpers. Writers go through a temporary file and rename, so readers
// never observe a partially written file.
std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
/// Appends whole lines (a '\n' is added to each) by writing old content
/// plus new lines to a temporary file and renaming it over the original.
/// The existing prefix is preserved byte-for-byte.
void append_lines_atomic(const std::filesystem::path& path, const std::vector<std::string>& lines);
/// Lines of a text file without terminators; a missing file reads as empty.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Layout of one run directory.
struct RunPaths {
  std::filesystem::path dir;

  std::filesystem::path manifest() const { return dir / "manifest.json"; }
  std::filesystem::path cases() const { return dir / "cases.jsonl"; }
  std::filesystem::path filtered() const { return dir / "filtered.jsonl"; }
  std::filesystem::path errors() const { return dir / "errors.jsonl"; }
  std::filesystem::path responses() const { return dir / "responses.jsonl"; }
  std::filesystem::path requests() const { return dir / "requests.jsonl"; }
  std::filesystem::path metrics() const { return dir / "metrics.json"; }
  std::filesystem::path matrix_csv() const { return dir / "matrix.csv"; }
  std::filesystem::path matrix_json() const { return dir / "matrix.json"; }
  std::filesystem::path clusters() const { return dir / "clusters.json"; }
  std::filesystem::path hallucination_graph() const { return dir / "hallucination_graph.json"; }
  std::filesystem::path pairs() const { return dir / "pairs.jsonl"; }
};

/// Content-addressed store rooted at one directory:
///   images/<hash>.png   shared across runs
///   cache/<key>.json    service replies keyed by request hash
///   runs/<run_id>/      per-run records
///
/// One writer per run directory; the image and cache areas tolerate
/// concurrent writers because every object is written under its own hash.
class Store final : public ResponseCache {
 public:
  explicit Store(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path images_dir() const { return root_ / "images"; }
  std::filesystem::path cache_dir() const { return root_ / "cache"; }

  /// Validates the PNG, stores it under its content hash and returns the
  /// hash. Idempotent. Throws ValidationError for undecodable bytes.
  std::string put_image(std::string_view png);
  Bytes get_image(const std::string& image_ref) const;
  bool has_image(const std::string& image_ref) const;

  std::optional<std::string> lookup(const std::string& key) override;
  void store(const std::string& key, const std::string& value) override;
  std::size_t cache_hits() const { return hits_.load(); }
  std::size_t cache_misses() const { return misses_.load(); }

  /// Creates runs/<run_id>/ if needed.
  RunPaths run(const std::string& run_id) const;

 private:
  std::filesystem::path root_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

/// Appends request-log entries to a JSONL file.
class FileRequestLog final : public RequestLog {
 public:
  explicit FileRequestLog(std::filesystem::path path) : path_(std::move(path)) {}
  void record(const nlohmann::json& entry) override;

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

struct CriterionCounts {
  std::size_t requested_k = 0;
  std::size_t sampled = 0;
  bool exhausted = false;
  std::size_t attempted = 0;
  std::size_t accepted = 0;
  std::size_t filtered = 0;
  std::size_t errored = 0;

  friend bool operator==(const CriterionCounts&, const CriterionCounts&) = default;
};

struct RunManifest {
  std::string run_id;
  std::string tool_version{kToolVersion};
  nlohmann::json config;  // snapshot sufficient to re-run
  nlohmann::json seeds;
  std::string sampler_algorithm;
  nlohmann::json templates;
  std::string synonym_table_version;
  std::map<std::string, CriterionCounts> criteria;
  std::string created_at;  // the only nondeterministic field

  /// attempted == accepted + filtered + errored for every criterion.
  bool counts_consistent() const;
  CriterionCounts totals() const;
};

nlohmann::json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& doc);

/// Current UTC time, ISO-8601 with seconds.
std::string utc_timestamp();

/// Loads cases.jsonl, validating every record on the way in.
std::vector<TestCase> load_cases(const RunPaths& run, const PromptTemplates& templates = {});
std::vector<FilteredRecord> load_filtered(const RunPaths& run);

inline constexpr std::string_view kSftCaptionPrefix = "The image shows ";

/// Instruction pairs for fine-tuning, one JSON line each:
/// {"criterion","image","prompt","response"}. Per case: the describe prompt
/// with a caption naming the sorted truth labels, then one "Yes."/"No." pair
/// per existence question. Cases are emitted in case_id order. Throws
/// ValidationError for an empty criterion filter and NotFoundError when no
/// case matches.
std::vector<std::string> export_sft(const std::vector<TestCase>& cases,
                                    const std::set<Criterion>& criteria);

}  // namespace ode
