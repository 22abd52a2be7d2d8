#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ode/prompts.hpp"
#include "ode/sampler.hpp"
#include "ode/services.hpp"

namespace ode {

enum class PositiveClass { yes, no };
enum class EvalMode { generative, discriminative, both };

std::string_view to_string(PositiveClass positive) noexcept;
PositiveClass positive_class_from_string(std::string_view text);
std::string_view to_string(EvalMode mode) noexcept;
EvalMode eval_mode_from_string(std::string_view text);

/// Everything a run needs. Loaded from one JSON config file; CLI flags and
/// ODE_*_URL environment variables override individual fields afterwards.
struct RunConfig {
  std::filesystem::path store_root = "ode-store";
  std::filesystem::path graph_path;
  std::string run_id;  // empty: derived from the config hash

  ServiceEndpoint t2i;
  ServiceEndpoint detector;
  ServiceEndpoint model;

  double threshold = kDefaultDetectionThreshold;
  std::size_t k = kDefaultPairsPerCriterion;
  std::vector<Criterion> criteria{std::begin(kAllCriteria), std::end(kAllCriteria)};
  std::vector<Style> styles{Style::photo, Style::anime};
  std::size_t hallucination_cap = 3;
  std::uint64_t seed = 0;
  std::uint32_t image_width = 512;
  std::uint32_t image_height = 512;
  /// Total generation attempts per (pair, style) before a case is filtered.
  std::size_t max_regen_attempts = 2;
  /// Worker threads for synthesis and evaluation.
  std::size_t concurrency = 4;

  PromptTemplates templates;
  std::filesystem::path synonyms_path;  // empty: built-in table

  PositiveClass positive_class = PositiveClass::yes;
  EvalMode eval_mode = EvalMode::both;
  std::size_t cluster_k = 4;
  std::uint64_t cluster_seed = 0;
};

/// Missing keys keep their defaults; unknown keys are a ValidationError so
/// typos do not silently fall back to defaults.
RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical snapshot (sorted keys, bearer tokens redacted).
nlohmann::json to_json(const RunConfig& config);

/// Applies ODE_T2I_URL / ODE_DETECT_URL / ODE_MODEL_URL when set.
void apply_env_overrides(RunConfig& config,
                         const std::function<const char*(const char*)>& getenv_fn);

/// Stable run id: first 12 hex chars of the hash of the generation-relevant
/// config fields.
std::string derived_run_id(const RunConfig& config);

void validate(const RunConfig& config);

}  // namespace ode
