#include "ode/pipeline.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include "ode/error.hpp"
#include "ode/parallel.hpp"
#include "ode/png.hpp"

namespace fs = std::filesystem;

namespace ode {

using nlohmann::json;

std::set<std::string> derive_hallucination_targets(const ConceptGraph& graph,
                                                   const std::set<std::string>& truth,
                                                   std::size_t cap) {
  std::map<std::string, std::uint64_t> best;
  for (const auto& label : truth) {
    if (!graph.contains(label)) continue;
    for (const auto& n : graph.neighbors(label)) {
      if (truth.count(n.node.label)) continue;
      auto& w = best[n.node.label];
      w = std::max(w, n.weight);
    }
  }
  std::vector<std::pair<std::string, std::uint64_t>> ranked(best.begin(), best.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& x, const auto& y) { return x.second > y.second; });
  std::set<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < cap; ++i) out.insert(ranked[i].first);
  return out;
}

std::string missing_reason(const ConceptPair& pair, const std::set<std::string>& detected) {
  std::vector<std::string> missing;
  for (const auto* label : {&pair.a.label, &pair.b.label}) {
    if (!detected.count(*label)) missing.push_back(*label);
  }
  if (missing.empty()) return {};
  std::string reason = "missing: " + missing.front();
  if (missing.size() > 1) reason += ", " + missing.back();
  return reason;
}

PipelineOptions PipelineOptions::from_config(const RunConfig& config,
                                             std::string synonym_table_version) {
  PipelineOptions o;
  o.threshold = config.threshold;
  o.hallucination_cap = config.hallucination_cap;
  o.image_width = config.image_width;
  o.image_height = config.image_height;
  o.max_regen_attempts = config.max_regen_attempts;
  o.concurrency = config.concurrency;
  o.templates = config.templates;
  o.config_snapshot = to_json(config);
  o.synonym_table_version = std::move(synonym_table_version);
  return o;
}

std::uint64_t image_seed_for(const std::string& case_id, std::size_t attempt) {
  if (attempt == 0) return seed_from_hash(case_id);
  return seed_from_hash(content_hash(case_id + ":" + std::to_string(attempt)));
}

Pipeline::Pipeline(const ConceptGraph& graph, Store& store, ServiceClient& t2i,
                   ServiceClient& detector, PipelineOptions options)
    : graph_(graph),
      store_(store),
      t2i_(t2i),
      detector_(detector),
      options_(std::move(options)),
      vocabulary_(graph.labels()) {
  if (options_.max_regen_attempts == 0) throw ValidationError("max_regen_attempts must be >= 1");
  if (vocabulary_.empty()) throw ValidationError("pipeline needs a non-empty concept graph");
}

CaseOutcome Pipeline::annotate(const std::string& case_id, const ConceptPair& pair, Style style,
                               std::uint64_t seed, std::uint64_t image_seed, const Bytes& png,
                               std::size_t attempts, Source source,
                               const std::string& origin) const {
  const std::string image_ref = store_.put_image(png);
  const auto detections = detect(detector_, png, vocabulary_, options_.threshold);
  std::set<std::string> detected;
  for (const auto& d : detections) detected.insert(d.label);
  const std::string reason = missing_reason(pair, detected);
  if (!reason.empty()) {
    return FilteredRecord{case_id, pair,   style,    seed,   image_seed,
                          image_ref, reason, attempts, source, origin};
  }
  TestCase c;
  c.case_id = case_id;
  c.pair = pair;
  c.style = style;
  c.seed = seed;
  c.image_seed = image_seed;
  c.image_ref = image_ref;
  c.truth = std::move(detected);
  c.hallucination_targets =
      derive_hallucination_targets(graph_, c.truth, options_.hallucination_cap);
  c.questions = question_set(c.truth, c.hallucination_targets, options_.templates);
  c.detections = detections;
  c.source = source;
  c.origin = origin;
  return c;
}

CaseOutcome Pipeline::synthesize_case(const ConceptPair& pair, Style style,
                                      std::uint64_t seed) const {
  ++synthesis_calls_;
  const std::string case_id = synthesized_case_id(pair, style, seed);
  std::optional<CaseOutcome> last;
  for (std::size_t attempt = 0; attempt < options_.max_regen_attempts; ++attempt) {
    const std::uint64_t image_seed = image_seed_for(case_id, attempt);
    const auto spec = image_prompt(pair, style, image_seed, options_.templates);
    const auto image = txt2img(t2i_, spec, options_.image_width, options_.image_height);
    last = annotate(case_id, pair, style, seed, image_seed, image.png, attempt + 1,
                    Source::synthesized, "");
    if (std::holds_alternative<TestCase>(*last)) break;
  }
  return std::move(*last);
}

std::set<std::string> recorded_case_ids(const RunPaths& run) {
  std::set<std::string> ids;
  for (const auto& file : {run.cases(), run.filtered()}) {
    for (const auto& line : read_lines(file)) {
      const json doc = json::parse(line, nullptr, false);
      if (doc.is_discarded() || !doc.contains("case_id")) {
        throw ValidationError("corrupt record in " + file.string());
      }
      ids.insert(doc.at("case_id").get<std::string>());
    }
  }
  return ids;
}

namespace {

std::string case_id_of(const IngestOutcome& outcome) {
  return std::visit([](const auto& r) { return r.case_id; }, outcome);
}

struct Task {
  ConceptPair pair;
  Style style;
  std::string case_id;
};

}  // namespace

std::size_t persist_outcomes(const RunPaths& run, const std::vector<IngestOutcome>& outcomes) {
  std::set<std::string> existing = recorded_case_ids(run);
  std::vector<const IngestOutcome*> sorted;
  for (const auto& o : outcomes) sorted.push_back(&o);
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto* x, const auto* y) {
    return case_id_of(*x) < case_id_of(*y);
  });
  std::vector<std::string> cases;
  std::vector<std::string> filtered;
  std::vector<std::string> errors;
  for (const auto* o : sorted) {
    if (const auto* e = std::get_if<ErrorRecord>(o)) {
      errors.push_back(to_json(*e).dump());
      continue;
    }
    const std::string id = case_id_of(*o);
    if (!existing.insert(id).second) continue;
    if (const auto* c = std::get_if<TestCase>(o)) cases.push_back(to_json(*c).dump());
    if (const auto* f = std::get_if<FilteredRecord>(o)) filtered.push_back(to_json(*f).dump());
  }
  append_lines_atomic(run.cases(), cases);
  append_lines_atomic(run.filtered(), filtered);
  append_lines_atomic(run.errors(), errors);
  return cases.size() + filtered.size();
}

RunManifest Pipeline::run_batch(const RunPaths& run, const std::vector<Criterion>& criteria,
                                std::size_t k, const std::vector<Style>& styles,
                                std::uint64_t seed) const {
  if (k == 0) throw ValidationError("k must be at least 1");
  RunManifest manifest;
  manifest.run_id = run.dir.filename().string();
  manifest.config = options_.config_snapshot;
  manifest.sampler_algorithm = std::string(kSamplerAlgorithm);
  manifest.templates = to_json(options_.templates);
  manifest.synonym_table_version = options_.synonym_table_version;
  json per_criterion = json::object();

  std::vector<std::string> pair_lines;
  const std::set<std::string> done = recorded_case_ids(run);
  std::vector<IngestOutcome> batch;
  std::map<std::string, std::vector<Task>> tasks_by_criterion;

  for (const Criterion criterion : criteria) {
    const std::string name(to_string(criterion));
    per_criterion[name] = seed;
    CriterionCounts counts;
    counts.requested_k = k;

    std::vector<ConceptPair> pairs;
    try {
      pairs = sample_pairs(graph_, criterion, k, seed);
    } catch (const NoCandidatesError&) {
      pairs.clear();
    }
    counts.sampled = pairs.size();
    counts.exhausted = pairs.size() < k;
    for (const auto& p : pairs) pair_lines.push_back(to_json(p).dump());

    std::vector<Task> tasks;
    for (const auto& pair : pairs) {
      for (const Style style : styles) {
        tasks.push_back(Task{pair, style, synthesized_case_id(pair, style, seed)});
      }
    }
    std::vector<const Task*> pending;
    for (const auto& t : tasks) {
      if (!done.count(t.case_id)) pending.push_back(&t);
    }

    std::vector<std::optional<IngestOutcome>> results(pending.size());
    std::vector<std::exception_ptr> fatal(pending.size());
    parallel_for(pending.size(), options_.concurrency, [&](std::size_t i) {
      const Task& t = *pending[i];
      try {
        std::visit([&](auto&& r) { results[i].emplace(std::move(r)); },
                   synthesize_case(t.pair, t.style, seed));
      } catch (const IoError&) {
        fatal[i] = std::current_exception();
      } catch (const Error& e) {
        results[i].emplace(ErrorRecord{t.case_id, name, "", std::string(to_string(e.kind())),
                                       e.what()});
      } catch (const std::exception& e) {
        results[i].emplace(ErrorRecord{t.case_id, name, "", "internal", e.what()});
      }
    });
    for (const auto& f : fatal) {
      if (f) std::rethrow_exception(f);
    }

    for (auto& r : results) {
      if (std::holds_alternative<ErrorRecord>(*r)) ++counts.errored;
      batch.push_back(std::move(*r));
    }
    manifest.criteria[name] = counts;
    tasks_by_criterion[name] = std::move(tasks);
  }

  // One sorted append for the whole batch keeps the files in case_id order.
  persist_outcomes(run, batch);
  const std::set<std::string> done_after = recorded_case_ids(run);
  std::set<std::string> accepted_ids;
  for (const auto& line : read_lines(run.cases())) {
    accepted_ids.insert(json::parse(line).at("case_id").get<std::string>());
  }
  for (auto& [name, counts] : manifest.criteria) {
    for (const auto& t : tasks_by_criterion[name]) {
      if (accepted_ids.count(t.case_id)) {
        ++counts.accepted;
      } else if (done_after.count(t.case_id)) {
        ++counts.filtered;
      }
    }
    counts.attempted = counts.accepted + counts.filtered + counts.errored;
  }

  manifest.seeds = json{{"per_criterion", per_criterion}, {"run_seed", seed}};
  write_file_atomic(run.pairs(), [&pair_lines] {
    std::string text;
    for (const auto& line : pair_lines) text += line + "\n";
    return text;
  }());
  manifest.created_at = utc_timestamp();
  write_file_atomic(run.manifest(), to_json(manifest).dump(2) + "\n");
  return manifest;
}

std::vector<IngestOutcome> Pipeline::ingest_images(const fs::path& dir,
                                                   const fs::path& sidecar) const {
  if (!fs::is_directory(dir)) throw NotFoundError("ingest directory not found: " + dir.string());

  std::set<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.insert(entry.path().filename().string());
  }

  std::map<std::string, json> entries;
  if (!sidecar.empty() && fs::exists(sidecar)) {
    std::size_t line_number = 0;
    for (const auto& line : read_lines(sidecar)) {
      ++line_number;
      const json doc = json::parse(line, nullptr, false);
      if (doc.is_discarded() || !doc.is_object() || !doc.contains("file") ||
          !doc.at("file").is_string()) {
        throw ValidationError(sidecar.string() + ": line " + std::to_string(line_number) +
                              " needs a string 'file'");
      }
      entries[doc.at("file").get<std::string>()] = doc;
    }
  } else if (!files.empty()) {
    throw NotFoundError("sidecar mapping file not found: " + sidecar.string());
  }

  std::set<std::string> names = files;
  for (const auto& [name, doc] : entries) names.insert(name);
  const std::vector<std::string> ordered(names.begin(), names.end());

  std::vector<IngestOutcome> outcomes(ordered.size(), ErrorRecord{});
  parallel_for(ordered.size(), options_.concurrency, [&](std::size_t i) {
    const std::string& name = ordered[i];
    const auto fail = [&](const std::string& kind, const std::string& message) {
      outcomes[i] = ErrorRecord{"", "", name, kind, message};
    };
    const auto entry = entries.find(name);
    if (entry == entries.end()) return fail("validation", "missing sidecar entry");
    if (!files.count(name)) return fail("not_found", "image file not found");
    try {
      const json& doc = entry->second;
      const Criterion criterion =
          criterion_from_string(doc.value("criterion", std::string("random")));
      const Style style = style_from_string(doc.value("style", std::string("photo")));
      if (!doc.contains("a") || !doc.contains("b")) {
        return fail("validation", "sidecar entry needs 'a' and 'b'");
      }
      const ConceptPair pair = make_pair(graph_, normalize_label(doc.at("a").get<std::string>()),
                                         normalize_label(doc.at("b").get<std::string>()), criterion);
      const Bytes raw = read_file(dir / name);
      Bytes png;
      try {
        if (looks_like_png(raw)) {
          inspect_png(raw);
          png = raw;
        } else if (looks_like_jpeg(raw)) {
          png = encode_png(decode_jpeg(raw));
        } else {
          return fail("parse", "unreadable image: not PNG or JPEG");
        }
      } catch (const ParseError& e) {
        return fail("parse", std::string("unreadable image: ") + e.what());
      }
      const std::string case_id = ingested_case_id(pair, style, content_hash(png));
      std::visit([&](auto&& r) { outcomes[i] = std::move(r); },
                 annotate(case_id, pair, style, 0, 0, png, 1, Source::ingested, name));
    } catch (const Error& e) {
      fail(std::string(to_string(e.kind())), e.what());
    } catch (const std::exception& e) {
      fail("internal", e.what());
    }
  });
  return outcomes;
}

}  // namespace ode
