#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ode/analysis.hpp"
#include "ode/concept_graph.hpp"
#include "ode/config.hpp"
#include "ode/error.hpp"
#include "ode/evaluator.hpp"
#include "ode/metrics.hpp"
#include "ode/mock_services.hpp"
#include "ode/pipeline.hpp"
#include "ode/report.hpp"
#include "ode/sampler.hpp"
#include "ode/store.hpp"

namespace ode::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string store;
  std::string graph;
  std::string run;
  std::string records;
  std::string out;
  std::string dir;
  std::string sidecar;
  std::string synonyms;
  std::vector<std::string> criteria;
  std::vector<std::string> styles;
  std::vector<std::string> export_criteria;  // output filter only; never part of the run id
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::string mode;
  std::string positive;
  std::size_t clusters = 0;
  std::uint64_t cluster_seed = 0;
  bool json = false;

  // Set after parsing for options whose defaults come from the config.
  bool has_k = false;
  bool has_seed = false;
  bool has_clusters = false;
  bool has_cluster_seed = false;
};

class Context {
 public:
  Context(const Options& options, const Getenv& getenv_fn, std::ostream& out)
      : options_(options), out_(out) {
    config_ = options.config.empty() ? RunConfig{} : load_config(options.config);
    if (getenv_fn) apply_env_overrides(config_, getenv_fn);
    if (!options.store.empty()) config_.store_root = options.store;
    if (!options.graph.empty()) config_.graph_path = options.graph;
    if (!options.run.empty()) config_.run_id = options.run;
    if (!options.synonyms.empty()) config_.synonyms_path = options.synonyms;
    if (options.has_k) config_.k = options.k;
    if (options.has_seed) config_.seed = options.seed;
    if (!options.criteria.empty()) {
      config_.criteria.clear();
      for (const auto& c : options.criteria) config_.criteria.push_back(criterion_from_string(c));
    }
    if (!options.styles.empty()) {
      config_.styles.clear();
      for (const auto& s : options.styles) config_.styles.push_back(style_from_string(s));
    }
    if (!options.mode.empty()) config_.eval_mode = eval_mode_from_string(options.mode);
    if (!options.positive.empty()) {
      config_.positive_class = positive_class_from_string(options.positive);
    }
    if (options.has_clusters) config_.cluster_k = options.clusters;
    if (options.has_cluster_seed) config_.cluster_seed = options.cluster_seed;
    validate(config_);
  }

  const RunConfig& config() const { return config_; }
  bool json_output() const { return options_.json; }

  const ConceptGraph& graph() {
    if (!graph_) {
      if (config_.graph_path.empty()) {
        throw ValidationError("no concept graph: pass --graph or set \"graph\" in the config");
      }
      graph_ = load_graph_file(config_.graph_path.string());
    }
    return *graph_;
  }

  Store& store() {
    if (!store_) store_.emplace(config_.store_root);
    return *store_;
  }

  std::string run_id() const {
    return config_.run_id.empty() ? derived_run_id(config_) : config_.run_id;
  }

  /// The run directory; `must_exist` rejects unknown runs instead of creating them.
  RunPaths run(bool must_exist) {
    const std::string id = run_id();
    if (must_exist && !fs::is_directory(fs::path(config_.store_root) / "runs" / id)) {
      throw NotFoundError("run '" + id + "' not found under " + config_.store_root.string());
    }
    return store().run(id);
  }

  const SynonymTable& synonyms() {
    if (!synonyms_) {
      synonyms_ = config_.synonyms_path.empty() ? SynonymTable::defaults()
                                                : SynonymTable::load(config_.synonyms_path);
    }
    return *synonyms_;
  }

  MockContext mock_context() {
    return MockContext{graph().labels(), config_.templates};
  }

  void emit(const json& summary, const std::string& human) {
    if (options_.json) {
      out_ << summary.dump() << "\n";
    } else {
      out_ << human;
    }
  }

 private:
  const Options& options_;
  std::ostream& out_;
  RunConfig config_;
  std::optional<ConceptGraph> graph_;
  std::optional<Store> store_;
  std::optional<SynonymTable> synonyms_;
};

std::unique_ptr<ServiceClient> make_client(Context& ctx, const ServiceEndpoint& endpoint,
                                           const char* role, const char* env, RequestLog* log) {
  if (endpoint.base_url.empty()) {
    throw ValidationError(std::string("no ") + role + " endpoint: set endpoints." + role +
                          " in the config or " + env);
  }
  validate(endpoint);
  return std::make_unique<ServiceClient>(endpoint, make_transport(endpoint, ctx.mock_context()),
                                         &ctx.store(), log);
}

std::string counts_text(const std::map<std::string, CriterionCounts>& criteria) {
  std::ostringstream text;
  for (const auto& [name, c] : criteria) {
    text << name << ": sampled " << c.sampled << "/" << c.requested_k
         << (c.exhausted ? " (exhausted)" : "") << ", attempted " << c.attempted << ", accepted "
         << c.accepted << ", filtered " << c.filtered << ", errored " << c.errored << "\n";
  }
  return text.str();
}

std::string write_or_print(const Options& options, const std::vector<std::string>& lines,
                           std::ostream& out) {
  std::string text;
  for (const auto& line : lines) text += line + "\n";
  if (options.out.empty()) {
    out << text;
    return {};
  }
  write_file_atomic(options.out, text);
  return options.out;
}

int cmd_graph_build(const Options& options, std::ostream& out) {
  if (options.records.empty() || options.out.empty()) {
    throw ValidationError("graph build needs --records and --out");
  }
  std::ifstream in(options.records, std::ios::binary);
  if (!in) throw NotFoundError("scene records not found: " + options.records);
  const ConceptGraph graph = build_graph(in);
  save_graph_file(graph, options.out);
  const json summary{{"concepts", graph.node_count()}, {"edges", graph.edge_count()},
                     {"out", options.out}};
  if (options.json) {
    out << summary.dump() << "\n";
  } else {
    out << "wrote " << options.out << ": " << graph.node_count() << " concepts, "
        << graph.edge_count() << " edges\n";
  }
  return kExitOk;
}

int cmd_graph_info(Context& ctx) {
  const ConceptGraph& g = ctx.graph();
  std::map<std::string, std::size_t> levels;
  for (const auto& [label, level] : g.concepts()) ++levels[std::string(to_string(level))];
  std::uint64_t total = 0;
  for (const auto& [key, w] : g.edges()) total += w;
  std::ostringstream human;
  human << "concepts: " << g.node_count() << "\nedges: " << g.edge_count()
        << "\ntotal weight: " << total << "\n";
  for (const auto& [level, n] : levels) human << "  " << level << ": " << n << "\n";
  ctx.emit(json{{"concepts", g.node_count()}, {"edges", g.edge_count()}, {"total_weight", total},
                {"levels", levels}},
           human.str());
  return kExitOk;
}

int cmd_sample(Context& ctx, const Options& options, std::ostream& out) {
  const ConceptGraph& graph = ctx.graph();
  std::vector<std::string> lines;
  json per = json::object();
  for (const Criterion criterion : ctx.config().criteria) {
    std::vector<ConceptPair> pairs;
    try {
      pairs = sample_pairs(graph, criterion, ctx.config().k, ctx.config().seed);
    } catch (const NoCandidatesError&) {
    }
    per[std::string(to_string(criterion))] =
        json{{"sampled", pairs.size()}, {"exhausted", pairs.size() < ctx.config().k}};
    for (const auto& p : pairs) lines.push_back(to_json(p).dump());
  }
  if (lines.empty()) throw NoCandidatesError("no candidate pairs for the requested criteria");
  const std::string written = write_or_print(options, lines, out);
  if (!written.empty()) {
    std::ostringstream human;
    human << "wrote " << lines.size() << " pairs to " << written << "\n";
    ctx.emit(json{{"pairs", lines.size()}, {"criteria", per}, {"out", written}}, human.str());
  }
  return kExitOk;
}

int cmd_generate(Context& ctx) {
  const RunConfig& config = ctx.config();
  const RunPaths run = ctx.run(false);
  FileRequestLog log(run.requests());
  auto t2i = make_client(ctx, config.t2i, "t2i", kTxt2ImgUrlEnv, &log);
  auto detector = make_client(ctx, config.detector, "detect", kDetectUrlEnv, &log);
  const Pipeline pipeline(ctx.graph(), ctx.store(), *t2i, *detector,
                          PipelineOptions::from_config(config, ctx.synonyms().version()));
  const RunManifest manifest =
      pipeline.run_batch(run, config.criteria, config.k, config.styles, config.seed);
  const CriterionCounts totals = manifest.totals();
  const ClientStats t2i_stats = t2i->stats();
  const ClientStats det_stats = detector->stats();
  json summary{{"run_id", manifest.run_id},
               {"run_dir", run.dir.string()},
               {"totals",
                {{"attempted", totals.attempted},
                 {"accepted", totals.accepted},
                 {"filtered", totals.filtered},
                 {"errored", totals.errored}}},
               {"network_calls", t2i_stats.network_calls + det_stats.network_calls},
               {"cache_hits", t2i_stats.cache_hits + det_stats.cache_hits},
               {"cache_misses", t2i_stats.cache_misses + det_stats.cache_misses}};
  std::ostringstream human;
  human << "run " << manifest.run_id << " (" << run.dir.string() << ")\n"
        << counts_text(manifest.criteria) << "network calls " << summary["network_calls"]
        << ", cache hits " << summary["cache_hits"] << "\n";
  ctx.emit(summary, human.str());
  return totals.errored > 0 ? kExitTransport : kExitOk;
}

int cmd_ingest(Context& ctx, const Options& options) {
  if (options.dir.empty()) throw ValidationError("ingest needs --dir");
  const fs::path dir = options.dir;
  const fs::path sidecar = options.sidecar.empty() ? dir / "sidecar.jsonl" : fs::path(options.sidecar);
  const RunPaths run = ctx.run(false);
  FileRequestLog log(run.requests());
  auto detector = make_client(ctx, ctx.config().detector, "detect", kDetectUrlEnv, &log);
  // Ingestion never calls the generator; the detector stands in so the
  // pipeline can be constructed.
  const Pipeline pipeline(ctx.graph(), ctx.store(), *detector, *detector,
                          PipelineOptions::from_config(ctx.config(), ctx.synonyms().version()));
  const auto outcomes = pipeline.ingest_images(dir, sidecar);
  persist_outcomes(run, outcomes);
  std::size_t accepted = 0, filtered = 0, errors = 0, service_errors = 0;
  std::ostringstream human;
  for (const auto& o : outcomes) {
    if (std::holds_alternative<TestCase>(o)) ++accepted;
    if (std::holds_alternative<FilteredRecord>(o)) ++filtered;
    if (const auto* e = std::get_if<ErrorRecord>(&o)) {
      ++errors;
      if (e->kind == "transport" || e->kind == "protocol") ++service_errors;
      human << "error: " << e->origin << ": " << e->message << "\n";
    }
  }
  human << "ingested " << outcomes.size() << " files: accepted " << accepted << ", filtered "
        << filtered << ", errors " << errors << "\n";
  ctx.emit(json{{"run_id", ctx.run_id()},
                {"files", outcomes.size()},
                {"accepted", accepted},
                {"filtered", filtered},
                {"errors", errors}},
           human.str());
  return service_errors > 0 ? kExitTransport : kExitOk;
}

int cmd_evaluate(Context& ctx) {
  const RunPaths run = ctx.run(true);
  const auto cases = load_cases(run, ctx.config().templates);
  if (cases.empty()) throw NotFoundError("run '" + ctx.run_id() + "' has no accepted cases");
  FileRequestLog log(run.requests());
  auto model = make_client(ctx, ctx.config().model, "model", kModelUrlEnv, &log);
  const MentionExtractor extractor(ctx.graph().labels(), ctx.synonyms());
  const auto responses = evaluate_cases(
      cases, ctx.store(), *model, extractor,
      EvaluationOptions{ctx.config().eval_mode, ctx.config().concurrency});
  save_responses(run.responses(), responses);
  const std::size_t errors = static_cast<std::size_t>(std::count_if(
      responses.begin(), responses.end(), [](const ModelResponse& r) { return !r.error.empty(); }));
  const ClientStats stats = model->stats();
  std::ostringstream human;
  human << "evaluated " << cases.size() << " cases, " << responses.size() << " responses ("
        << errors << " failed) -> " << run.responses().string() << "\n";
  ctx.emit(json{{"run_id", ctx.run_id()},
                {"cases", cases.size()},
                {"responses", responses.size()},
                {"errors", errors},
                {"synonym_table_version", ctx.synonyms().version()},
                {"network_calls", stats.network_calls},
                {"cache_hits", stats.cache_hits}},
           human.str());
  return errors > 0 ? kExitTransport : kExitOk;
}

std::string headline_text(const json& report) {
  std::ostringstream text;
  text << "criterion   CHAIR  Cover    Hal    Cog    Acc   Prec    Rec     F1\n";
  const auto row = [&text](const std::string& name, const json& headline) {
    text << name;
    for (std::size_t i = name.size(); i < 10; ++i) text << ' ';
    for (const char* key :
         {"chair", "cover", "hal", "cog", "accuracy", "precision", "recall", "f1"}) {
      const json& v = headline.at(key);
      char buf[16];
      if (v.is_number()) {
        std::snprintf(buf, sizeof buf, "%7.1f", v.get<double>());
      } else {
        std::snprintf(buf, sizeof buf, "%7s", "-");
      }
      text << buf;
    }
    text << "\n";
  };
  for (const auto& [name, entry] : report.at("criteria").items()) row(name, entry.at("headline"));
  row("overall", report.at("overall").at("headline"));
  text << "positive class: " << report.at("positive_class").get<std::string>() << "\n";
  return text.str();
}

int cmd_metrics(Context& ctx) {
  const RunPaths run = ctx.run(true);
  const auto cases = load_cases(run, ctx.config().templates);
  const auto responses = load_responses(run.responses());
  const json report = metrics_report(cases, responses, ctx.config().positive_class);
  write_file_atomic(run.metrics(), report.dump(2) + "\n");
  ctx.emit(report, headline_text(report) + "wrote " + run.metrics().string() + "\n");
  return kExitOk;
}

int cmd_analyze(Context& ctx) {
  const RunPaths run = ctx.run(true);
  const auto cases = load_cases(run, ctx.config().templates);
  const auto responses = load_responses(run.responses());
  const FactHallMatrix matrix = build_matrix(cases, responses);
  write_file_atomic(run.matrix_csv(), matrix_csv(matrix));
  write_file_atomic(run.matrix_json(), to_json(matrix).dump(1) + "\n");
  save_graph_file(hallucination_graph(matrix, ctx.graph()), run.hallucination_graph().string());
  const ClusterReport clusters =
      cluster_concepts(matrix, ctx.config().cluster_k, ctx.config().cluster_seed);
  const json clusters_doc = to_json(clusters);
  write_file_atomic(run.clusters(), clusters_doc.dump(2) + "\n");

  std::ostringstream human;
  human << "matrix " << matrix.rows.size() << "x" << matrix.cols.size() << ", total "
        << matrix.total() << "\n";
  for (std::size_t id = 0; id < clusters.k; ++id) {
    human << "cluster " << id << " (" << clusters.sizes[id] << "): ";
    for (std::size_t i = 0; i < clusters.top_truth_concepts[id].size(); ++i) {
      human << (i ? ", " : "") << clusters.top_truth_concepts[id][i];
    }
    human << "\n";
  }
  ctx.emit(json{{"rows", matrix.rows.size()},
                {"cols", matrix.cols.size()},
                {"total", matrix.total()},
                {"clusters", clusters_doc}},
           human.str());
  return kExitOk;
}

int cmd_export_sft(Context& ctx, const Options& options, std::ostream& out) {
  const RunPaths run = ctx.run(true);
  const auto cases = load_cases(run, ctx.config().templates);
  std::set<Criterion> criteria(std::begin(kAllCriteria), std::end(kAllCriteria));
  if (!options.export_criteria.empty()) {
    criteria.clear();
    for (const auto& c : options.export_criteria) criteria.insert(criterion_from_string(c));
  }
  const auto lines = export_sft(cases, criteria);
  const std::string written = write_or_print(options, lines, out);
  if (!written.empty()) {
    ctx.emit(json{{"records", lines.size()}, {"out", written}},
             "wrote " + std::to_string(lines.size()) + " records to " + written + "\n");
  }
  return kExitOk;
}

int cmd_report(Context& ctx, const Options& options) {
  const RunPaths run = ctx.run(true);
  if (!fs::exists(run.metrics())) {
    throw NotFoundError("no metrics.json in run '" + ctx.run_id() + "'; run `ode metrics` first");
  }
  const json metrics = json::parse(read_file(run.metrics()));
  const fs::path dir = options.out.empty() ? run.dir : fs::path(options.out);
  fs::create_directories(dir);
  write_file_atomic(dir / "report.csv", report_csv(metrics));
  write_file_atomic(dir / "report.svg", report_svg(metrics));
  ctx.emit(json{{"csv", (dir / "report.csv").string()}, {"svg", (dir / "report.svg").string()}},
           "wrote " + (dir / "report.csv").string() + " and " + (dir / "report.svg").string() +
               "\n");
  return kExitOk;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::transport:
    case ErrorKind::protocol: return kExitTransport;
    default: return kExitFailure;
  }
}

constexpr const char* kFooter = R"(
Exit status: 0 success, 1 invalid input or missing data, 2 service failure, 64 usage error.
Endpoints come from the config file or ODE_T2I_URL, ODE_DETECT_URL, ODE_MODEL_URL.
Use mock://t2i, mock://detect?omit=0.3 or mock://model?script=truthful for offline runs.
Defaults: k=40, threshold=0.5, styles photo+anime, all four criteria, seed 0,
max_regen_attempts=2, cluster k=4, positive class yes, store ./ode-store.)";

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const Getenv& getenv_fn) {
  Options o;
  CLI::App app{"Open-set object-existence hallucination benchmark toolkit", "ode"};
  app.footer(kFooter);
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kToolVersion));
  app.add_option("--config", o.config, "Run config file (JSON)");
  app.add_option("--store", o.store, "Store root directory (default: config or ./ode-store)");
  app.add_flag("--json", o.json, "Machine-readable output");

  const auto add_graph = [&o](CLI::App* sub) {
    sub->add_option("--graph", o.graph, "Concept graph file");
  };
  const auto add_run = [&o](CLI::App* sub) {
    sub->add_option("--run", o.run, "Run id (default: derived from the config)");
  };
  const auto add_criteria = [&o](CLI::App* sub) {
    sub->add_option("--criterion", o.criteria, "common | longtail | random | fictional (repeatable)")
        ->take_all();
  };
  CLI::Option* k_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  const auto add_k_seed = [&](CLI::App* sub) {
    k_opt = sub->add_option("--k", o.k, "Pairs per criterion (default 40)");
    seed_opt = sub->add_option("--seed", o.seed, "Sampling seed (default 0)");
  };

  auto* graph_cmd = app.add_subcommand("graph", "Concept graph tools");
  graph_cmd->require_subcommand(1);
  auto* graph_build = graph_cmd->add_subcommand("build", "Build a graph from scene records");
  graph_build->add_option("--records", o.records, "Scene records (JSONL)")->required();
  graph_build->add_option("--out", o.out, "Output graph file")->required();
  auto* graph_info = graph_cmd->add_subcommand("info", "Summarize a graph");
  add_graph(graph_info);

  auto* sample = app.add_subcommand("sample", "Sample concept pairs");
  add_graph(sample);
  add_criteria(sample);
  add_k_seed(sample);
  CLI::Option* sample_k = k_opt;
  CLI::Option* sample_seed = seed_opt;
  sample->add_option("--out", o.out, "Pairs file (default: stdout)");

  auto* generate = app.add_subcommand("generate", "Synthesize, filter and annotate test cases");
  add_graph(generate);
  add_run(generate);
  add_criteria(generate);
  add_k_seed(generate);
  CLI::Option* generate_k = k_opt;
  CLI::Option* generate_seed = seed_opt;
  generate->add_option("--style", o.styles, "photo | anime (repeatable)")->take_all();

  auto* ingest = app.add_subcommand("ingest", "Run external images through the filter");
  add_graph(ingest);
  add_run(ingest);
  ingest->add_option("--dir", o.dir, "Directory of PNG/JPEG images")->required();
  ingest->add_option("--sidecar", o.sidecar, "Mapping file (default: <dir>/sidecar.jsonl)");

  auto* evaluate = app.add_subcommand("evaluate", "Query the model under test");
  add_graph(evaluate);
  add_run(evaluate);
  evaluate->add_option("--mode", o.mode, "generative | discriminative | both");
  evaluate->add_option("--synonyms", o.synonyms, "Synonym table (canonical<TAB>surface)");

  auto* metrics = app.add_subcommand("metrics", "Compute metrics.json for a run");
  add_run(metrics);
  metrics->add_option("--positive-class", o.positive, "yes | no (default yes)");

  auto* analyze = app.add_subcommand("analyze", "Fact-hallucination matrix and clusters");
  add_graph(analyze);
  add_run(analyze);
  CLI::Option* clusters_opt = analyze->add_option("--clusters", o.clusters, "Cluster count (default 4)");
  CLI::Option* cluster_seed_opt = analyze->add_option("--cluster-seed", o.cluster_seed, "Clustering seed");

  auto* export_sft_cmd = app.add_subcommand("export-sft", "Export instruction-tuning pairs");
  add_run(export_sft_cmd);
  export_sft_cmd->add_option("--criterion", o.export_criteria, "Criteria to export (default: all)")
      ->take_all();
  export_sft_cmd->add_option("--out", o.out, "Output file (default: stdout)");

  auto* report = app.add_subcommand("report", "Per-criterion CSV and SVG bar chart");
  add_run(report);
  report->add_option("--out", o.out, "Output directory (default: the run directory)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* failing = &app;
    for (const CLI::App* sub = &app; sub != nullptr;) {
      const auto chosen = sub->get_subcommands();
      if (chosen.empty()) break;
      failing = sub = chosen.front();
    }
    err << failing->help();
    return kExitUsage;
  }

  o.has_k = (sample_k && sample_k->count() > 0) || (generate_k && generate_k->count() > 0);
  o.has_seed = (sample_seed && sample_seed->count() > 0) || (generate_seed && generate_seed->count() > 0);
  o.has_clusters = clusters_opt->count() > 0;
  o.has_cluster_seed = cluster_seed_opt->count() > 0;

  try {
    if (graph_build->parsed()) return cmd_graph_build(o, out);
    Context ctx(o, getenv_fn, out);
    if (graph_info->parsed()) return cmd_graph_info(ctx);
    if (sample->parsed()) return cmd_sample(ctx, o, out);
    if (generate->parsed()) return cmd_generate(ctx);
    if (ingest->parsed()) return cmd_ingest(ctx, o);
    if (evaluate->parsed()) return cmd_evaluate(ctx);
    if (metrics->parsed()) return cmd_metrics(ctx);
    if (analyze->parsed()) return cmd_analyze(ctx);
    if (export_sft_cmd->parsed()) return cmd_export_sft(ctx, o, out);
    if (report->parsed()) return cmd_report(ctx, o);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace ode::cli
