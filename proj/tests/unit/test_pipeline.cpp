#include <doctest.h>

#include <algorithm>
#include <random>

#include "helpers.hpp"
#include "ode/error.hpp"
#include "ode/hashing.hpp"
#include "ode/pipeline.hpp"
#include "ode/png.hpp"
#include "ode/sampler.hpp"

using namespace ode;
using ode::testing::example_graph;
using ode::testing::MockService;
using ode::testing::TempDir;

namespace {

// Brute force: rank every non-truth label by its strongest tie to truth.
std::set<std::string> targets_oracle(const ConceptGraph& g, const std::set<std::string>& truth,
                                     std::size_t cap) {
  std::vector<std::pair<std::uint64_t, std::string>> ranked;
  for (const auto& label : g.labels()) {
    if (truth.count(label)) continue;
    std::uint64_t best = 0;
    for (const auto& t : truth) best = std::max(best, g.weight(t, label));
    if (best > 0) ranked.emplace_back(best, label);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    return x.first != y.first ? x.first > y.first : x.second < y.second;
  });
  std::set<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < cap; ++i) out.insert(ranked[i].second);
  return out;
}

struct Rig {
  ConceptGraph graph = example_graph();
  TempDir dir;
  Store store{dir.path()};
  MockContext context{graph.labels(), {}};
  MockService t2i;
  MockService det;
  Pipeline pipeline;

  explicit Rig(const std::string& detect_url = "mock://detect", PipelineOptions options = {})
      : t2i("mock://t2i", context, &store),
        det(detect_url, context, &store),
        pipeline(graph, store, *t2i.client, *det.client, with_concurrency(options)) {}

  static PipelineOptions with_concurrency(PipelineOptions o) {
    o.concurrency = 4;
    return o;
  }
};

}  // namespace

TEST_CASE("hallucination targets follow the graph neighbourhood") {
  const auto g = example_graph();
  CHECK(derive_hallucination_targets(g, {"dog", "grass"}, 3) == std::set<std::string>{"frisbee"});
  CHECK(derive_hallucination_targets(g, {"dog", "frisbee"}, 3) == std::set<std::string>{"grass"});
  CHECK(derive_hallucination_targets(g, {"car"}, 3) == std::set<std::string>{"sky"});
  CHECK(derive_hallucination_targets(g, {"dog"}, 1) == std::set<std::string>{"grass"});
  CHECK(derive_hallucination_targets(g, {"dog", "grass"}, 0).empty());
  CHECK(derive_hallucination_targets(g, {"unicorn"}, 3).empty());
}

TEST_CASE("hallucination targets agree with a brute-force ranking") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SceneRecord> records;
    const int n = 3 + static_cast<int>(rng() % 8);
    for (int r = 0; r < 12; ++r) {
      SceneRecord rec;
      for (int i = 0; i < n; ++i) {
        if (rng() % 3 == 0) rec.concepts.push_back(Concept{"c" + std::to_string(i), Level::entity});
      }
      if (!rec.concepts.empty()) records.push_back(rec);
    }
    const auto g = build_graph(records);
    const auto labels = g.labels();
    if (labels.empty()) continue;
    std::set<std::string> truth;
    for (const auto& l : labels) {
      if (rng() % 3 == 0) truth.insert(l);
    }
    const std::size_t cap = rng() % 4;
    CHECK(derive_hallucination_targets(g, truth, cap) == targets_oracle(g, truth, cap));
  }
}

TEST_CASE("missing_reason names absent pair labels") {
  const auto pair = make_pair(example_graph(), "dog", "frisbee", Criterion::common);
  CHECK(missing_reason(pair, {"dog", "frisbee", "grass"}).empty());
  CHECK(missing_reason(pair, {"dog"}) == "missing: frisbee");
  CHECK(missing_reason(pair, {}) == "missing: dog, frisbee");
}

TEST_CASE("image seeds derive from the case id") {
  const std::string id = content_hash("case");
  CHECK(image_seed_for(id, 0) == seed_from_hash(id));
  CHECK(image_seed_for(id, 1) == seed_from_hash(content_hash(id + ":1")));
  CHECK(image_seed_for(id, 1) != image_seed_for(id, 0));
}

TEST_CASE("accepted cases carry detections, truth and questions") {
  Rig rig;
  const auto pair = make_pair(rig.graph, "dog", "frisbee", Criterion::common);
  const auto outcome = rig.pipeline.synthesize_case(pair, Style::photo, 7);
  REQUIRE(std::holds_alternative<TestCase>(outcome));
  const auto& c = std::get<TestCase>(outcome);
  CHECK(c.case_id == synthesized_case_id(pair, Style::photo, 7));
  CHECK(c.image_seed == image_seed_for(c.case_id, 0));
  CHECK(c.truth == std::set<std::string>{"dog", "frisbee"});
  CHECK(c.hallucination_targets == std::set<std::string>{"grass"});
  CHECK(c.questions == question_set(c.truth, c.hallucination_targets));
  CHECK(rig.store.has_image(c.image_ref));
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("a threshold above every confidence filters both labels") {
  PipelineOptions options;
  options.threshold = 1.0;
  Rig rig("mock://detect", options);
  const auto pair = make_pair(rig.graph, "dog", "frisbee", Criterion::common);
  const auto outcome = rig.pipeline.synthesize_case(pair, Style::anime, 1);
  REQUIRE(std::holds_alternative<FilteredRecord>(outcome));
  const auto& f = std::get<FilteredRecord>(outcome);
  CHECK(f.reason == "missing: dog, frisbee");
  CHECK(f.attempts == 2);
  CHECK(f.image_seed == image_seed_for(f.case_id, 1));
  CHECK(rig.t2i.client->stats().calls == 2);
}

TEST_CASE("omitted detections are filtered with the right reason") {
  Rig rig("mock://detect?omit=1&seed=5");
  MockDetector oracle(MockDetectorOptions{0.9, 1.0, 5});
  const auto pair = make_pair(rig.graph, "dog", "grass", Criterion::common);
  const auto outcome = rig.pipeline.synthesize_case(pair, Style::photo, 0);
  REQUIRE(std::holds_alternative<FilteredRecord>(outcome));
  const auto spec = image_prompt(pair, Style::photo, 0);
  CHECK(std::get<FilteredRecord>(outcome).reason == "missing: " + *oracle.omitted_label(spec.prompt));
}

TEST_CASE("a single attempt is honoured") {
  PipelineOptions options;
  options.threshold = 1.0;
  options.max_regen_attempts = 1;
  Rig rig("mock://detect", options);
  const auto pair = make_pair(rig.graph, "car", "sky", Criterion::longtail);
  const auto outcome = rig.pipeline.synthesize_case(pair, Style::photo, 0);
  CHECK(std::get<FilteredRecord>(outcome).attempts == 1);
  CHECK(rig.t2i.client->stats().calls == 1);
}

TEST_CASE("batches count consistently and resume without new calls") {
  Rig rig("mock://detect?omit=0.4&seed=2");
  const auto run = rig.store.run("batch");
  const auto manifest = rig.pipeline.run_batch(run, {std::begin(kAllCriteria), std::end(kAllCriteria)},
                                               2, {Style::photo, Style::anime}, 3);
  CHECK(manifest.counts_consistent());
  CHECK_FALSE(manifest.criteria.at("common").exhausted);
  CHECK(manifest.criteria.at("fictional").sampled == 2);
  const auto totals = manifest.totals();
  CHECK(totals.errored == 0);
  CHECK(totals.accepted == load_cases(run).size());
  CHECK(totals.filtered == load_filtered(run).size());
  CHECK(totals.attempted == totals.accepted + totals.filtered);
  CHECK(totals.attempted > 0);

  const auto cases_before = read_file(run.cases());
  const auto calls_before = rig.t2i.transport->calls() + rig.det.transport->calls();
  const auto again = rig.pipeline.run_batch(run, {std::begin(kAllCriteria), std::end(kAllCriteria)},
                                            2, {Style::photo, Style::anime}, 3);
  CHECK(read_file(run.cases()) == cases_before);
  CHECK(rig.t2i.transport->calls() + rig.det.transport->calls() == calls_before);
  CHECK(again.totals().attempted == totals.attempted);

  std::vector<std::string> ids;
  for (const auto& c : load_cases(run)) ids.push_back(c.case_id);
  CHECK(std::is_sorted(ids.begin(), ids.end()));
}

TEST_CASE("criteria without candidates are marked exhausted") {
  Rig rig;
  rig.graph = build_graph(std::vector<SceneRecord>{ode::testing::scene({{"a", Level::entity}, {"b", Level::entity}})});
  const auto run = rig.store.run("tiny");
  Pipeline pipeline(rig.graph, rig.store, *rig.t2i.client, *rig.det.client, PipelineOptions{});
  const auto manifest = pipeline.run_batch(run, {Criterion::fictional, Criterion::common}, 3,
                                           {Style::photo}, 0);
  CHECK(manifest.criteria.at("fictional").exhausted);
  CHECK(manifest.criteria.at("fictional").sampled == 0);
  CHECK(manifest.criteria.at("fictional").attempted == 0);
  CHECK(manifest.criteria.at("common").exhausted);
  CHECK(manifest.criteria.at("common").sampled == 1);
  CHECK(manifest.counts_consistent());
}

TEST_CASE("service failures become error records and the batch continues") {
  Rig rig;
  rig.det.transport->set_unreachable(true);
  const auto run = rig.store.run("failing");
  const auto manifest = rig.pipeline.run_batch(run, {Criterion::common}, 1, {Style::photo}, 0);
  CHECK(manifest.counts_consistent());
  CHECK(manifest.criteria.at("common").errored == 1);
  const auto errors = read_lines(run.errors());
  REQUIRE(errors.size() == 1);
  CHECK(nlohmann::json::parse(errors[0])["kind"] == "transport");
}

TEST_CASE("ingest runs external images through the same filter") {
  Rig rig;
  TempDir images;
  write_file_atomic(images / "both.png", make_labeled_png({"dog", "frisbee"}));
  write_file_atomic(images / "solid.jpg", read_file(std::string(ODE_TEST_DATA_DIR) + "/solid_16x8.jpg"));
  write_file_atomic(images / "broken.png", "\x89PNG\r\n\x1a\nnope");
  write_file_atomic(images / "orphan.png", make_labeled_png({"car"}));
  write_file_atomic(images / "sidecar.jsonl",
                    R"({"file":"both.png","a":"dog","b":"frisbee","criterion":"common"})" "\n"
                    R"({"file":"solid.jpg","a":"car","b":"sky","style":"anime"})" "\n"
                    R"({"file":"broken.png","a":"dog","b":"grass"})" "\n"
                    R"({"file":"ghost.png","a":"dog","b":"grass"})" "\n"
                    R"({"file":"alien.png","a":"dog","b":"unicorn"})" "\n");
  write_file_atomic(images / "alien.png", make_labeled_png({"dog"}));

  const auto outcomes = rig.pipeline.ingest_images(images.path(), images / "sidecar.jsonl");
  std::map<std::string, IngestOutcome> by_file;
  for (const auto& o : outcomes) {
    std::visit([&](const auto& r) { by_file.emplace(r.origin, o); }, o);
  }
  REQUIRE(by_file.size() == 6);
  const auto& both = std::get<TestCase>(by_file.at("both.png"));
  CHECK(both.source == Source::ingested);
  CHECK(both.truth == std::set<std::string>{"dog", "frisbee"});
  CHECK(both.pair.criterion == Criterion::common);
  const auto& solid = std::get<FilteredRecord>(by_file.at("solid.jpg"));
  CHECK(solid.reason == "missing: car, sky");
  CHECK(solid.style == Style::anime);
  CHECK(looks_like_png(rig.store.get_image(solid.image_ref)));
  CHECK(std::get<ErrorRecord>(by_file.at("broken.png")).kind == "parse");
  CHECK(std::get<ErrorRecord>(by_file.at("ghost.png")).kind == "not_found");
  CHECK(std::get<ErrorRecord>(by_file.at("orphan.png")).message == "missing sidecar entry");
  CHECK(std::get<ErrorRecord>(by_file.at("alien.png")).kind == "not_found");

  const auto run = rig.store.run("ingest");
  CHECK(persist_outcomes(run, outcomes) == 2);
  CHECK(persist_outcomes(run, outcomes) == 0);
  CHECK(recorded_case_ids(run).size() == 2);
}

TEST_CASE("ingest reports a missing directory or sidecar") {
  Rig rig;
  TempDir images;
  CHECK(rig.pipeline.ingest_images(images.path(), images / "none.jsonl").empty());
  write_file_atomic(images / "x.png", make_labeled_png({"dog"}));
  CHECK_THROWS_AS(rig.pipeline.ingest_images(images.path(), images / "none.jsonl"), NotFoundError);
  CHECK_THROWS_AS(rig.pipeline.ingest_images(images / "nowhere", {}), NotFoundError);
}
