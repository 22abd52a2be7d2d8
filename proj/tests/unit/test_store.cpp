#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "ode/error.hpp"
#include "ode/hashing.hpp"
#include "ode/mock_services.hpp"
#include "ode/store.hpp"

using namespace ode;
using ode::testing::make_case;
using ode::testing::TempDir;
namespace fs = std::filesystem;

TEST_CASE("images are content-addressed and idempotent") {
  TempDir dir;
  Store store(dir.path());
  const Bytes png = make_labeled_png({"dog"});
  const auto ref = store.put_image(png);
  CHECK(ref == content_hash(png));
  CHECK(ref.size() == 32);
  const auto stamp = fs::last_write_time(store.images_dir() / (ref + ".png"));
  CHECK(store.put_image(png) == ref);
  CHECK(fs::last_write_time(store.images_dir() / (ref + ".png")) == stamp);
  CHECK(store.get_image(ref) == png);
  CHECK(store.has_image(ref));
  CHECK_FALSE(store.has_image("../../etc/passwd"));
  CHECK_THROWS_AS(store.get_image("not-a-ref"), ValidationError);
}

TEST_CASE("truncated or foreign bytes are refused") {
  TempDir dir;
  Store store(dir.path());
  const Bytes png = make_labeled_png({"dog"});
  CHECK_THROWS_AS(store.put_image(png.substr(0, png.size() / 2)), ValidationError);
  CHECK_THROWS_AS(store.put_image("GIF89a"), ValidationError);
  const bool empty = !fs::exists(store.images_dir()) || fs::is_empty(store.images_dir());
  CHECK(empty);
}

TEST_CASE("cache entries round-trip and count hits") {
  TempDir dir;
  Store store(dir.path());
  const std::string key = content_hash("k");
  CHECK_FALSE(store.lookup(key));
  store.store(key, R"({"x":1})");
  CHECK(store.lookup(key) == std::string(R"({"x":1})"));
  CHECK(store.cache_hits() == 1);
  CHECK(store.cache_misses() == 1);
  CHECK_THROWS_AS(store.store("../x", "{}"), ValidationError);
}

TEST_CASE("run ids are validated") {
  TempDir dir;
  Store store(dir.path());
  CHECK(fs::is_directory(store.run("abc").dir));
  for (const char* bad : {"", ".", "..", "a/b"}) CHECK_THROWS_AS(store.run(bad), ValidationError);
}

TEST_CASE("atomic append keeps the existing prefix") {
  TempDir dir;
  const auto path = dir / "log.jsonl";
  CHECK(read_lines(path).empty());
  append_lines_atomic(path, {"one", "two"});
  const std::string before = read_file(path);
  append_lines_atomic(path, {"three"});
  const std::string after = read_file(path);
  CHECK(after.substr(0, before.size()) == before);
  CHECK(read_lines(path) == std::vector<std::string>{"one", "two", "three"});
  write_file_atomic(path, "x");
  CHECK(read_file(path) == "x");
  for (const auto& entry : fs::directory_iterator(dir.path())) {
    CHECK(entry.path().filename() == "log.jsonl");
  }
}

TEST_CASE("manifests round-trip and check their counts") {
  RunManifest m;
  m.run_id = "r1";
  m.config = {{"k", 2}};
  m.seeds = {{"batch", 7}};
  m.sampler_algorithm = "mt19937_64";
  m.synonym_table_version = "ode-synonyms/v1";
  m.criteria["common"] = CriterionCounts{2, 2, false, 4, 3, 1, 0};
  m.criteria["fictional"] = CriterionCounts{2, 0, true, 0, 0, 0, 0};
  m.created_at = utc_timestamp();
  CHECK(m.counts_consistent());
  const auto back = manifest_from_json(to_json(m));
  CHECK(to_json(back) == to_json(m));
  CHECK(back.criteria.at("fictional").exhausted);
  CHECK(m.totals().attempted == 4);

  auto broken = to_json(m);
  broken["criteria"]["common"]["accepted"] = 4;
  CHECK_THROWS_AS(manifest_from_json(broken), ValidationError);
  CHECK(m.created_at.size() == 20);
  CHECK(m.created_at.back() == 'Z');
}

TEST_CASE("cases persist through cases.jsonl") {
  TempDir dir;
  Store store(dir.path());
  const auto run = store.run("r");
  const auto c1 = make_case("dog", "frisbee", Criterion::common, {"dog", "frisbee"}, {"grass"},
                            content_hash("img1"));
  const auto c2 = make_case("car", "dog", Criterion::random, {"car", "dog"}, {}, content_hash("img2"), 5);
  append_lines_atomic(run.cases(), {to_json(c1).dump(), to_json(c2).dump()});
  const auto loaded = load_cases(run);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0] == c1);
  CHECK(loaded[1] == c2);

  auto tampered = to_json(c1);
  tampered["truth"] = nlohmann::json::array({"dog"});
  append_lines_atomic(run.cases(), {tampered.dump()});
  CHECK_THROWS_AS(load_cases(run), ValidationError);
}

TEST_CASE("SFT export emits one pair per question") {
  const auto c = make_case("dog", "frisbee", Criterion::common, {"dog", "frisbee"}, {"car"},
                           content_hash("img"));
  const auto lines = export_sft({c}, {Criterion::common});
  REQUIRE(lines.size() == 4);
  const auto first = nlohmann::json::parse(lines[0]);
  CHECK(first["prompt"] == "Please describe this image.");
  CHECK(first["response"] == "The image shows dog, frisbee.");
  CHECK(first["criterion"] == "common");
  CHECK(first["image"] == c.image_ref);
  CHECK(nlohmann::json::parse(lines[1])["response"] == "Yes.");
  CHECK(nlohmann::json::parse(lines[2])["response"] == "Yes.");
  CHECK(nlohmann::json::parse(lines[3])["prompt"] == "Is there a car in the image?");
  CHECK(nlohmann::json::parse(lines[3])["response"] == "No.");

  CHECK_THROWS_AS(export_sft({c}, {}), ValidationError);
  CHECK_THROWS_AS(export_sft({c}, {Criterion::fictional}), NotFoundError);
}

TEST_CASE("request log appends JSON lines") {
  TempDir dir;
  FileRequestLog log(dir / "requests.jsonl");
  log.record({{"path", "/v1/query"}});
  log.record({{"path", "/v1/detect"}});
  const auto lines = read_lines(dir / "requests.jsonl");
  REQUIRE(lines.size() == 2);
  CHECK(nlohmann::json::parse(lines[1])["path"] == "/v1/detect");
}
