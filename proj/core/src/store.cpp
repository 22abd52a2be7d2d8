#include "ode/store.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "ode/error.hpp"
#include "ode/png.hpp"

namespace fs = std::filesystem;

namespace ode {

using nlohmann::json;

namespace {

std::string temp_suffix() {
  static std::atomic<std::uint64_t> counter{0};
  std::ostringstream out;
  out << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "."
      << counter.fetch_add(1);
  return out.str();
}

bool is_hex_ref(std::string_view ref) {
  return ref.size() == 32 && std::all_of(ref.begin(), ref.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!fs::exists(path)) throw NotFoundError("file not found: " + path.string());
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path temp = path.string() + temp_suffix();
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + temp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to " + temp.string());
  }
  std::error_code ec;
  fs::rename(temp, path, ec);
  if (ec) {
    fs::remove(temp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

void append_lines_atomic(const fs::path& path, const std::vector<std::string>& lines) {
  if (lines.empty()) return;
  std::string content = fs::exists(path) ? read_file(path) : std::string();
  if (!content.empty() && content.back() != '\n') content.push_back('\n');
  for (const auto& line : lines) {
    content.append(line);
    content.push_back('\n');
  }
  write_file_atomic(path, content);
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::vector<std::string> out;
  if (!fs::exists(path)) return out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

Store::Store(fs::path root) : root_(std::move(root)) {
  fs::create_directories(images_dir());
  fs::create_directories(cache_dir());
  fs::create_directories(root_ / "runs");
}

std::string Store::put_image(std::string_view png) {
  try {
    inspect_png(png);
  } catch (const ParseError& e) {
    throw ValidationError(std::string("refusing to store undecodable PNG: ") + e.what());
  }
  const std::string ref = content_hash(png);
  const fs::path target = images_dir() / (ref + ".png");
  if (!fs::exists(target)) write_file_atomic(target, png);
  return ref;
}

Bytes Store::get_image(const std::string& image_ref) const {
  if (!is_hex_ref(image_ref)) throw ValidationError("malformed image ref '" + image_ref + "'");
  return read_file(images_dir() / (image_ref + ".png"));
}

bool Store::has_image(const std::string& image_ref) const {
  return is_hex_ref(image_ref) && fs::exists(images_dir() / (image_ref + ".png"));
}

std::optional<std::string> Store::lookup(const std::string& key) {
  const fs::path path = cache_dir() / (key + ".json");
  if (!is_hex_ref(key) || !fs::exists(path)) {
    ++misses_;
    return std::nullopt;
  }
  ++hits_;
  return read_file(path);
}

void Store::store(const std::string& key, const std::string& value) {
  if (!is_hex_ref(key)) throw ValidationError("malformed cache key '" + key + "'");
  write_file_atomic(cache_dir() / (key + ".json"), value);
}

RunPaths Store::run(const std::string& run_id) const {
  if (run_id.empty() || run_id.find_first_of("/\\") != std::string::npos || run_id == "." ||
      run_id == "..") {
    throw ValidationError("invalid run id '" + run_id + "'");
  }
  RunPaths paths{root_ / "runs" / run_id};
  fs::create_directories(paths.dir);
  return paths;
}

void FileRequestLog::record(const json& entry) {
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to " + path_.string());
  out << entry.dump() << '\n';
}

bool RunManifest::counts_consistent() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const auto& entry) {
    const auto& c = entry.second;
    return c.attempted == c.accepted + c.filtered + c.errored;
  });
}

CriterionCounts RunManifest::totals() const {
  CriterionCounts total;
  for (const auto& [name, c] : criteria) {
    total.requested_k += c.requested_k;
    total.sampled += c.sampled;
    total.exhausted = total.exhausted || c.exhausted;
    total.attempted += c.attempted;
    total.accepted += c.accepted;
    total.filtered += c.filtered;
    total.errored += c.errored;
  }
  return total;
}

json to_json(const RunManifest& m) {
  json criteria = json::object();
  for (const auto& [name, c] : m.criteria) {
    criteria[name] = json{{"accepted", c.accepted},   {"attempted", c.attempted},
                          {"errored", c.errored},     {"exhausted", c.exhausted},
                          {"filtered", c.filtered},   {"requested_k", c.requested_k},
                          {"sampled", c.sampled}};
  }
  return json{{"config", m.config},
              {"created_at", m.created_at},
              {"criteria", criteria},
              {"format_version", 1},
              {"run_id", m.run_id},
              {"sampler_algorithm", m.sampler_algorithm},
              {"seeds", m.seeds},
              {"synonym_table_version", m.synonym_table_version},
              {"templates", m.templates},
              {"tool_version", m.tool_version}};
}

RunManifest manifest_from_json(const json& doc) {
  RunManifest m;
  try {
    m.run_id = doc.at("run_id").get<std::string>();
    m.tool_version = doc.at("tool_version").get<std::string>();
    m.config = doc.at("config");
    m.seeds = doc.at("seeds");
    m.sampler_algorithm = doc.at("sampler_algorithm").get<std::string>();
    m.templates = doc.at("templates");
    m.synonym_table_version = doc.at("synonym_table_version").get<std::string>();
    m.created_at = doc.value("created_at", std::string());
    for (const auto& [name, c] : doc.at("criteria").items()) {
      m.criteria[name] = CriterionCounts{
          c.at("requested_k").get<std::size_t>(), c.at("sampled").get<std::size_t>(),
          c.at("exhausted").get<bool>(),          c.at("attempted").get<std::size_t>(),
          c.at("accepted").get<std::size_t>(),    c.at("filtered").get<std::size_t>(),
          c.at("errored").get<std::size_t>()};
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
  if (!m.counts_consistent()) throw ValidationError("manifest counts are inconsistent");
  return m;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

std::vector<TestCase> load_cases(const RunPaths& run, const PromptTemplates& templates) {
  std::vector<TestCase> out;
  std::size_t line_number = 0;
  for (const auto& line : read_lines(run.cases())) {
    ++line_number;
    const json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded()) {
      throw ParseError(run.cases().string() + ": line " + std::to_string(line_number) +
                           " is not valid JSON",
                       0);
    }
    out.push_back(test_case_from_json(doc, templates));
  }
  return out;
}

std::vector<FilteredRecord> load_filtered(const RunPaths& run) {
  std::vector<FilteredRecord> out;
  for (const auto& line : read_lines(run.filtered())) {
    out.push_back(filtered_record_from_json(json::parse(line)));
  }
  return out;
}

std::vector<std::string> export_sft(const std::vector<TestCase>& cases,
                                    const std::set<Criterion>& criteria) {
  if (criteria.empty()) throw ValidationError("export-sft needs at least one criterion");
  std::vector<const TestCase*> selected;
  for (const auto& c : cases) {
    if (criteria.count(c.pair.criterion)) selected.push_back(&c);
  }
  if (selected.empty()) throw NotFoundError("no accepted cases match the requested criteria");
  std::sort(selected.begin(), selected.end(),
            [](const TestCase* x, const TestCase* y) { return x->case_id < y->case_id; });

  std::vector<std::string> lines;
  for (const TestCase* c : selected) {
    const std::string criterion(to_string(c->pair.criterion));
    for (const auto& q : c->questions) {
      std::string response;
      if (q.kind == QuestionKind::generative) {
        response = std::string(kSftCaptionPrefix);
        bool first = true;
        for (const auto& label : c->truth) {  // std::set: already sorted
          if (!first) response += ", ";
          response += label;
          first = false;
        }
        response += ".";
      } else {
        response = q.ground_truth == GroundTruth::yes ? "Yes." : "No.";
      }
      lines.push_back(json{{"criterion", criterion},
                           {"image", c->image_ref},
                           {"prompt", q.text},
                           {"response", response}}
                          .dump());
    }
  }
  return lines;
}

}  // namespace ode
