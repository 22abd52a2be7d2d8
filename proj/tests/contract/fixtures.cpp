// Writes the exact bodies the client sends and the mocks return, one JSON
// document per file, named <endpoint>.<request|response|error>.<n>.json.

#include <cstdio>
#include <filesystem>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "ode/concept_graph.hpp"
#include "ode/mock_services.hpp"
#include "ode/prompts.hpp"
#include "ode/sampler.hpp"
#include "ode/services.hpp"
#include "ode/store.hpp"

using namespace ode;
using nlohmann::json;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <out-dir>\n", argv[0]);
    return 64;
  }
  const fs::path out = argv[1];
  fs::create_directories(out);
  int written = 0;
  const auto emit = [&](const std::string& name, const std::string& body) {
    write_file_atomic(out / (name + "." + std::to_string(written++) + ".json"), body);
  };

  ConceptGraph graph;
  for (const char* label : {"dog", "frisbee", "hot_dog", "traffic_light"}) {
    graph.add_concept(Concept{label, Level::entity});
  }
  graph.add_concept(Concept{"grass", Level::environment});
  graph.add_weight("dog", "frisbee", 3);
  const std::vector<std::string> vocab = graph.labels();

  const MockTxt2Img t2i;
  const MockDetector detector(MockDetectorOptions{0.8, 0.5, 1});
  const std::vector<std::pair<std::string, std::string>> pairs{
      {"dog", "frisbee"}, {"grass", "hot_dog"}, {"dog", "traffic_light"}};
  for (const auto& [a, b] : pairs) {
    for (const Style style : {Style::photo, Style::anime}) {
      const auto spec = image_prompt(make_pair(graph, a, b, Criterion::random), style, 0xfedcba9876543210ULL);
      const std::string request = txt2img_request(spec, 512, 384).dump();
      emit("txt2img.request", request);
      const WireResponse image = t2i.handle(request);
      emit("txt2img.response", image.body);

      const Bytes png = base64_decode(json::parse(image.body).at("image_png_base64").get<std::string>());
      for (const double threshold : {0.0, 0.5, 1.0}) {
        const std::string det_request = detect_request(png, vocab, threshold).dump();
        emit("detect.request", det_request);
        emit("detect.response", detector.handle(det_request).body);
      }
      for (const char* script : {"truthful", "always_yes", "always_no", "refuser", "add_one_hallucination"}) {
        const MockModel model(mock_script_from_string(script), vocab);
        const std::set<std::string> targets =
            a == "dog" ? std::set<std::string>{"grass"} : std::set<std::string>{"frisbee"};
        for (const auto& question : question_set({a, b}, targets)) {
          const std::string q_request = query_request(png, question.text).dump();
          emit("query.request", q_request);
          emit("query.response", model.handle(q_request).body);
        }
      }
    }
  }

  // Rejections the mocks produce for malformed bodies.
  emit("error", t2i.handle("not json").body);
  emit("error", detector.handle(R"({"vocabulary":[]})").body);
  emit("error", MockModel(MockScript::truthful, vocab).handle("{}").body);

  std::printf("wrote %d fixtures to %s\n", written, out.string().c_str());
  return 0;
}
