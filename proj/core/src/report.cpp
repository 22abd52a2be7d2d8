#include "ode/report.hpp"

#include <array>
#include <cstdio>
#include <string_view>

#include <nlohmann/json.hpp>

#include "ode/error.hpp"

namespace ode {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 8> kColumns = {"chair",    "cover",     "hal",    "cog",
                                                      "accuracy", "precision", "recall", "f1"};
constexpr std::array<std::string_view, 8> kColors = {"#c0392b", "#27ae60", "#e67e22", "#8e44ad",
                                                     "#2980b9", "#16a085", "#7f8c8d", "#2c3e50"};

const json& criteria_of(const json& metrics) {
  if (!metrics.is_object() || !metrics.contains("criteria") || !metrics.at("criteria").is_object()) {
    throw ValidationError("metrics document has no 'criteria' object");
  }
  return metrics.at("criteria");
}

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

std::string report_csv(const json& metrics) {
  std::string out = "criterion";
  for (const auto c : kColumns) out += "," + std::string(c);
  out += "\n";
  for (const auto& [name, entry] : criteria_of(metrics).items()) {
    out += name;
    const json& headline = entry.at("headline");
    for (const auto c : kColumns) {
      out += ",";
      const auto it = headline.find(std::string(c));
      if (it != headline.end() && it->is_number()) out += fixed1(it->get<double>());
    }
    out += "\n";
  }
  return out;
}

std::string report_svg(const json& metrics) {
  const json& criteria = criteria_of(metrics);
  constexpr int bar = 10, gap = 24, plot_h = 200, top = 30, left = 40;
  const int group = static_cast<int>(kColumns.size()) * bar;
  const int width = left + static_cast<int>(criteria.size()) * (group + gap) + 120;
  const int height = top + plot_h + 40;

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
                    "\" height=\"" + std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  svg += "<line x1=\"" + std::to_string(left) + "\" y1=\"" + std::to_string(top + plot_h) + "\" x2=\"" +
         std::to_string(width - 120) + "\" y2=\"" + std::to_string(top + plot_h) + "\" stroke=\"black\"/>\n";
  int x = left + gap / 2;
  for (const auto& [name, entry] : criteria.items()) {
    const json& headline = entry.at("headline");
    for (std::size_t i = 0; i < kColumns.size(); ++i) {
      const auto it = headline.find(std::string(kColumns[i]));
      const double v = it != headline.end() && it->is_number() ? it->get<double>() : 0.0;
      const int h = static_cast<int>(v / 100.0 * plot_h + 0.5);
      svg += "<rect x=\"" + std::to_string(x + static_cast<int>(i) * bar) + "\" y=\"" +
             std::to_string(top + plot_h - h) + "\" width=\"" + std::to_string(bar - 1) +
             "\" height=\"" + std::to_string(h) + "\" fill=\"" + std::string(kColors[i]) +
             "\"><title>" + name + " " + std::string(kColumns[i]) + " " + fixed1(v) +
             "</title></rect>\n";
    }
    svg += "<text x=\"" + std::to_string(x + group / 2) + "\" y=\"" + std::to_string(top + plot_h + 14) +
           "\" text-anchor=\"middle\">" + name + "</text>\n";
    x += group + gap;
  }
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    const int y = top + static_cast<int>(i) * 14;
    svg += "<rect x=\"" + std::to_string(width - 110) + "\" y=\"" + std::to_string(y) +
           "\" width=\"10\" height=\"10\" fill=\"" + std::string(kColors[i]) + "\"/>";
    svg += "<text x=\"" + std::to_string(width - 95) + "\" y=\"" + std::to_string(y + 9) + "\">" +
           std::string(kColumns[i]) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace ode
