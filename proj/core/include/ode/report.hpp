#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

namespace ode {

/// One row per criterion: criterion,chair,cover,hal,cog,accuracy,precision,recall,f1.
/// Missing values are left empty.
std::string report_csv(const nlohmann::json& metrics);

/// Grouped bar chart of the headline percentages per criterion.
std::string report_svg(const nlohmann::json& metrics);

}  // namespace ode
