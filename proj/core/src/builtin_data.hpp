#pragma once

#include <string_view>

// Shipped data tables, embedded at configure time from core/data/*.json.
namespace hazeval::detail {

std::string_view builtin_hazard_locations_json();
std::string_view builtin_professions_json();
std::string_view builtin_infrastructure_json();
std::string_view builtin_templates_json();

}  // namespace hazeval::detail
