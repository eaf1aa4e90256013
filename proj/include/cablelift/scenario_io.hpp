#pragma once

#include "cablelift/scenario.hpp"

#include <filesystem>
#include <string>

namespace cablelift {

/// Parses a YAML scenario document. Throws Error(InvalidConfig) with the offending key.
Scenario parse_scenario(const std::string& yaml);
Scenario load_scenario(const std::filesystem::path& path);

std::string to_string(AllocationMode mode);
/// "baseline" or "qp". Throws Error(InvalidConfig).
AllocationMode parse_mode(const std::string& text);

}  // namespace cablelift
