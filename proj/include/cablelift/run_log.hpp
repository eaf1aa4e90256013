#pragma once

#include "cablelift/closed_loop.hpp"

#include "json.hpp"

#include <iosfwd>
#include <string>

namespace cablelift {

inline constexpr int kLogSchemaVersion = 1;

using Json = nlohmann::json;

Json to_json(const Vec3& v);
/// Deterministic tick record: no wall-clock quantities.
Json tick_to_json(const TickRecord& rec);
Json metrics_to_json(const RunMetrics& m);
/// Wall-clock timing statistics, kept apart from the deterministic fields.
Json timing_to_json(const RunMetrics& m);

std::string csv_header(std::size_t robots);
std::string csv_row(const TickRecord& rec);

}  // namespace cablelift
