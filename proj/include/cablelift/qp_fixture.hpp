#pragma once

#include "cablelift/qp.hpp"
#include "cablelift/run_log.hpp"
#include "cablelift/scenario.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace cablelift {

/// Sequences of QP instances with fixed shape, as solved by one family over a run.
struct QpFixture {
  struct Sequence {
    std::string name;
    std::vector<qp::Problem<double>> problems;
  };
  std::string source;
  std::vector<Sequence> sequences;
};

/// Infinite bounds are stored as null.
Json fixture_to_json(const QpFixture& fixture);
/// Throws Error(BadData) on malformed or inconsistent input.
QpFixture fixture_from_json(const Json& j);
QpFixture load_fixture(const std::filesystem::path& path);
void save_fixture(const std::filesystem::path& path, const QpFixture& fixture);

/// Captures every `every`-th allocation of a QP-cascade run of the scenario.
QpFixture record_fixture(const Scenario& scenario, int every = 1, int max_instances = 500);

struct SequenceBench {
  std::string name;
  std::size_t instances = 0;
  double cold_median_us = 0.0;
  double warm_median_us = 0.0;
  double cold_median_iterations = 0.0;
  double warm_median_iterations = 0.0;
  std::size_t failures = 0;
};

/// Solves each sequence cold (fresh family per instance) and warm (one family across
/// the sequence). Timings are medians over `repeat` passes.
std::vector<SequenceBench> bench_fixture(const QpFixture& fixture, int repeat = 3,
                                         const qp::Settings<double>& settings = {});

double median(std::vector<double> v);

}  // namespace cablelift
