#include "CLI11.hpp"
#include "cablelift/error.hpp"
#include "cablelift/harness.hpp"
#include "cablelift/qp_fixture.hpp"
#include "cablelift/scenario_io.hpp"
#include "cablelift/teleop_server.hpp"

#include <fmt/core.h>

#include <cstdlib>
#include <iostream>
#include <thread>

using namespace cablelift;

namespace {

void print_metrics(const std::string& label, const RunMetrics& m) {
  fmt::print("{:<9} samples {:>5}  pos err cm mean ({:.3f}, {:.3f}, {:.3f}) std ({:.3f}, {:.3f}, {:.3f})\n", label,
             m.samples, m.position_mean_cm.x(), m.position_mean_cm.y(), m.position_mean_cm.z(), m.position_std_cm.x(),
             m.position_std_cm.y(), m.position_std_cm.z());
  fmt::print("{:<9} rpy err deg mean ({:.3f}, {:.3f}, {:.3f})  min distance {:.4f} m at t={:.2f}  min clearance {:.3f}\n",
             "", m.orientation_mean_deg.x(), m.orientation_mean_deg.y(), m.orientation_mean_deg.z(), m.min_distance,
             m.min_distance_time, m.min_clearance);
  if (m.aborted) fmt::print("{:<9} ABORTED: {}\n", "", m.abort_reason);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cable-suspended payload transport simulator"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir, mode_text, fixture_path;
  std::optional<std::uint64_t> seed;
  bool no_plots = false;
  int every = 1, limit = 500, repeat = 3;

  auto* run_cmd = app.add_subcommand("run", "Closed-loop run of one scenario");
  run_cmd->add_option("scenario", scenario_path, "Scenario YAML")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--mode", mode_text, "baseline or qp (default: scenario)");
  run_cmd->add_option("--out", out_dir, "Output directory")->default_val("out/run");
  run_cmd->add_option("--seed", seed, "Override the scenario seed");
  run_cmd->add_flag("--no-plots", no_plots, "Skip PNG output");

  auto* cmp_cmd = app.add_subcommand("compare", "Baseline and QP runs from the same initial state");
  cmp_cmd->add_option("scenario", scenario_path, "Scenario YAML")->required()->check(CLI::ExistingFile);
  cmp_cmd->add_option("--out", out_dir, "Output directory")->default_val("out/compare");
  cmp_cmd->add_option("--seed", seed, "Override the scenario seed");
  cmp_cmd->add_flag("--no-plots", no_plots, "Skip PNG output");

  auto* dump_cmd = app.add_subcommand("dump-qp", "Record QP instances of a QP-cascade run as a fixture");
  dump_cmd->add_option("scenario", scenario_path, "Scenario YAML")->required()->check(CLI::ExistingFile);
  dump_cmd->add_option("--out", fixture_path, "Fixture JSON")->required();
  dump_cmd->add_option("--every", every, "Keep every k-th allocation")->default_val(1)->check(CLI::PositiveNumber);
  dump_cmd->add_option("--limit", limit, "Maximum recorded allocations")->default_val(500)->check(CLI::PositiveNumber);

  auto* bench_cmd = app.add_subcommand("bench-qp", "Cold vs warm-started solves over a fixture");
  bench_cmd->add_option("fixture", fixture_path, "Fixture JSON")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("--repeat", repeat, "Timing passes")->default_val(3)->check(CLI::PositiveNumber);

  int port = -1;
  double rate = 30.0, speed = 1.0;
  std::string address = "127.0.0.1";
  auto* serve_cmd = app.add_subcommand("serve", "Teleoperation session over WebSocket");
  serve_cmd->add_option("scenario", scenario_path, "Hover or teleop scenario YAML")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--port", port, "Listen port (default: $CABLELIFT_PORT or 8765)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--address", address, "Listen address")->default_val("127.0.0.1");
  serve_cmd->add_option("--rate", rate, "State frames per second")->default_val(30.0)->check(CLI::PositiveNumber);
  serve_cmd->add_option("--speed", speed, "Simulated seconds per wall-clock second")->default_val(1.0)->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      Scenario sc = load_scenario(scenario_path);
      if (seed) sc.seed = *seed;
      const AllocationMode mode = mode_text.empty() ? sc.allocation.mode : parse_mode(mode_text);
      const RunResult r = run(sc, mode);
      write_run(out_dir, sc, r, !no_plots);
      print_metrics(to_string(mode), r.metrics);
      fmt::print("wrote {}\n", out_dir);
      return r.metrics.aborted ? 2 : 0;
    }
    if (*cmp_cmd) {
      Scenario sc = load_scenario(scenario_path);
      if (seed) sc.seed = *seed;
      const CompareResult c = compare(sc);
      write_compare(out_dir, sc, c, !no_plots);
      print_metrics("baseline", c.baseline.metrics);
      print_metrics("qp", c.qp.metrics);
      fmt::print("collision: baseline {}  qp {}\n", c.report["runs"]["baseline"]["collision"].get<bool>(),
                 c.report["runs"]["qp"]["collision"].get<bool>());
      fmt::print("wrote {}\n", out_dir);
      return 0;
    }
    if (*dump_cmd) {
      const Scenario sc = load_scenario(scenario_path);
      const QpFixture f = record_fixture(sc, every, limit);
      save_fixture(fixture_path, f);
      for (const auto& s : f.sequences) fmt::print("{:<10} {} instances\n", s.name, s.problems.size());
      return 0;
    }
    if (*bench_cmd) {
      const QpFixture f = load_fixture(fixture_path);
      fmt::print("{:<10} {:>6} {:>12} {:>12} {:>10} {:>10} {:>5}\n", "sequence", "count", "cold us", "warm us",
                 "cold it", "warm it", "fail");
      for (const auto& b : bench_fixture(f, repeat)) {
        fmt::print("{:<10} {:>6} {:>12.2f} {:>12.2f} {:>10.1f} {:>10.1f} {:>5}\n", b.name, b.instances,
                   b.cold_median_us, b.warm_median_us, b.cold_median_iterations, b.warm_median_iterations,
                   b.failures);
      }
      return 0;
    }
    if (*serve_cmd) {
      const Scenario sc = load_scenario(scenario_path);
      teleop::Session session(sc, {.frame_rate = rate, .speed = speed});
      const auto listen = port >= 0 ? static_cast<unsigned short>(port) : teleop::port_from_env(8765);
      teleop::Server server(session, listen, address);
      fmt::print("serving {} on ws://{}:{} ({} Hz frames, speed {})\n", sc.name, address, server.port(), rate, speed);
      std::fflush(stdout);
      std::jthread owner([&session](std::stop_token st) { session.run(st); });
      server.run({}, true);
      owner.request_stop();
      fmt::print("stopped at t={:.2f} s\n", session.loop().time());
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
