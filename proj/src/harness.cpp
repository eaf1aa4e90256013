#include "cablelift/harness.hpp"

#include "cablelift/error.hpp"
#include "cablelift/plot.hpp"
#include "cablelift/scenario_io.hpp"

#include <fstream>

namespace cablelift {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write " + path.string());
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

std::vector<double> column(const std::vector<TickRecord>& recs, const std::function<double(const TickRecord&)>& f) {
  std::vector<double> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back(f(r));
  return out;
}

plot::Figure figure(std::string title, std::string xlabel, std::string ylabel) {
  plot::Figure f;
  f.title = std::move(title);
  f.xlabel = std::move(xlabel);
  f.ylabel = std::move(ylabel);
  return f;
}

std::vector<plot::HLine> distance_lines(const Rig& rig) {
  const double s = min_radius_sum(rig);
  return {{"R_I+R_J", s, plot::kRed}, {"0.9(R_I+R_J)", 0.9 * s, plot::kOrange}};
}

void write_plots(const std::filesystem::path& dir, const Scenario& sc, const RunResult& res) {
  const auto& recs = res.records;
  if (recs.empty()) return;
  const auto t = column(recs, [](const TickRecord& r) { return r.t; });
  const std::string tag = sc.name + " " + to_string(res.mode);

  plot::Figure xy = figure(tag + " XY", "X (M)", "Y (M)");
  xy.equal_aspect = true;
  xy.series.push_back({"REF", column(recs, [](auto& r) { return r.ref.p0r.x(); }),
                       column(recs, [](auto& r) { return r.ref.p0r.y(); }), plot::kGrey, true});
  xy.series.push_back({"PAYLOAD", column(recs, [](auto& r) { return r.p0.x(); }),
                       column(recs, [](auto& r) { return r.p0.y(); }), plot::kBlue});
  const plot::Color robot_colors[] = {plot::kOrange, plot::kGreen, plot::kPurple, plot::kRed};
  for (std::size_t i = 0; i < sc.rig.size(); ++i) {
    xy.series.push_back({"ROBOT " + std::to_string(i), column(recs, [i](auto& r) { return r.robots[i].x(); }),
                         column(recs, [i](auto& r) { return r.robots[i].y(); }), robot_colors[i % 4]});
  }
  plot::save(xy, dir / "xy.png");

  plot::Figure err = figure(tag + " POSITION ERROR", "T (S)", "ERROR (CM)");
  const char* axes[] = {"X", "Y", "Z"};
  const plot::Color axis_colors[] = {plot::kBlue, plot::kOrange, plot::kGreen};
  for (int k = 0; k < 3; ++k)
    err.series.push_back({axes[k], t, column(recs, [k](auto& r) { return 100.0 * r.position_error[k]; }),
                          axis_colors[k]});
  plot::save(err, dir / "position_error.png");

  if (sc.rig.payload.rigid()) {
    plot::Figure ori = figure(tag + " ORIENTATION ERROR", "T (S)", "ERROR (DEG)");
    const char* names[] = {"ROLL", "PITCH", "YAW"};
    for (int k = 0; k < 3; ++k)
      ori.series.push_back({names[k], t,
                            column(recs, [k](auto& r) { return r.orientation_error[k] * 180.0 / std::numbers::pi; }),
                            axis_colors[k]});
    plot::save(ori, dir / "orientation_error.png");
  }

  plot::Figure dist = figure(tag + " MIN ROBOT DISTANCE", "T (S)", "DISTANCE (M)");
  dist.series.push_back({"MIN DISTANCE", t, column(recs, [](auto& r) { return r.min_distance; }), plot::kBlue});
  dist.hlines = distance_lines(sc.rig);
  plot::save(dist, dir / "min_distance.png");
}

void apply(const TeleopCommand& c, ClosedLoop& loop, VelocityReference& vr, const TrajectorySpec& spec) {
  switch (c.kind) {
    case CommandKind::Velocity:
      vr.command_velocity(c.value);
      break;
    case CommandKind::Nudge:
      vr.nudge(c.value);
      break;
    case CommandKind::Preset:
      loop.set_preset(c.preset);
      break;
    case CommandKind::Pause:
      vr.hold();
      break;
    case CommandKind::Reset:
      loop.reset();
      vr.reset(spec.center);
      break;
  }
}

}  // namespace

double min_radius_sum(const Rig& rig) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rig.size(); ++i)
    for (std::size_t j = i + 1; j < rig.size(); ++j)
      best = std::min(best, rig.robots[i].safety_radius + rig.robots[j].safety_radius);
  return best;
}

ScriptedTeleop::ScriptedTeleop(const TrajectorySpec& spec, ClosedLoop& loop)
    : spec_(spec), loop_(loop), vr_(loop.initial_reference().p0r, spec.limits) {}

ReferenceSetpoint ScriptedTeleop::reference(double t) {
  while (next_ < spec_.commands.size() && spec_.commands[next_].t <= t + 1e-9) {
    apply(spec_.commands[next_].command, loop_, vr_, spec_);
    ++next_;
  }
  ReferenceSetpoint ref = vr_.advance(loop_.scenario().control_dt());
  apply_yaw_ramp(ref, t, spec_.yaw_rate);
  return ref;
}

RunResult run(const Scenario& scenario, AllocationMode mode, const RunOptions& options) {
  RunResult res;
  res.scenario = scenario.name;
  res.mode = mode;
  res.seed = scenario.seed;
  MetricsAccumulator acc(scenario.metrics_start);
  ClosedLoop loop(scenario, mode);
  std::optional<ScriptedTeleop> script;
  if (scenario.trajectory.kind == TrajectoryKind::TeleopLog) script.emplace(scenario.trajectory, loop);

  const auto ticks = static_cast<std::int64_t>(std::llround(scenario.duration / scenario.control_dt()));
  try {
    while (loop.tick() < ticks) {
      const double t = loop.time();
      const ReferenceSetpoint ref = script ? script->reference(t) : scripted_reference(scenario.trajectory, t);
      const TickRecord& rec = loop.advance(ref);
      acc.add(rec);
      if (options.keep_records) res.records.push_back(rec);
      if (options.on_tick) options.on_tick(rec, loop);
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AbortedRun) throw;
    // The tick that tripped the hard floor is still part of the record.
    if (loop.last().tick == loop.tick() - 1 && (res.records.empty() || res.records.back().tick != loop.last().tick)) {
      acc.add(loop.last());
      if (options.keep_records) res.records.push_back(loop.last());
    }
    acc.abort(e.what(), loop.time());
  }
  res.metrics = acc.finish();
  return res;
}

RunResult run(const Scenario& scenario, const RunOptions& options) {
  return run(scenario, scenario.allocation.mode, options);
}

Json summary_json(const Scenario& sc, const RunResult& r, bool include_timing) {
  Json j{{"schema", kLogSchemaVersion},
         {"kind", "run"},
         {"scenario", sc.name},
         {"mode", to_string(r.mode)},
         {"seed", r.seed},
         {"robots", sc.rig.size()},
         {"payload", sc.rig.payload.rigid() ? "rigid_body" : "point_mass"},
         {"duration_s", sc.duration},
         {"min_radius_sum_m", min_radius_sum(sc.rig)},
         {"metrics", metrics_to_json(r.metrics)}};
  if (include_timing) j["timing"] = timing_to_json(r.metrics);
  return j;
}

Json compare_report(const Scenario& sc, const RunResult& b, const RunResult& q) {
  const double s = min_radius_sum(sc.rig);
  auto run_entry = [&](const RunResult& r) {
    return Json{{"metrics", metrics_to_json(r.metrics)},
                {"collision", r.metrics.min_clearance < 1.0},
                {"clearance_ok", r.metrics.min_clearance >= 0.9}};
  };
  Json trace{{"t", Json::array()}, {"baseline", Json::array()}, {"qp", Json::array()}};
  double deviation = 0.0;
  const std::size_t common = std::min(b.records.size(), q.records.size());
  for (std::size_t k = 0; k < std::max(b.records.size(), q.records.size()); ++k) {
    const auto& r = k < q.records.size() ? q.records[k] : b.records[k];
    trace["t"].push_back(r.t);
    trace["baseline"].push_back(k < b.records.size() ? Json(b.records[k].min_distance) : Json(nullptr));
    trace["qp"].push_back(k < q.records.size() ? Json(q.records[k].min_distance) : Json(nullptr));
    if (k < common) deviation = std::max(deviation, (b.records[k].p0 - q.records[k].p0).norm());
  }
  return Json{{"schema", kLogSchemaVersion},
              {"kind", "compare"},
              {"scenario", sc.name},
              {"seed", sc.seed},
              {"min_radius_sum_m", s},
              {"runs", {{"baseline", run_entry(b)}, {"qp", run_entry(q)}}},
              {"common_ticks", common},
              {"payload_deviation_max_m", deviation},
              {"min_distance_trace", trace}};
}

CompareResult compare(const Scenario& scenario) {
  CompareResult out;
  out.baseline = run(scenario, AllocationMode::Baseline);
  out.qp = run(scenario, AllocationMode::QpCascade);
  out.report = compare_report(scenario, out.baseline, out.qp);
  return out;
}

void write_run(const std::filesystem::path& dir, const Scenario& sc, const RunResult& r, bool plots) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "ticks.jsonl");
    for (const auto& rec : r.records) out << tick_to_json(rec).dump() << '\n';
  }
  {
    auto out = open_out(dir / "ticks.csv");
    out << csv_header(sc.rig.size()) << '\n';
    for (const auto& rec : r.records) out << csv_row(rec) << '\n';
  }
  write_text(dir / "summary.json", summary_json(sc, r).dump(2) + "\n");
  if (plots) write_plots(dir, sc, r);
}

void write_compare(const std::filesystem::path& dir, const Scenario& sc, const CompareResult& c, bool plots) {
  std::filesystem::create_directories(dir);
  write_run(dir / "baseline", sc, c.baseline, plots);
  write_run(dir / "qp", sc, c.qp, plots);
  write_text(dir / "report.json", c.report.dump(2) + "\n");
  if (!plots) return;
  plot::Figure fig = figure(sc.name + " MIN ROBOT DISTANCE", "T (S)", "DISTANCE (M)");
  fig.series.push_back({"BASELINE", column(c.baseline.records, [](auto& r) { return r.t; }),
                        column(c.baseline.records, [](auto& r) { return r.min_distance; }), plot::kRed});
  fig.series.push_back({"QP", column(c.qp.records, [](auto& r) { return r.t; }),
                        column(c.qp.records, [](auto& r) { return r.min_distance; }), plot::kBlue});
  fig.hlines = distance_lines(sc.rig);
  fig.hlines[0].color = plot::kBlack;
  plot::save(fig, dir / "min_distance.png");
}

}  // namespace cablelift
