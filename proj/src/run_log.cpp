#include "cablelift/run_log.hpp"

#include <fmt/format.h>

namespace cablelift {

namespace {

Json vec_list(const std::vector<Vec3>& vs) {
  Json out = Json::array();
  for (const auto& v : vs) out.push_back(to_json(v));
  return out;
}

Json stat_json(const Stat& s) { return Json{{"mean", s.mean}, {"std", s.std}}; }

Json array3(const Eigen::Array3d& a) { return Json::array({a[0], a[1], a[2]}); }

// Non-finite doubles become null in JSON; keep min distances explicit instead.
Json finite_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

}  // namespace

Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json tick_to_json(const TickRecord& r) {
  return Json{
      {"tick", r.tick},
      {"t", r.t},
      {"ref", {{"p", to_json(r.ref.p0r)}, {"v", to_json(r.ref.dp0r)}, {"a", to_json(r.ref.ddp0r)}}},
      {"p0", to_json(r.p0)},
      {"v0", to_json(r.v0)},
      {"rpy0", to_json(r.rpy0)},
      {"err_p", to_json(r.position_error)},
      {"err_rpy", to_json(r.orientation_error)},
      {"robots", vec_list(r.robots)},
      {"q", vec_list(r.q)},
      {"mu", vec_list(r.mu)},
      {"thrust", r.thrust},
      {"min_distance", r.min_distance},
      {"min_clearance", r.min_clearance},
      {"saturated", r.saturated},
      {"allocated", r.allocated},
      {"held", r.held},
      {"qp_iterations", r.qp_iterations},
      {"active_halfspaces", r.active_halfspaces},
      {"preset", r.preset},
  };
}

Json metrics_to_json(const RunMetrics& m) {
  return Json{
      {"samples", m.samples},
      {"position_error_cm", {{"mean", array3(m.position_mean_cm)}, {"std", array3(m.position_std_cm)}}},
      {"orientation_error_deg", {{"mean", array3(m.orientation_mean_deg)}, {"std", array3(m.orientation_std_deg)}}},
      {"min_distance_m", finite_or_null(m.min_distance)},
      {"min_distance_time_s", m.min_distance_time},
      {"min_clearance", finite_or_null(m.min_clearance)},
      {"saturation_count", m.saturation_count},
      {"infeasibility_count", m.infeasibility_count},
      {"allocations", m.allocations},
      {"simulated_s", m.simulated_seconds},
      {"aborted", m.aborted},
      {"abort_reason", m.abort_reason},
  };
}

Json timing_to_json(const RunMetrics& m) {
  return Json{{"qp_fd_ms", stat_json(m.fd_ms)},     {"qp_svm_ms", stat_json(m.svm_ms)},
              {"tilt_ms", stat_json(m.tilt_ms)},    {"qp_mu_ms", stat_json(m.mu_ms)},
              {"total_ms", stat_json(m.total_ms)}};
}

std::string csv_header(std::size_t robots) {
  std::string h =
      "tick,t,ref_x,ref_y,ref_z,p0_x,p0_y,p0_z,err_x,err_y,err_z,err_roll,err_pitch,err_yaw,"
      "min_distance,min_clearance,saturated,held,qp_iterations";
  for (std::size_t i = 0; i < robots; ++i) h += fmt::format(",r{0}_x,r{0}_y,r{0}_z", i);
  return h;
}

std::string csv_row(const TickRecord& r) {
  std::string row = fmt::format("{},{}", r.tick, r.t);
  auto add = [&row](double x) { row += fmt::format(",{}", x); };
  for (int k = 0; k < 3; ++k) add(r.ref.p0r[k]);
  for (int k = 0; k < 3; ++k) add(r.p0[k]);
  for (int k = 0; k < 3; ++k) add(r.position_error[k]);
  for (int k = 0; k < 3; ++k) add(r.orientation_error[k]);
  add(r.min_distance);
  add(r.min_clearance);
  row += fmt::format(",{},{},{}", r.saturated, r.held ? 1 : 0, r.qp_iterations);
  for (const auto& p : r.robots)
    for (int k = 0; k < 3; ++k) add(p[k]);
  return row;
}

}  // namespace cablelift
