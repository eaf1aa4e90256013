#include "cablelift/qp_fixture.hpp"

#include "cablelift/error.hpp"
#include "cablelift/harness.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>

namespace cablelift {

namespace {

using Clock = std::chrono::steady_clock;

Json matrix_json(const MatX& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Json vector_json(const VecX& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(std::isfinite(v[k]) ? Json(v[k]) : Json(nullptr));
  return out;
}

MatX matrix_from(const Json& j, Eigen::Index cols_hint, const char* what) {
  if (!j.is_array()) throw Error(ErrorCode::BadData, std::string(what) + " must be a list of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : cols_hint;
  MatX m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != cols)
      throw Error(ErrorCode::BadData, std::string(what) + " rows differ in length");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

VecX vector_from(const Json& j, double null_value, const char* what) {
  if (!j.is_array()) throw Error(ErrorCode::BadData, std::string(what) + " must be a list");
  VecX v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<Eigen::Index>(k)] = j[k].is_null() ? null_value : j[k].get<double>();
  return v;
}

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

Json fixture_to_json(const QpFixture& f) {
  Json seqs = Json::array();
  for (const auto& s : f.sequences) {
    Json probs = Json::array();
    for (const auto& p : s.problems) {
      probs.push_back(Json{{"P", matrix_json(p.P)},
                           {"q", vector_json(p.q)},
                           {"A", matrix_json(p.A)},
                           {"l", vector_json(p.l)},
                           {"u", vector_json(p.u)}});
    }
    seqs.push_back(Json{{"name", s.name}, {"problems", probs}});
  }
  return Json{{"schema", kLogSchemaVersion}, {"kind", "qp_fixture"}, {"source", f.source}, {"sequences", seqs}};
}

QpFixture fixture_from_json(const Json& j) {
  try {
    if (j.value("kind", "") != "qp_fixture") throw Error(ErrorCode::BadData, "not a QP fixture document");
    QpFixture f;
    f.source = j.value("source", "");
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (const auto& s : j.at("sequences")) {
      QpFixture::Sequence seq;
      seq.name = s.at("name").get<std::string>();
      for (const auto& p : s.at("problems")) {
        qp::Problem<double> prob;
        prob.q = vector_from(p.at("q"), 0.0, "q");
        prob.P = matrix_from(p.at("P"), prob.q.size(), "P");
        prob.l = vector_from(p.at("l"), -inf, "l");
        prob.u = vector_from(p.at("u"), inf, "u");
        prob.A = matrix_from(p.at("A"), prob.q.size(), "A");
        const auto n = prob.q.size(), m = prob.l.size();
        if (prob.P.rows() != n || prob.P.cols() != n || prob.A.rows() != m || prob.u.size() != m ||
            (m > 0 && prob.A.cols() != n))
          throw Error(ErrorCode::BadData, "inconsistent dimensions in sequence '" + seq.name + "'");
        if (!seq.problems.empty() && (seq.problems.front().q.size() != n || seq.problems.front().l.size() != m))
          throw Error(ErrorCode::BadData, "sequence '" + seq.name + "' changes shape");
        seq.problems.push_back(std::move(prob));
      }
      f.sequences.push_back(std::move(seq));
    }
    return f;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::BadData, std::string("malformed fixture: ") + e.what());
  }
}

QpFixture load_fixture(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::BadData, "cannot open fixture " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::BadData, path.string() + ": " + e.what());
  }
  return fixture_from_json(j);
}

void save_fixture(const std::filesystem::path& path, const QpFixture& fixture) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write " + path.string());
  out << fixture_to_json(fixture).dump() << '\n';
}

QpFixture record_fixture(const Scenario& scenario, int every, int max_instances) {
  if (every < 1 || max_instances < 1) throw Error(ErrorCode::InvalidConfig, "every and max_instances must be >= 1");
  QpFixture f;
  f.source = scenario.name;
  std::map<std::string, std::size_t> index;
  int seen = 0, kept = 0;
  RunOptions opts;
  opts.keep_records = false;
  opts.on_tick = [&](const TickRecord& rec, const ClosedLoop& loop) {
    if (!rec.allocated || kept >= max_instances) return;
    if (seen++ % every != 0) return;
    ++kept;
    for (auto& np : loop.allocator().qp_problems()) {
      auto [it, inserted] = index.try_emplace(np.name, f.sequences.size());
      if (inserted) f.sequences.push_back({np.name, {}});
      f.sequences[it->second].problems.push_back(std::move(np.problem));
    }
  };
  run(scenario, AllocationMode::QpCascade, opts);
  return f;
}

std::vector<SequenceBench> bench_fixture(const QpFixture& fixture, int repeat, const qp::Settings<double>& settings) {
  if (repeat < 1) throw Error(ErrorCode::InvalidConfig, "repeat must be >= 1");
  std::vector<SequenceBench> out;
  for (const auto& seq : fixture.sequences) {
    SequenceBench b;
    b.name = seq.name;
    b.instances = seq.problems.size();
    if (seq.problems.empty()) {
      out.push_back(b);
      continue;
    }
    const auto n = seq.problems.front().num_variables(), m = seq.problems.front().num_constraints();
    std::vector<double> cold_t, warm_t, cold_it, warm_it;
    for (int r = 0; r < repeat; ++r) {
      qp::Settings<double> cold_settings = settings;
      cold_settings.warm_start = false;
      qp::Family<double> warm(n, m, settings);
      for (const auto& p : seq.problems) {
        qp::Family<double> cold(n, m, cold_settings);
        auto t0 = Clock::now();
        cold.update(p);
        const auto& sc = cold.solve();
        cold_t.push_back(std::chrono::duration<double, std::micro>(Clock::now() - t0).count());
        t0 = Clock::now();
        warm.update(p);
        const auto& sw = warm.solve();
        warm_t.push_back(std::chrono::duration<double, std::micro>(Clock::now() - t0).count());
        if (r == 0) {
          cold_it.push_back(sc.iterations);
          warm_it.push_back(sw.iterations);
          if (sc.status != qp::Status::Solved) ++b.failures;
        }
      }
    }
    b.cold_median_us = median(cold_t);
    b.warm_median_us = median(warm_t);
    b.cold_median_iterations = median(cold_it);
    b.warm_median_iterations = median(warm_it);
    out.push_back(b);
  }
  return out;
}

}  // namespace cablelift
