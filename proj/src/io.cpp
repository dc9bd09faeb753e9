#include "uavedge/io.hpp"

#include <json.hpp>

#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "uavedge/errors.hpp"

namespace uavedge {

using json = nlohmann::ordered_json;

namespace {

json matrix_rows(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd read_matrix(const json& j, const char* key, int rows, int cols) {
  if (!j.contains(key) || !j[key].is_array() || static_cast<int>(j[key].size()) != rows) {
    throw ParseError(std::string("plan field '") + key + "' must hold " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const json& row = j[key][static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw ParseError(std::string("plan field '") + key + "' row " + std::to_string(r) + " must hold " +
                       std::to_string(cols) + " numbers");
    }
    for (int c = 0; c < cols; ++c) {
      if (!row[static_cast<size_t>(c)].is_number()) throw ParseError(std::string("non-numeric entry in '") + key + "'");
      m(r, c) = row[static_cast<size_t>(c)].get<double>();
    }
  }
  return m;
}

json energy_json(const EnergyBreakdown& e) {
  return json{{"local_j", e.local_j},
              {"transmit_j", e.transmit_j},
              {"edge_raw_j", e.edge_raw_j},
              {"edge_weighted_j", e.edge_weighted_j},
              {"total_j", e.total_j}};
}

json histogram_json(const Histogram& h) {
  return json{{"bin_low", h.low}, {"bin_high", h.high}, {"count", h.counts}};
}

}  // namespace

std::string serialize_plan(const Plan& plan, const Scenario& s) {
  check_dimensions(plan, s);
  json j;
  j["slots"] = plan.N();
  j["nodes"] = plan.K();
  json w = json::array();
  for (const Vec3& q : plan.waypoints) w.push_back({q.x(), q.y(), q.z()});
  j["waypoints"] = std::move(w);
  j["tau"] = matrix_rows(plan.tau);
  j["power_w"] = matrix_rows(plan.power);
  j["d_loc_bits"] = matrix_rows(plan.d_loc);
  j["d_off_bits"] = matrix_rows(plan.d_off);
  j["f_edge_hz"] = std::vector<double>(plan.f_edg.data(), plan.f_edg.data() + plan.f_edg.size());
  j["energy"] = energy_json(total_energy(plan, s));
  json c = json::array();
  for (const ConstraintEntry& e : check_plan_deterministic(plan, s).entries) {
    c.push_back({{"id", e.id}, {"worst_residual", e.worst_residual}, {"slot", e.slot}, {"node", e.node}});
  }
  j["constraints"] = std::move(c);
  return j.dump(2) + "\n";
}

Plan parse_plan(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("plan file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("plan file must hold an object");
  if (!j.contains("slots") || !j["slots"].is_number_integer() || !j.contains("nodes") ||
      !j["nodes"].is_number_integer()) {
    throw ParseError("plan file needs integer 'slots' and 'nodes'");
  }
  const int N = j["slots"].get<int>();
  const int K = j["nodes"].get<int>();
  if (N < 1 || K < 1) throw ParseError("plan dimensions must be positive");
  Plan p = Plan::zeros(N, K);
  const Eigen::MatrixXd w = read_matrix(j, "waypoints", N + 1, 3);
  for (int n = 0; n <= N; ++n) p.waypoints[static_cast<size_t>(n)] = w.row(n).transpose();
  p.tau = read_matrix(j, "tau", N, K);
  p.power = read_matrix(j, "power_w", N, K);
  p.d_loc = read_matrix(j, "d_loc_bits", N, K);
  p.d_off = read_matrix(j, "d_off_bits", N, K);
  if (!j.contains("f_edge_hz") || !j["f_edge_hz"].is_array() || static_cast<int>(j["f_edge_hz"].size()) != N) {
    throw ParseError("plan field 'f_edge_hz' must hold " + std::to_string(N) + " numbers");
  }
  for (int n = 0; n < N; ++n) {
    const json& v = j["f_edge_hz"][static_cast<size_t>(n)];
    if (!v.is_number()) throw ParseError("non-numeric entry in 'f_edge_hz'");
    p.f_edg(n) = v.get<double>();
  }
  return p;
}

Plan load_plan_file(const std::string& path) { return parse_plan(read_text_file(path)); }

std::string serialize_energy(const EnergyBreakdown& e) { return energy_json(e).dump(2) + "\n"; }

std::string serialize_report(const ValidationReport& r) {
  json j;
  j["samples"] = r.samples;
  j["seed"] = r.seed;
  j["sigma_m"] = r.sigma;
  j["worst_speed_freq"] = r.worst_speed_freq;
  j["worst_speed_slot"] = r.worst_speed_slot;
  j["speed_violation_freq"] = r.speed_violation_freq;
  j["worst_offload_freq"] = r.worst_offload_freq;
  j["mean_completion_ratio"] = r.mean_completion_ratio;
  json c = json::array();
  for (const CompletionStats& s : r.completion) {
    c.push_back({{"slot", s.slot},
                 {"node", s.node},
                 {"planned_bits", s.planned_bits},
                 {"min", s.min},
                 {"mean", s.mean},
                 {"q05", s.q05},
                 {"q50", s.q50},
                 {"q95", s.q95},
                 {"violation_freq", s.violation_freq}});
  }
  j["completion_ratio_stats"] = std::move(c);
  j["energy"] = energy_json(r.energy);
  j["speed_histogram"] = histogram_json(r.speed_hist);
  j["ratio_histogram"] = histogram_json(r.ratio_hist);
  return j.dump(2) + "\n";
}

void write_slots_csv(std::ostream& out, const Plan& plan, const Scenario& s) {
  check_dimensions(plan, s);
  out << "slot,x,y,speed";
  for (int k = 0; k < plan.K(); ++k) out << ",d_off_" << k;
  out << '\n';
  out.precision(17);
  const double slot = s.time.slot_s();
  for (int n = 0; n < plan.N(); ++n) {
    const Vec3& q = plan.waypoints[static_cast<size_t>(n + 1)];
    const double speed = (q - plan.waypoints[static_cast<size_t>(n)]).norm() / slot;
    out << n << ',' << q.x() << ',' << q.y() << ',' << speed;
    for (int k = 0; k < plan.K(); ++k) out << ',' << plan.d_off(n, k);
    out << '\n';
  }
}

void write_plan_trace_csv(std::ostream& out, const std::vector<ScaTrace>& trace) {
  out << "outer,block,inner,objective_j\n";
  out.precision(17);
  for (const ScaTrace& t : trace) {
    out << t.outer << ',' << to_string(t.block) << ',' << t.inner << ',' << t.objective_j << '\n';
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace uavedge
