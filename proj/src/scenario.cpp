#include "uavedge/scenario.hpp"

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "uavedge/errors.hpp"
#include "uavedge/rng.hpp"
#include "uavedge/robust.hpp"

namespace uavedge {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void require(bool ok, const char* invariant, const std::string& detail) {
  if (!ok) throw ValidationError(invariant, detail);
}

bool finite_all(const Vec3& v) { return v.allFinite(); }

std::string trim(std::string_view s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

double get_quantity(const json& node, const char* key, double fallback, std::string_view kind) {
  if (!node.contains(key)) return fallback;
  const json& v = node.at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_quantity(v.get<std::string>(), kind);
  throw ParseError(std::string("field '") + key + "' must be a number or a quantity string");
}

int get_int(const json& node, const char* key, int fallback) {
  if (!node.contains(key)) return fallback;
  const json& v = node.at(key);
  if (!v.is_number()) throw ParseError(std::string("field '") + key + "' must be a number");
  const double d = v.get<double>();
  if (d != std::floor(d) || std::abs(d) > 1e9) {
    throw ParseError(std::string("field '") + key + "' must be an integer");
  }
  return static_cast<int>(d);
}

const json& get_object(const json& node, const char* key) {
  static const json empty = json::object();
  if (!node.contains(key)) return empty;
  const json& v = node.at(key);
  if (!v.is_object()) throw ParseError(std::string("field '") + key + "' must be an object");
  return v;
}

/// [x, y] or [x, y, z]; a two-element position takes `z_default`.
Vec3 get_point(const json& node, const char* key, const Vec3& fallback, double z_default) {
  if (!node.contains(key)) return fallback;
  const json& v = node.at(key);
  if (!v.is_array() || (v.size() != 2 && v.size() != 3)) {
    throw ParseError(std::string("field '") + key + "' must be an array of 2 or 3 numbers");
  }
  Vec3 out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ParseError(std::string("field '") + key + "' has a non-numeric entry");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  if (v.size() == 2) out.z() = z_default;
  return out;
}

json point_json(const Vec3& p) { return json::array({p.x(), p.y(), p.z()}); }

NodeSpec parse_node(const json& j, const NodeSpec& defaults) {
  if (!j.is_object()) throw ParseError("node entries must be objects");
  NodeSpec n = defaults;
  if (!j.contains("position")) throw ParseError("node entry missing 'position'");
  n.position = get_point(j, "position", Vec3::Zero(), 0.0);
  n.data_demand_bits = get_quantity(j, "data_demand_bits", defaults.data_demand_bits, "bits");
  n.cycles_per_bit = get_quantity(j, "cycles_per_bit", defaults.cycles_per_bit, "plain");
  n.max_cpu_hz = get_quantity(j, "max_cpu_hz", defaults.max_cpu_hz, "frequency");
  n.max_tx_power_w = get_quantity(j, "max_tx_power_w", defaults.max_tx_power_w, "power");
  n.capacitance = get_quantity(j, "capacitance", defaults.capacitance, "plain");
  return n;
}

}  // namespace

double parse_quantity(std::string_view text, std::string_view kind) {
  const std::string t = trim(text);
  size_t consumed = 0;
  double value = 0.0;
  try {
    value = std::stod(t, &consumed);
  } catch (const std::exception&) {
    throw ParseError("not a quantity: '" + t + "'");
  }
  const std::string unit = trim(std::string_view(t).substr(consumed));
  if (unit.empty()) return value;

  auto bad = [&]() { return ParseError("unit '" + unit + "' not accepted for " + std::string(kind)); };
  if (kind == "gain") {
    if (unit == "dB") return std::pow(10.0, value / 10.0);
    throw bad();
  }
  if (kind == "power") {
    if (unit == "W") return value;
    if (unit == "mW") return value * 1e-3;
    if (unit == "dBW") return std::pow(10.0, value / 10.0);
    if (unit == "dBm") return std::pow(10.0, value / 10.0) * 1e-3;
    throw bad();
  }
  if (kind == "frequency") {
    if (unit == "Hz") return value;
    if (unit == "kHz") return value * 1e3;
    if (unit == "MHz") return value * 1e6;
    if (unit == "GHz") return value * 1e9;
    throw bad();
  }
  if (kind == "bits") {
    if (unit == "bit" || unit == "bits") return value;
    if (unit == "kbit") return value * 1e3;
    if (unit == "Mbit" || unit == "Mbits") return value * 1e6;
    if (unit == "Gbit") return value * 1e9;
    throw bad();
  }
  throw bad();
}

void validate(const Scenario& s) {
  require(s.K() >= 1, "K>=1", "scenario needs at least one node");
  require(s.time.horizon_s > 0 && std::isfinite(s.time.horizon_s), "horizon_s>0",
          fmt_double(s.time.horizon_s));
  require(s.time.slots >= 2, "slots>=2", std::to_string(s.time.slots));
  require(s.time.slot_s() > 0, "slot_length>0", fmt_double(s.time.slot_s()));

  require(s.channel.bandwidth_hz > 0, "bandwidth_hz>0", fmt_double(s.channel.bandwidth_hz));
  require(s.channel.ref_gain > 0, "ref_gain>0", fmt_double(s.channel.ref_gain));
  require(s.channel.noise_power_w > 0, "noise_power_w>0", fmt_double(s.channel.noise_power_w));

  const RobustSpec& r = s.robust;
  require(r.jitter_sigma_m >= 0 && std::isfinite(r.jitter_sigma_m), "jitter_sigma_m>=0",
          fmt_double(r.jitter_sigma_m));
  require(r.rho_trj > 0 && r.rho_trj < 0.5, "rho_trj in (0,0.5)", fmt_double(r.rho_trj));
  require(r.rho_off > 0 && r.rho_off < 0.5, "rho_off in (0,0.5)", fmt_double(r.rho_off));
  if (!r.rho_trj_per_slot.empty()) {
    require(static_cast<int>(r.rho_trj_per_slot.size()) == s.N(), "rho_trj_per_slot size",
            "expected one entry per slot");
    for (double v : r.rho_trj_per_slot) require(v > 0 && v < 0.5, "rho_trj in (0,0.5)", fmt_double(v));
  }
  if (!r.rho_off_per_pair.empty()) {
    require(static_cast<int>(r.rho_off_per_pair.size()) == s.N(), "rho_off_per_pair size",
            "expected one row per slot");
    for (const auto& row : r.rho_off_per_pair) {
      require(static_cast<int>(row.size()) == s.K(), "rho_off_per_pair size", "expected one entry per node");
      for (double v : row) require(v > 0 && v < 0.5, "rho_off in (0,0.5)", fmt_double(v));
    }
  }

  require(s.chi > 0 && s.chi < 1, "chi in (0,1)", fmt_double(s.chi));
  require(s.area_m.x() > 0 && s.area_m.y() > 0, "area_m>0", "area side lengths must be positive");

  const UavSpec& u = s.uav;
  require(u.altitude_m > 0 && std::isfinite(u.altitude_m), "altitude_m>0", fmt_double(u.altitude_m));
  require(u.v_max > 0, "v_max>0", fmt_double(u.v_max));
  require(u.max_cpu_hz > 0, "uav.max_cpu_hz>0", fmt_double(u.max_cpu_hz));
  require(u.cycles_per_bit > 0, "uav.cycles_per_bit>0", fmt_double(u.cycles_per_bit));
  require(u.capacitance > 0, "uav.capacitance>0", fmt_double(u.capacitance));
  require(finite_all(u.start) && u.start.z() == u.altitude_m, "start.z==altitude_m",
          "start third coordinate must equal the altitude");
  require(finite_all(u.end) && u.end.z() == u.altitude_m, "end.z==altitude_m",
          "end third coordinate must equal the altitude");

  for (int k = 0; k < s.K(); ++k) {
    const NodeSpec& n = s.nodes[static_cast<size_t>(k)];
    const std::string at = "node " + std::to_string(k);
    require(finite_all(n.position) && n.position.z() == 0.0, "node.position.z==0", at);
    require(n.position.x() >= 0 && n.position.x() <= s.area_m.x() && n.position.y() >= 0 &&
                n.position.y() <= s.area_m.y(),
            "node.position inside area", at);
    require(n.data_demand_bits >= 0 && std::isfinite(n.data_demand_bits), "data_demand_bits>=0", at);
    require(n.cycles_per_bit > 0, "cycles_per_bit>0", at);
    require(n.max_cpu_hz > 0, "max_cpu_hz>0", at);
    require(n.max_tx_power_w > 0, "max_tx_power_w>0", at);
    require(n.capacitance > 0, "capacitance>0", at);
  }
}

Scenario load_scenario(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ParseError("scenario root must be an object");

  Scenario s;
  try {
    const json& uav = get_object(root, "uav");
    UavSpec& u = s.uav;
    u.altitude_m = get_quantity(uav, "altitude_m", u.altitude_m, "plain");
    u.v_max = get_quantity(uav, "v_max", u.v_max, "plain");
    u.start = get_point(uav, "start", Vec3(u.start.x(), u.start.y(), u.altitude_m), u.altitude_m);
    u.end = get_point(uav, "end", Vec3(u.end.x(), u.end.y(), u.altitude_m), u.altitude_m);
    u.max_cpu_hz = get_quantity(uav, "max_cpu_hz", u.max_cpu_hz, "frequency");
    u.cycles_per_bit = get_quantity(uav, "cycles_per_bit", u.cycles_per_bit, "plain");
    u.capacitance = get_quantity(uav, "capacitance", u.capacitance, "plain");

    const json& time = get_object(root, "time");
    s.time.horizon_s = get_quantity(time, "horizon_s", s.time.horizon_s, "plain");
    s.time.slots = get_int(time, "slots", s.time.slots);

    const json& ch = get_object(root, "channel");
    s.channel.bandwidth_hz = get_quantity(ch, "bandwidth_hz", s.channel.bandwidth_hz, "frequency");
    s.channel.ref_gain = get_quantity(ch, "ref_gain", s.channel.ref_gain, "gain");
    s.channel.noise_power_w = get_quantity(ch, "noise_power_w", s.channel.noise_power_w, "power");

    const json& rb = get_object(root, "robust");
    s.robust.jitter_sigma_m = get_quantity(rb, "jitter_sigma_m", s.robust.jitter_sigma_m, "plain");
    s.robust.rho_trj = get_quantity(rb, "rho_trj", s.robust.rho_trj, "plain");
    s.robust.rho_off = get_quantity(rb, "rho_off", s.robust.rho_off, "plain");
    if (rb.contains("rho_trj_per_slot")) {
      s.robust.rho_trj_per_slot = rb.at("rho_trj_per_slot").get<std::vector<double>>();
    }
    if (rb.contains("rho_off_per_pair")) {
      s.robust.rho_off_per_pair = rb.at("rho_off_per_pair").get<std::vector<std::vector<double>>>();
    }

    s.chi = get_quantity(root, "chi", s.chi, "plain");
    if (root.contains("area_m")) {
      const auto a = root.at("area_m").get<std::vector<double>>();
      if (a.size() != 2) throw ParseError("'area_m' must have two entries");
      s.area_m = Vec2(a[0], a[1]);
    }

    NodeSpec node_defaults;
    const json& nd = get_object(root, "node_defaults");
    if (!nd.empty()) {
      json tmp = nd;
      tmp["position"] = json::array({0.0, 0.0});
      node_defaults = parse_node(tmp, NodeSpec{});
    }
    if (root.contains("nodes")) {
      const json& nodes = root.at("nodes");
      if (!nodes.is_array()) throw ParseError("'nodes' must be an array");
      for (const json& n : nodes) s.nodes.push_back(parse_node(n, node_defaults));
    } else {
      const int count = get_int(root, "node_count", 10);
      const auto seed = static_cast<std::uint64_t>(get_int(root, "topology_seed", 42));
      if (count < 0) throw ValidationError("K>=1", "node_count must be positive");
      for (const Vec3& p : generate_topology(seed, count, s.area_m)) {
        NodeSpec n = node_defaults;
        n.position = p;
        s.nodes.push_back(n);
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario field has the wrong type: ") + e.what());
  }

  validate(s);
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

std::string serialize_scenario(const Scenario& s) {
  json root;
  json nodes = json::array();
  for (const NodeSpec& n : s.nodes) {
    nodes.push_back({{"position", point_json(n.position)},
                     {"data_demand_bits", n.data_demand_bits},
                     {"cycles_per_bit", n.cycles_per_bit},
                     {"max_cpu_hz", n.max_cpu_hz},
                     {"max_tx_power_w", n.max_tx_power_w},
                     {"capacitance", n.capacitance}});
  }
  root["nodes"] = nodes;
  root["uav"] = {{"altitude_m", s.uav.altitude_m},   {"v_max", s.uav.v_max},
                 {"start", point_json(s.uav.start)}, {"end", point_json(s.uav.end)},
                 {"max_cpu_hz", s.uav.max_cpu_hz},   {"cycles_per_bit", s.uav.cycles_per_bit},
                 {"capacitance", s.uav.capacitance}};
  root["time"] = {{"horizon_s", s.time.horizon_s}, {"slots", s.time.slots}};
  root["channel"] = {{"bandwidth_hz", s.channel.bandwidth_hz},
                     {"ref_gain", s.channel.ref_gain},
                     {"noise_power_w", s.channel.noise_power_w}};
  json rb = {{"jitter_sigma_m", s.robust.jitter_sigma_m},
             {"rho_trj", s.robust.rho_trj},
             {"rho_off", s.robust.rho_off}};
  if (!s.robust.rho_trj_per_slot.empty()) rb["rho_trj_per_slot"] = s.robust.rho_trj_per_slot;
  if (!s.robust.rho_off_per_pair.empty()) rb["rho_off_per_pair"] = s.robust.rho_off_per_pair;
  root["robust"] = rb;
  root["chi"] = s.chi;
  root["area_m"] = json::array({s.area_m.x(), s.area_m.y()});
  return root.dump(2) + "\n";
}

Scenario default_scenario() { return load_scenario("{}"); }

std::vector<Vec3> generate_topology(std::uint64_t seed, int count, const Vec2& area) {
  std::vector<Vec3> out;
  if (count <= 0) return out;
  out.reserve(static_cast<size_t>(count));
  RandomStream rng(seed, 0);
  for (int i = 0; i < count; ++i) {
    const double x = rng.uniform() * area.x();
    const double y = rng.uniform() * area.y();
    out.emplace_back(x, y, 0.0);
  }
  return out;
}

std::vector<std::string> precheck_capacity(const Scenario& s) {
  std::vector<std::string> warnings;
  for (int k = 0; k < s.K(); ++k) {
    const NodeSpec& n = s.nodes[static_cast<size_t>(k)];
    const double local_capacity = s.time.horizon_s * n.max_cpu_hz / n.cycles_per_bit;
    if (local_capacity < n.data_demand_bits) {
      warnings.push_back("local-only infeasible for node " + std::to_string(k) + " (capacity " +
                         fmt_double(local_capacity) + " bits < demand " +
                         fmt_double(n.data_demand_bits) + " bits)");
    }
  }
  const double distance = (s.uav.end - s.uav.start).norm();
  const double reach = s.N() * effective_max_distance(s);
  if (distance > reach) {
    warnings.push_back("straight-line distance " + fmt_double(distance) +
                       " m exceeds robust reach " + fmt_double(reach) + " m");
  }
  return warnings;
}

}  // namespace uavedge
