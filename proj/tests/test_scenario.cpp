#include <cmath>
#include <string>

#include "doctest.h"
#include "uavedge/errors.hpp"
#include "uavedge/scenario.hpp"

using namespace uavedge;

namespace {

std::string validation_invariant(const std::string& text) {
  try {
    load_scenario(text);
  } catch (const ValidationError& e) {
    return e.invariant();
  }
  return "";
}

}  // namespace

TEST_CASE("default operating point") {
  const Scenario s = load_scenario(R"({
    "node_count": 10,
    "time": {"horizon_s": 50, "slots": 50},
    "uav": {"altitude_m": 100, "v_max": 50, "max_cpu_hz": "10 GHz"},
    "channel": {"bandwidth_hz": "3 MHz", "ref_gain": "-60 dB", "noise_power_w": "-120 dBm"},
    "node_defaults": {"data_demand_bits": "30 Mbit", "cycles_per_bit": 1000,
                      "max_cpu_hz": "1 GHz", "max_tx_power_w": "800 mW", "capacitance": 1e-28},
    "chi": 0.01,
    "robust": {"jitter_sigma_m": 5, "rho_trj": 0.1, "rho_off": 0.1}
  })");
  CHECK(s.K() == 10);
  CHECK(s.time.horizon_s == 50.0);
  CHECK(s.N() == 50);
  CHECK(s.uav.altitude_m == 100.0);
  CHECK(s.uav.v_max == 50.0);
  CHECK(s.channel.bandwidth_hz == doctest::Approx(3e6).epsilon(1e-15));
  CHECK(s.channel.ref_gain == doctest::Approx(1e-6).epsilon(1e-12));
  CHECK(s.channel.noise_power_w == doctest::Approx(1e-15).epsilon(1e-12));
  for (const NodeSpec& n : s.nodes) {
    CHECK(n.max_tx_power_w == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(n.data_demand_bits == 30e6);
    CHECK(n.cycles_per_bit == 1e3);
    CHECK(n.max_cpu_hz == 1e9);
    CHECK(n.capacitance == 1e-28);
  }
  CHECK(s.uav.max_cpu_hz == 10e9);
  CHECK(s.uav.capacitance == 1e-28);
  CHECK(s.chi == 0.01);
  CHECK(s.robust.jitter_sigma_m == 5.0);
  CHECK(s.robust.rho_trj == 0.1);
  CHECK(s.robust.rho_off == 0.1);
  CHECK(s == default_scenario());
}

TEST_CASE("missing fields take defaults") {
  const Scenario s = load_scenario(R"({"channel": {"bandwidth_hz": 3e6}})");
  CHECK(s.channel.noise_power_w == 1e-15);
  CHECK(s.uav.start == Vec3(0, 500, 100));
  CHECK(s.uav.end == Vec3(500, 0, 100));
}

TEST_CASE("invariant violations are named") {
  CHECK(validation_invariant(R"({"chi": 1.5})") == "chi in (0,1)");
  CHECK(validation_invariant(R"({"chi": 0})") == "chi in (0,1)");
  CHECK(validation_invariant(R"({"nodes": []})") == "K>=1");
  CHECK(validation_invariant(R"({"time": {"slots": 1}})") == "slots>=2");
  CHECK(validation_invariant(R"({"time": {"horizon_s": 0}})") == "horizon_s>0");
  CHECK(validation_invariant(R"({"channel": {"bandwidth_hz": 0}})") == "bandwidth_hz>0");
  CHECK(validation_invariant(R"({"channel": {"noise_power_w": -1}})") == "noise_power_w>0");
  CHECK(validation_invariant(R"({"robust": {"rho_trj": 0.5}})") == "rho_trj in (0,0.5)");
  CHECK(validation_invariant(R"({"robust": {"rho_off": 0}})") == "rho_off in (0,0.5)");
  CHECK(validation_invariant(R"({"robust": {"jitter_sigma_m": -1}})") == "jitter_sigma_m>=0");
  CHECK(validation_invariant(R"({"uav": {"v_max": 0}})") == "v_max>0");
  CHECK(validation_invariant(R"({"uav": {"start": [0, 0, 50]}})") == "start.z==altitude_m");
  CHECK(validation_invariant(R"({"uav": {"end": [0, 0, 50]}})") == "end.z==altitude_m");
  CHECK(validation_invariant(R"({"nodes": [{"position": [1, 1, 2]}]})") == "node.position.z==0");
  CHECK(validation_invariant(R"({"nodes": [{"position": [2000, 1]}]})") == "node.position inside area");
  CHECK(validation_invariant(R"({"nodes": [{"position": [1, 1], "data_demand_bits": -1}]})") ==
        "data_demand_bits>=0");
  CHECK(validation_invariant(R"({"nodes": [{"position": [1, 1], "cycles_per_bit": 0}]})") ==
        "cycles_per_bit>0");
  CHECK(validation_invariant(R"({"nodes": [{"position": [1, 1], "max_cpu_hz": 0}]})") == "max_cpu_hz>0");
  CHECK(validation_invariant(R"({"nodes": [{"position": [1, 1], "max_tx_power_w": 0}]})") ==
        "max_tx_power_w>0");
  CHECK(validation_invariant(R"({"nodes": [{"position": [1, 1], "capacitance": 0}]})") == "capacitance>0");
}

TEST_CASE("malformed files raise parse errors") {
  CHECK_THROWS_AS(load_scenario("{not json"), ParseError);
  CHECK_THROWS_AS(load_scenario("[]"), ParseError);
  CHECK_THROWS_AS(load_scenario(R"({"chi": "lots"})"), ParseError);
  CHECK_THROWS_AS(load_scenario(R"({"nodes": [{"data_demand_bits": 1}]})"), ParseError);
  CHECK_THROWS_AS(load_scenario(R"({"channel": {"bandwidth_hz": "3 furlongs"}})"), ParseError);
  CHECK_THROWS_AS(load_scenario(R"({"time": {"slots": 2.5}})"), ParseError);
}

TEST_CASE("unit suffixes") {
  CHECK(parse_quantity("-60 dB", "gain") == doctest::Approx(1e-6));
  CHECK(parse_quantity("-120 dBm", "power") == doctest::Approx(1e-15));
  CHECK(parse_quantity("-150dBW", "power") == doctest::Approx(1e-15));
  CHECK(parse_quantity("800 mW", "power") == doctest::Approx(0.8));
  CHECK(parse_quantity("2.5 GHz", "frequency") == doctest::Approx(2.5e9));
  CHECK(parse_quantity("30 Mbit", "bits") == doctest::Approx(30e6));
  CHECK(parse_quantity("12", "plain") == 12.0);
  CHECK_THROWS_AS(parse_quantity("3 MHz", "bits"), ParseError);
}

TEST_CASE("serialization round trip") {
  Scenario s = default_scenario();
  s.robust.rho_trj_per_slot.assign(static_cast<size_t>(s.N()), 0.2);
  s.nodes[3].data_demand_bits = 12345.678;
  const Scenario back = load_scenario(serialize_scenario(s));
  CHECK(back == s);
  CHECK(load_scenario(serialize_scenario(back)) == s);
}

TEST_CASE("per-index budget overrides") {
  std::string rows;
  for (int n = 0; n < 4; ++n) rows += std::string(n ? "," : "") + "[0.2, 0.3]";
  const Scenario s = load_scenario(R"({"time": {"slots": 4, "horizon_s": 4},
    "nodes": [{"position": [1, 1]}, {"position": [2, 2]}],
    "robust": {"rho_trj_per_slot": [0.1, 0.2, 0.3, 0.4], "rho_off_per_pair": [)" + rows + "]}}");
  CHECK(s.robust.trj(2) == 0.3);
  CHECK(s.robust.off(3, 1) == 0.3);
  CHECK(validation_invariant(R"({"time": {"slots": 3}, "robust": {"rho_trj_per_slot": [0.1]}})") ==
        "rho_trj_per_slot size");
}

TEST_CASE("topology generation") {
  CHECK(generate_topology(7, 0, Vec2(1000, 1000)).empty());
  const auto a = generate_topology(7, 10, Vec2(1000, 1000));
  const auto b = generate_topology(7, 10, Vec2(1000, 1000));
  REQUIRE(a.size() == 10);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    CHECK(a[i].x() >= 0.0);
    CHECK(a[i].x() <= 1000.0);
    CHECK(a[i].y() >= 0.0);
    CHECK(a[i].y() <= 1000.0);
    CHECK(a[i].z() == 0.0);
  }
  CHECK(generate_topology(8, 10, Vec2(1000, 1000))[0] != a[0]);
}

TEST_CASE("capacity precheck") {
  Scenario s = default_scenario();
  CHECK(precheck_capacity(s).empty());

  for (NodeSpec& n : s.nodes) n.data_demand_bits = 60e6;
  const auto w = precheck_capacity(s);
  REQUIRE(w.size() == 10);
  CHECK(w[0].find("local-only infeasible for node 0") == 0);

  Scenario same = default_scenario();
  same.uav.end = same.uav.start;
  CHECK(precheck_capacity(same).empty());

  Scenario far = default_scenario();
  far.time.slots = 10;
  far.time.horizon_s = 10;
  far.nodes.resize(1);
  far.nodes[0].data_demand_bits = 1e6;
  const auto wt = precheck_capacity(far);
  REQUIRE(wt.size() == 1);
  CHECK(wt[0].find("straight-line distance") == 0);
}

TEST_CASE("shipped default file") {
  const Scenario f = load_scenario_file(UAVEDGE_SOURCE_DIR "/scenarios/default.json");
  const Scenario d = default_scenario();
  REQUIRE(f.K() == d.K());
  for (int k = 0; k < d.K(); ++k) CHECK(f.nodes[size_t(k)].position == d.nodes[size_t(k)].position);
  CHECK(f.channel.ref_gain == doctest::Approx(d.channel.ref_gain).epsilon(1e-12));
  CHECK(f.channel.noise_power_w == doctest::Approx(d.channel.noise_power_w).epsilon(1e-12));
  Scenario g = f;
  g.channel = d.channel;
  CHECK(g == d);
}
