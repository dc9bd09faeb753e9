#include <cmath>
#include <random>

#include "doctest.h"
#include "uavedge/errors.hpp"
#include "uavedge/models.hpp"
#include "uavedge/scenario.hpp"

using namespace uavedge;

namespace {

Scenario single_node_one_second() {
  Scenario s = default_scenario();
  s.nodes.resize(1);
  s.time.horizon_s = 2.0;
  s.time.slots = 2;
  return s;
}

// Straight line, all data processed locally in equal shares.
Plan local_plan(const Scenario& s) {
  Plan p = Plan::zeros(s.N(), s.K());
  for (int n = 0; n <= s.N(); ++n) {
    const double a = static_cast<double>(n) / s.N();
    p.waypoints[static_cast<size_t>(n)] = (1 - a) * s.uav.start + a * s.uav.end;
  }
  for (int k = 0; k < s.K(); ++k) p.d_loc.col(k).setConstant(s.nodes[k].data_demand_bits / s.N());
  return p;
}

}  // namespace

TEST_CASE("channel gain") {
  const Vec3 w(10, 20, 0);
  CHECK(channel_gain(Vec3(10, 20, 100), w, 1e-6) == doctest::Approx(1e-10).epsilon(1e-14));
  const double g1 = channel_gain(Vec3(40, 60, 30), w, 1e-6);
  const double g2 = channel_gain(w + 2.0 * (Vec3(40, 60, 30) - w), w, 1e-6);
  CHECK(g1 / g2 == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(channel_gain(w, Vec3(40, 60, 30), 1e-6) == g1);
  CHECK_THROWS_AS(channel_gain(Vec3(10.5, 20, 0), w, 1e-6), DegenerateDistanceError);
}

TEST_CASE("offload rate") {
  CHECK(offload_rate(0.0, 1e-10, 3e6, 1e-15) == 0.0);
  CHECK(offload_rate(0.8, 1e-10, 3e6, 1e-15) == doctest::Approx(4.886e7).epsilon(1e-3));
  CHECK(offload_rate(0.8, 1e-10, 3e6, 1e-15) == doctest::Approx(3e6 * std::log2(1 + 8e4)).epsilon(1e-14));
  CHECK(offload_rate(1e-5, 1e-10, 3e6, 1e-15) == doctest::Approx(3e6).epsilon(1e-14));

  // Increasing in p and gain, concave in p.
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> up(0.01, 1.0), ug(1e-12, 1e-9);
  for (int i = 0; i < 200; ++i) {
    const double p = up(gen), g = ug(gen), h = 1e-4 * p;
    const double r0 = offload_rate(p, g, 3e6, 1e-15);
    CHECK(offload_rate(p + h, g, 3e6, 1e-15) > r0);
    CHECK(offload_rate(p, g * 1.01, 3e6, 1e-15) > r0);
    const double second = offload_rate(p + h, g, 3e6, 1e-15) - 2 * r0 + offload_rate(p - h, g, 3e6, 1e-15);
    CHECK(second < 0.0);
  }
}

TEST_CASE("node and edge energy") {
  const Scenario s = single_node_one_second();
  const NodeSpec& node = s.nodes[0];
  CHECK(node_slot_energy(1e6, 0.0, 0.0, node, s.time) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(node_slot_energy(0.0, 0.0, 0.8, node, s.time) == 0.0);
  CHECK(node_slot_energy(0.0, 0.5, 0.8, node, s.time) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(edge_slot_energy(1e9, s.uav, s.time) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(edge_slot_energy(0.0, s.uav, s.time) == 0.0);
  CHECK(edge_slot_energy(2e9, s.uav, s.time) / edge_slot_energy(1e9, s.uav, s.time) ==
        doctest::Approx(8.0).epsilon(1e-14));
}

TEST_CASE("total energy breakdown") {
  const Scenario s = single_node_one_second();
  Plan p = Plan::zeros(s.N(), s.K());
  CHECK(total_energy(p, s).total_j == 0.0);

  p.d_loc(0, 0) = 1e6;
  p.tau(0, 0) = 0.5;
  p.power(0, 0) = 0.8;
  p.f_edg(0) = 1e9;
  const EnergyBreakdown e = total_energy(p, s);
  CHECK(e.total_j == doctest::Approx(0.501).epsilon(1e-14));
  CHECK(e.edge_raw_j == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(e.edge_weighted_j == doctest::Approx(0.001).epsilon(1e-14));
  CHECK(std::abs(e.total_j - (e.local_j + e.transmit_j + e.edge_weighted_j)) <= 1e-9 * e.total_j);

  Plan q = Plan::zeros(s.N(), s.K());
  q.d_loc(0, 0) = 1e6;
  q.d_loc(1, 0) = 3e5;
  const double base = total_energy(q, s).local_j;
  q.d_loc *= 2.0;
  CHECK(total_energy(q, s).local_j / base == doctest::Approx(8.0).epsilon(1e-14));

  Plan bad = Plan::zeros(s.N() + 1, s.K());
  CHECK_THROWS_AS(total_energy(bad, s), DimensionError);
}

TEST_CASE("energy is invariant under node permutation") {
  Scenario s = default_scenario();
  s.nodes.resize(3);
  s.nodes[1].capacitance = 3e-28;
  s.nodes[2].cycles_per_bit = 700;
  Plan p = local_plan(s);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < s.N(); ++n) {
    for (int k = 0; k < s.K(); ++k) {
      p.tau(n, k) = 0.3 * u(gen);
      p.power(n, k) = 0.8 * u(gen);
      p.d_loc(n, k) = 1e6 * u(gen);
    }
  }
  const double e0 = total_energy(p, s).total_j;
  Scenario sp = s;
  Plan pp = p;
  const int perm[3] = {2, 0, 1};
  for (int k = 0; k < 3; ++k) {
    sp.nodes[k] = s.nodes[perm[k]];
    pp.tau.col(k) = p.tau.col(perm[k]);
    pp.power.col(k) = p.power.col(perm[k]);
    pp.d_loc.col(k) = p.d_loc.col(perm[k]);
  }
  CHECK(total_energy(pp, sp).total_j == doctest::Approx(e0).epsilon(1e-13));
}

TEST_CASE("deterministic constraint report") {
  const Scenario s = default_scenario();
  const Plan p = local_plan(s);
  const ConstraintReport r = check_plan_deterministic(p, s);
  CHECK(r.satisfied(1e-6));
  CHECK(r.entries.size() == 13);
  CHECK(r.at("causality").worst_residual <= 0.0);

  Plan short_data = p;
  short_data.d_loc(7, 4) -= 1.0;
  const ConstraintEntry& dc = check_plan_deterministic(short_data, s).at("data_completion");
  CHECK(dc.worst_residual == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(dc.node == 4);

  Plan fast = p;
  fast.waypoints[3] = fast.waypoints[2] + Vec3(60, 0, 0);
  const ConstraintEntry& sp = check_plan_deterministic(fast, s).at("speed");
  CHECK(sp.worst_residual == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(sp.slot == 2);
  CHECK_THROWS_AS(r.at("nope"), std::out_of_range);
}

TEST_CASE("first causality prefix is exactly zero") {
  Scenario s = default_scenario();
  s.nodes.resize(2);
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Plan p = local_plan(s);
    for (int n = 0; n < s.N(); ++n) {
      p.f_edg(n) = 1e10 * u(gen);
      for (int k = 0; k < s.K(); ++k) p.d_off(n, k) = 1e6 * u(gen);
    }
    // A plan whose edge work trails the offloads keeps the worst causality
    // residual at the empty first prefix.
    p.f_edg.setZero();
    const ConstraintEntry& c = check_plan_deterministic(p, s).at("causality");
    CHECK(c.worst_residual <= 0.0);
    if (c.slot == 0) CHECK(c.worst_residual == 0.0);
  }
}

TEST_CASE("offload rate family uses the next waypoint") {
  Scenario s = default_scenario();
  s.nodes.resize(1);
  s.nodes[0].position = Vec3(250, 250, 0);
  Plan p = local_plan(s);
  p.waypoints.assign(p.waypoints.size(), Vec3(250, 250, 100));
  p.waypoints.front() = s.uav.start;
  p.waypoints.back() = s.uav.end;
  const double slot = s.time.slot_s();
  const double rate = offload_rate(0.8, 1e-10, s.channel.bandwidth_hz, s.channel.noise_power_w);
  p.tau(5, 0) = 0.5;
  p.power(5, 0) = 0.8;
  p.d_off(5, 0) = 0.5 * slot * rate;
  CHECK(check_plan_deterministic(p, s).at("offload_rate").worst_residual <= 1e-6);
  p.d_off(5, 0) *= 1.01;
  CHECK(check_plan_deterministic(p, s).at("offload_rate").worst_residual > 1e3);
}

TEST_CASE("required snr") {
  const Scenario s = default_scenario();
  CHECK(required_snr(0.0, 0.0, s) == 0.0);
  CHECK(required_snr(0.0, 0.3, s) == 0.0);
  CHECK(std::isinf(required_snr(1.0, 0.0, s)));
  // One bandwidth-second of data in a full slot needs SNR 1.
  CHECK(required_snr(s.channel.bandwidth_hz * s.time.slot_s(), 1.0, s) == doctest::Approx(1.0).epsilon(1e-14));
}
