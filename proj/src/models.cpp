#include "uavedge/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "uavedge/errors.hpp"

namespace uavedge {

Plan Plan::zeros(int N, int K) {
  Plan p;
  p.waypoints.assign(static_cast<size_t>(N + 1), Vec3::Zero());
  p.tau = Eigen::MatrixXd::Zero(N, K);
  p.power = Eigen::MatrixXd::Zero(N, K);
  p.d_loc = Eigen::MatrixXd::Zero(N, K);
  p.d_off = Eigen::MatrixXd::Zero(N, K);
  p.f_edg = Eigen::VectorXd::Zero(N);
  return p;
}

const ConstraintEntry& ConstraintReport::at(const std::string& id) const {
  for (const auto& e : entries) {
    if (e.id == id) return e;
  }
  throw std::out_of_range("no constraint family '" + id + "'");
}

bool ConstraintReport::satisfied(double tol, const std::vector<std::string>& skip) const {
  for (const auto& e : entries) {
    if (std::find(skip.begin(), skip.end(), e.id) != skip.end()) continue;
    if (!(e.worst_residual <= tol)) return false;
  }
  return true;
}

double channel_gain(const Vec3& q, const Vec3& w, double ref_gain) {
  const double d2 = (q - w).squaredNorm();
  if (d2 < 1.0) {
    throw DegenerateDistanceError("UAV-node distance below the 1 m reference distance");
  }
  return ref_gain / d2;
}

double offload_rate(double power_w, double gain, double bandwidth_hz, double noise_w) {
  return bandwidth_hz * std::log2(1.0 + power_w * gain / noise_w);
}

double node_slot_energy(double d_loc_bits, double tau, double power_w, const NodeSpec& node,
                        const TimeGrid& grid) {
  const double slot = grid.slot_s();
  const double cycles = node.cycles_per_bit * d_loc_bits;
  return node.capacitance * cycles * cycles * cycles / (slot * slot) + tau * slot * power_w;
}

double edge_slot_energy(double f_hz, const UavSpec& uav, const TimeGrid& grid) {
  return uav.capacitance * grid.slot_s() * f_hz * f_hz * f_hz;
}

double required_snr(double d_off_bits, double tau, const Scenario& s) {
  if (d_off_bits <= 0.0) return 0.0;
  if (tau <= 0.0) return std::numeric_limits<double>::infinity();
  const double exponent = d_off_bits / (tau * s.time.slot_s() * s.channel.bandwidth_hz);
  return std::expm1(exponent * std::numbers::ln2);
}

void check_dimensions(const Plan& plan, const Scenario& s) {
  const int N = s.N();
  const int K = s.K();
  auto ok = [&](const Eigen::MatrixXd& m) { return m.rows() == N && m.cols() == K; };
  if (static_cast<int>(plan.waypoints.size()) != N + 1 || !ok(plan.tau) || !ok(plan.power) ||
      !ok(plan.d_loc) || !ok(plan.d_off) || plan.f_edg.size() != N) {
    throw DimensionError("plan dimensions do not match the scenario (N=" + std::to_string(N) +
                         ", K=" + std::to_string(K) + ")");
  }
}

EnergyBreakdown total_energy(const Plan& plan, const Scenario& s) {
  check_dimensions(plan, s);
  EnergyBreakdown e;
  const double slot = s.time.slot_s();
  for (int n = 0; n < s.N(); ++n) {
    for (int k = 0; k < s.K(); ++k) {
      const NodeSpec& node = s.nodes[static_cast<size_t>(k)];
      e.local_j += node_slot_energy(plan.d_loc(n, k), 0.0, 0.0, node, s.time);
      e.transmit_j += plan.tau(n, k) * slot * plan.power(n, k);
    }
    e.edge_raw_j += edge_slot_energy(plan.f_edg(n), s.uav, s.time);
  }
  e.edge_weighted_j = s.chi * e.edge_raw_j;
  e.total_j = e.local_j + e.transmit_j + e.edge_weighted_j;
  return e;
}

namespace {

class WorstTracker {
 public:
  explicit WorstTracker(std::string id) { entry_.id = std::move(id); }
  void add(double residual, int slot = -1, int node = -1) {
    if (!seen_ || residual > entry_.worst_residual || std::isnan(residual)) {
      entry_.worst_residual = residual;
      entry_.slot = slot;
      entry_.node = node;
      seen_ = true;
    }
  }
  ConstraintEntry done() const {
    ConstraintEntry e = entry_;
    if (!seen_) e.worst_residual = -std::numeric_limits<double>::infinity();
    return e;
  }

 private:
  ConstraintEntry entry_;
  bool seen_ = false;
};

}  // namespace

ConstraintReport check_plan_deterministic(const Plan& plan, const Scenario& s) {
  check_dimensions(plan, s);
  const int N = s.N();
  const int K = s.K();
  const double slot = s.time.slot_s();
  const double hop = s.uav.v_max * slot;

  WorstTracker endpoints("endpoints"), altitude("altitude"), speed("speed"),
      completion_data("data_completion"), local_cpu("local_cpu"), power_box("power_box"),
      tau_box("tau_box"), tau_sum("tau_sum"), rate("offload_rate"), freq("edge_freq_box"),
      causality("causality"), completion("completion"), nonneg("nonnegativity");

  endpoints.add((plan.waypoints.front() - s.uav.start).norm(), -1, -1);
  endpoints.add((plan.waypoints.back() - s.uav.end).norm(), N, -1);
  for (int n = 0; n <= N; ++n) {
    altitude.add(std::abs(plan.waypoints[static_cast<size_t>(n)].z() - s.uav.altitude_m), n, -1);
  }
  for (int n = 0; n < N; ++n) {
    const double hop_len =
        (plan.waypoints[static_cast<size_t>(n + 1)] - plan.waypoints[static_cast<size_t>(n)]).norm();
    speed.add(hop_len - hop, n, -1);
  }

  for (int k = 0; k < K; ++k) {
    const NodeSpec& node = s.nodes[static_cast<size_t>(k)];
    const double processed = plan.d_loc.col(k).sum() + plan.d_off.col(k).sum();
    completion_data.add(node.data_demand_bits - processed, -1, k);
    for (int n = 0; n < N; ++n) {
      local_cpu.add(node.cycles_per_bit * plan.d_loc(n, k) - slot * node.max_cpu_hz, n, k);
      const double p = plan.power(n, k);
      power_box.add(std::max(-p, p - node.max_tx_power_w), n, k);
      const double t = plan.tau(n, k);
      tau_box.add(std::max(-t, t - 1.0), n, k);
      nonneg.add(std::max(-plan.d_loc(n, k), -plan.d_off(n, k)), n, k);

      const double d = plan.d_off(n, k);
      double deliverable = 0.0;
      if (d > 0.0) {
        const Vec3& q = plan.waypoints[static_cast<size_t>(n + 1)];
        const double gain = s.channel.ref_gain / std::max((q - node.position).squaredNorm(), 1.0);
        deliverable = t * slot * offload_rate(p, gain, s.channel.bandwidth_hz, s.channel.noise_power_w);
      }
      rate.add(d - deliverable, n, k);
    }
  }
  for (int n = 0; n < N; ++n) {
    tau_sum.add(plan.tau.row(n).sum() - 1.0, n, -1);
    const double f = plan.f_edg(n);
    freq.add(std::max(-f, f - s.uav.max_cpu_hz), n, -1);
  }

  // Prefix sums: edge cycles through slot j versus cycles offloaded before slot j.
  const double c0 = s.uav.cycles_per_bit;
  double edge_cycles = 0.0;
  double offloaded_cycles = 0.0;
  for (int j = 0; j < N; ++j) {
    if (j >= 1) edge_cycles += slot * plan.f_edg(j);
    if (j >= 1) offloaded_cycles += c0 * plan.d_off.row(j - 1).sum();
    if (j <= N - 2) causality.add(edge_cycles - offloaded_cycles, j, -1);
  }
  completion.add(offloaded_cycles - edge_cycles, N - 1, -1);

  ConstraintReport report;
  for (const WorstTracker* t : {&endpoints, &altitude, &speed, &completion_data, &local_cpu,
                                &power_box, &tau_box, &tau_sum, &rate, &freq, &causality,
                                &completion, &nonneg}) {
    report.entries.push_back(t->done());
  }
  return report;
}

}  // namespace uavedge
