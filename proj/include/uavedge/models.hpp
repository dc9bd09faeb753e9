#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "uavedge/scenario.hpp"

namespace uavedge {

/// Decision variables of one planning instance. Matrices are N x K
/// (row = slot, column = node); waypoints hold q_0 .. q_N.
struct Plan {
  std::vector<Vec3> waypoints;
  Eigen::MatrixXd tau;
  Eigen::MatrixXd power;
  Eigen::MatrixXd d_loc;
  Eigen::MatrixXd d_off;
  Eigen::VectorXd f_edg;

  int N() const { return static_cast<int>(tau.rows()); }
  int K() const { return static_cast<int>(tau.cols()); }

  /// All-zero plan for an N x K instance with waypoints left at the origin.
  static Plan zeros(int N, int K);
};

struct EnergyBreakdown {
  double local_j = 0.0;
  double transmit_j = 0.0;
  double edge_raw_j = 0.0;
  double edge_weighted_j = 0.0;
  double total_j = 0.0;
};

/// One constraint family: the worst residual (g <= 0 convention, natural
/// units of the family) and where it occurs. Indices are -1 when not
/// applicable.
struct ConstraintEntry {
  std::string id;
  double worst_residual = 0.0;
  int slot = -1;
  int node = -1;
};

struct ConstraintReport {
  std::vector<ConstraintEntry> entries;

  const ConstraintEntry& at(const std::string& id) const;
  /// True when every family outside `skip` has worst residual <= tol.
  bool satisfied(double tol, const std::vector<std::string>& skip = {}) const;
};

/// Free-space gain ref_gain / |q - w|^2. Throws DegenerateDistanceError below 1 m.
double channel_gain(const Vec3& q, const Vec3& w, double ref_gain);

/// Shannon rate B log2(1 + p gain / noise) in bits/s.
double offload_rate(double power_w, double gain, double bandwidth_hz, double noise_w);

/// Local computation plus transmission energy of one node in one slot.
double node_slot_energy(double d_loc_bits, double tau, double power_w, const NodeSpec& node,
                        const TimeGrid& grid);

/// Edge computation energy of one slot at frequency f.
double edge_slot_energy(double f_hz, const UavSpec& uav, const TimeGrid& grid);

/// Linear SNR needed to move `d_off_bits` within a share `tau` of one slot:
/// 2^(d N / (tau T B)) - 1. Zero offload needs zero SNR for any tau >= 0;
/// positive offload with tau = 0 needs +inf.
double required_snr(double d_off_bits, double tau, const Scenario& s);

EnergyBreakdown total_energy(const Plan& plan, const Scenario& s);

/// Evaluates the deterministic constraint set of the plan. Family ids:
/// endpoints, altitude, speed, data_completion, local_cpu, power_box,
/// tau_box, tau_sum, offload_rate, edge_freq_box, causality, completion,
/// nonnegativity.
ConstraintReport check_plan_deterministic(const Plan& plan, const Scenario& s);

/// Throws DimensionError unless the plan is N x K for the scenario.
void check_dimensions(const Plan& plan, const Scenario& s);

}  // namespace uavedge
