#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace uavedge {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

struct NodeSpec {
  Vec3 position = Vec3::Zero();     // m, ground plane
  double data_demand_bits = 30e6;   // D_k
  double cycles_per_bit = 1e3;      // c_k
  double max_cpu_hz = 1e9;          // F_k^max
  double max_tx_power_w = 0.8;      // p_k^max
  double capacitance = 1e-28;       // lambda_k, J s^2 / cycle^3

  bool operator==(const NodeSpec&) const = default;
};

struct UavSpec {
  double altitude_m = 100.0;
  double v_max = 50.0;
  Vec3 start{0.0, 500.0, 100.0};
  Vec3 end{500.0, 0.0, 100.0};
  double max_cpu_hz = 10e9;     // F_0^max
  double cycles_per_bit = 1e3;  // c_0
  double capacitance = 1e-28;   // lambda_0

  bool operator==(const UavSpec&) const = default;
};

struct TimeGrid {
  double horizon_s = 50.0;
  int slots = 50;

  double slot_s() const { return horizon_s / slots; }
  bool operator==(const TimeGrid&) const = default;
};

struct ChannelSpec {
  double bandwidth_hz = 3e6;
  double ref_gain = 1e-6;        // linear gain at 1 m
  double noise_power_w = 1e-15;  // W

  bool operator==(const ChannelSpec&) const = default;
};

/// Jitter model and violation budgets. A single budget per kind is broadcast to
/// every slot / (slot, node) pair unless a per-index override is present.
struct RobustSpec {
  double jitter_sigma_m = 5.0;
  double rho_trj = 0.1;
  double rho_off = 0.1;
  std::vector<double> rho_trj_per_slot;           // empty or N entries
  std::vector<std::vector<double>> rho_off_per_pair;  // empty or N x K

  double trj(int slot) const {
    return rho_trj_per_slot.empty() ? rho_trj : rho_trj_per_slot[static_cast<size_t>(slot)];
  }
  double off(int slot, int node) const {
    return rho_off_per_pair.empty()
               ? rho_off
               : rho_off_per_pair[static_cast<size_t>(slot)][static_cast<size_t>(node)];
  }
  bool operator==(const RobustSpec&) const = default;
};

/// Immutable problem instance. Slots are 0-based in code: slot n covers
/// [n T/N, (n+1) T/N] and its channel is evaluated at waypoint n + 1.
struct Scenario {
  std::vector<NodeSpec> nodes;
  UavSpec uav;
  TimeGrid time;
  ChannelSpec channel;
  RobustSpec robust;
  double chi = 0.01;
  Vec2 area_m{1000.0, 1000.0};

  int K() const { return static_cast<int>(nodes.size()); }
  int N() const { return time.slots; }
  bool operator==(const Scenario&) const = default;
};

/// Throws ValidationError naming the first violated invariant.
void validate(const Scenario& s);

/// Parses the JSON scenario schema (see README). Missing optional fields take
/// the default operating point; quantities may carry unit suffixes
/// ("-60 dB", "-120 dBm", "800 mW", "3 MHz", "30 Mbit").
Scenario load_scenario(std::string_view text);
Scenario load_scenario_file(const std::string& path);

/// Serializes every field explicitly in linear SI units.
std::string serialize_scenario(const Scenario& s);

/// The default operating point: 10 nodes placed by generate_topology(42, ...).
Scenario default_scenario();

/// i.i.d. uniform ground positions over [0, area.x] x [0, area.y].
std::vector<Vec3> generate_topology(std::uint64_t seed, int count, const Vec2& area);

/// Human-readable feasibility warnings (never throws).
std::vector<std::string> precheck_capacity(const Scenario& s);

/// Parses a scalar that may carry a unit suffix. `kind` selects the accepted
/// suffix family: "gain", "power", "frequency", "bits", or "plain".
double parse_quantity(std::string_view text, std::string_view kind);

}  // namespace uavedge
