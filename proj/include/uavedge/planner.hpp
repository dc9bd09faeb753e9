#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "uavedge/models.hpp"
#include "uavedge/scenario.hpp"
#include "uavedge/solver.hpp"

namespace uavedge {

enum class PlanMode { joint, all_local, all_offload, non_robust };

const char* to_string(PlanMode m);
/// Accepts "joint", "all-local", "all-offload", "non-robust". Throws std::invalid_argument.
PlanMode parse_plan_mode(const std::string& text);

struct PlannerOptions {
  double eps_outer = 1e-3;  // relative decrease that ends the alternation
  double eps_trj = 1e-3;
  double eps_pwr = 1e-3;
  int max_outer = 50;
  int max_sca = 30;
  double solver_tol = 1e-7;  // duality gap of each convex solve, joules
  double tau_min = 1e-6;
  /// Pairs offloading fewer bits than this are rounded to zero offload.
  double snap_bits = 1.0;
  /// Non-zero: seeded random perturbation of the initial waypoints.
  std::uint64_t init_perturb_seed = 0;
  PlanMode mode = PlanMode::joint;
};

/// Surrogate linearization points and the plan they belong to. All matrices
/// are N x K.
struct ScaState {
  Eigen::MatrixXd phi;     // SNR tangent of the trajectory block
  Eigen::MatrixXd varphi;  // sqrt-power tangent of the power block
  Eigen::MatrixXd psi;     // SNR tangent of the power block
  Plan plan;
  std::vector<double> history;  // total energy per iterate, joules
};

enum class Block { trajectory, power };

const char* to_string(Block b);

/// A convex program over one block together with its variable bookkeeping.
struct Subproblem {
  Block block = Block::trajectory;
  solver::ConvexProgram program;
  Eigen::VectorXd current;  // the state's plan in program coordinates
  int decision_variables = 0;
  int auxiliary_variables = 0;
  /// Counts of the unreduced formulation (waypoints / tau / phi and the
  /// Bernstein auxiliaries, resp. f / p / d and varphi / psi / Bernstein).
  int full_decision_variables = 0;
  int full_auxiliary_variables = 0;

  // Index maps into the program vector; -1 marks eliminated entries.
  Eigen::MatrixXi wx, wy;  // (N+1) x 1
  Eigen::MatrixXi tau, phi;
  Eigen::MatrixXi f;  // N x 1
  Eigen::MatrixXi power, d_loc, d_off, varphi, psi;
};

/// Straight line, all data local in equal shares, tau = tau_min, no power.
/// Throws InfeasibleScenarioError when local processing cannot finish the data
/// or the straight line breaks the robust speed margin.
Plan init_plan(const Scenario& s, const PlannerOptions& opts = {});

/// Tangent points implied by `plan` (see ScaState).
ScaState make_state(const Scenario& s, const Plan& plan, const PlannerOptions& opts = {});

Subproblem build_trajectory_subproblem(const Scenario& s, const ScaState& state,
                                       const PlannerOptions& opts = {});
Subproblem build_power_subproblem(const Scenario& s, const ScaState& state,
                                  const PlannerOptions& opts = {});

/// Writes a program-space point back into a copy of the state's plan and
/// returns the solution's surrogate values in `next` (when non-null).
Plan extract_plan(const Subproblem& sp, const Scenario& s, const ScaState& state,
                  const Eigen::VectorXd& x, ScaState* next = nullptr);

struct ScaTrace {
  int outer = 0;
  Block block = Block::trajectory;
  int inner = 0;
  double objective_j = 0.0;
};

/// Successive convex approximation on one block. The history starts with the
/// energy of the incoming plan and gets one entry per solve.
ScaState run_sca(Block block, const Scenario& s, ScaState state, double eps, int max_iter,
                 const PlannerOptions& opts = {}, std::vector<ScaTrace>* trace = nullptr,
                 int outer = 0);

struct PlanResult {
  Plan plan;
  EnergyBreakdown energy;
  std::vector<ScaTrace> trace;  // inner = 0 rows are the block-start energies
  std::vector<double> outer_history;
  int outer_iterations = 0;
  bool converged = false;
};

PlanResult plan(const Scenario& s, const PlannerOptions& opts = {});

/// plan() with opts.mode = mode.
PlanResult baseline_plan(const Scenario& s, PlanMode mode, PlannerOptions opts = {});

/// Worst robust margins of a plan in natural units (m^2): >= 0 means robust-feasible.
struct RobustCheck {
  double worst_speed = 0.0;
  double worst_offload = 0.0;
  int speed_slot = -1;
  int offload_slot = -1;
  int offload_node = -1;
};
RobustCheck check_plan_robust(const Plan& plan, const Scenario& s);

/// Scenario with the jitter switched off, as used by the non-robust mode.
Scenario without_jitter(const Scenario& s);

}  // namespace uavedge
