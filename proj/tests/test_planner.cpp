#include <cmath>
#include <random>

#include "doctest.h"
#include "uavedge/errors.hpp"
#include "uavedge/planner.hpp"
#include "uavedge/robust.hpp"

using namespace uavedge;

namespace {

Scenario small_scenario() {
  Scenario s = default_scenario();
  s.nodes.resize(3);
  s.nodes[0].position = Vec3(60, 200, 0);
  s.nodes[1].position = Vec3(150, 90, 0);
  s.nodes[2].position = Vec3(240, 260, 0);
  for (NodeSpec& n : s.nodes) n.data_demand_bits = 6e6;
  s.time.slots = 12;
  s.time.horizon_s = 12;
  s.uav.start = Vec3(0, 250, 100);
  s.uav.end = Vec3(250, 0, 100);
  return s;
}

const PlanResult& small_joint() {
  static const PlanResult r = plan(small_scenario());
  return r;
}

double max_hop(const Plan& p) {
  double m = 0.0;
  for (size_t n = 0; n + 1 < p.waypoints.size(); ++n) m = std::max(m, (p.waypoints[n + 1] - p.waypoints[n]).norm());
  return m;
}

const solver::Term& find_term(const solver::ConvexProgram& p, const std::string& label) {
  for (const solver::Term& t : p.inequalities)
    if (t.label == label) return t;
  throw std::out_of_range(label);
}

double eval(const solver::Term& t, const std::vector<double>& x) { return t.eval(x, {}, {}); }

}  // namespace

TEST_CASE("initial plan") {
  const Scenario s = default_scenario();
  const Plan p = init_plan(s);
  CHECK(max_hop(p) == doctest::Approx(500.0 * std::sqrt(2.0) / 50.0).epsilon(1e-12));
  CHECK(max_hop(p) <= effective_max_distance(s));
  CHECK(p.d_loc(0, 0) == doctest::Approx(0.6e6));
  CHECK(p.d_off.isZero(0.0));
  CHECK(p.power.isZero(0.0));
  CHECK(p.f_edg.isZero(0.0));
  CHECK(check_plan_deterministic(p, s).satisfied(1e-6));
  CHECK(check_plan_robust(p, s).worst_speed > 0.0);
  CHECK(total_energy(p, s).total_j == doctest::Approx(10.8).epsilon(1e-12));

  Scenario heavy = s;
  for (NodeSpec& n : heavy.nodes) n.data_demand_bits = 60e6;
  CHECK_THROWS_AS(init_plan(heavy), InfeasibleScenarioError);

  Scenario idle = s;
  idle.uav.end = idle.uav.start;
  for (NodeSpec& n : idle.nodes) n.data_demand_bits = 0.0;
  CHECK(total_energy(init_plan(idle), idle).total_j == 0.0);
}

TEST_CASE("variable bookkeeping on the default instance") {
  const Scenario s = default_scenario();
  const ScaState st = make_state(s, init_plan(s));
  const Subproblem trj = build_trajectory_subproblem(s, st);
  CHECK(trj.full_decision_variables == 598);
  CHECK(trj.full_auxiliary_variables == 1600);
  CHECK(trj.decision_variables == 598);
  CHECK(trj.auxiliary_variables == 0);  // nothing offloaded yet
  const Subproblem pwr = build_power_subproblem(s, st);
  CHECK(pwr.full_decision_variables == 1550);
  CHECK(pwr.full_auxiliary_variables == 2000);
  // f_edg of the first slot and final-slot offloading are eliminated.
  CHECK(pwr.decision_variables == 49 + 500 + 490 + 490);
  CHECK(pwr.auxiliary_variables == 2 * 490);
  CHECK(pwr.program.dimension == pwr.decision_variables + pwr.auxiliary_variables);
}

TEST_CASE("subproblem derivatives match finite differences") {
  const Scenario s = small_scenario();
  const ScaState st = make_state(s, small_joint().plan);
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const Subproblem& sp : {build_trajectory_subproblem(s, st), build_power_subproblem(s, st)}) {
    const Eigen::VectorXd x0 = solver::find_interior_point(sp.program, &sp.current);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd x = x0;
      for (int j = 0; j < x.size(); ++j) x[j] *= 1.0 + 0.2 * u(gen);
      const solver::DerivativeCheck c = solver::check_derivatives(sp.program, x);
      CHECK(c.max_gradient_error <= 1e-5);
      CHECK(c.max_hessian_error <= 1e-5);
      CHECK(c.terms_checked > 0);
    }
  }
}

TEST_CASE("trajectory rows reproduce the reduced robust forms") {
  const Scenario s = small_scenario();
  const ScaState st = make_state(s, small_joint().plan);
  const Subproblem sp = build_trajectory_subproblem(s, st);
  const Plan& p = st.plan;
  const double reach = s.uav.v_max * s.time.slot_s();
  for (int n = 0; n < s.N(); ++n) {
    const solver::Term& t = find_term(sp.program, "speed[" + std::to_string(n) + "]");
    std::vector<double> x;
    for (int v : t.vars) x.push_back(sp.current[v]);
    const double hop2 = (p.waypoints[n + 1] - p.waypoints[n]).squaredNorm();
    const double expect = robust_speed_lhs(hop2, s.robust.jitter_sigma_m, s.robust.rho_trj) / (reach * reach) - 1.0;
    CHECK(eval(t, x) == doctest::Approx(expect).epsilon(1e-12).scale(1.0));
  }
  REQUIRE(sp.auxiliary_variables > 0);
  for (int n = 0; n + 1 < s.N(); ++n) {
    for (int k = 0; k < s.K(); ++k) {
      if (sp.phi(n, k) < 0) continue;
      // At phi = phi0 the surrogate equals the true constraint scaled by A.
      const solver::Term& t = find_term(sp.program, "offload[" + std::to_string(n) + "," + std::to_string(k) + "]");
      const Vec3& q = p.waypoints[n + 1];
      const double L = reach;
      const double A = s.channel.ref_gain * p.power(n, k) / (s.channel.noise_power_w * st.phi(n, k));
      const double lhs = robust_offload_lhs((q - s.nodes[k].position).squaredNorm(), s.robust.jitter_sigma_m, 0.1);
      CHECK(eval(t, {q.x() / L, q.y() / L, 1.0}) == doctest::Approx(lhs / A - 1.0).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("SNR surrogate is affine and restricts the original") {
  const Scenario s = small_scenario();
  const ScaState st = make_state(s, small_joint().plan);
  const Subproblem sp = build_power_subproblem(s, st);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  int feasible = 0;
  for (int n = 0; n + 1 < s.N(); ++n) {
    for (int k = 0; k < s.K(); ++k) {
      const solver::Term& t = find_term(sp.program, "snr_surrogate[" + std::to_string(n) + "," + std::to_string(k) + "]");
      CHECK(t.affine);
      std::vector<double> g(2), h(4, 7.0);
      t.eval(std::vector<double>{0.3, 0.4}, g, h);
      CHECK(h == std::vector<double>(4, 7.0));  // affine terms leave the Hessian untouched
      const std::vector<double> a{0.2, 1.1}, b{1.7, 0.3};
      const double mid = eval(t, {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])});
      CHECK(mid == doctest::Approx(0.5 * (eval(t, a) + eval(t, b))).epsilon(1e-13).scale(1.0));

      const double v0 = st.varphi(n, k), psi0 = st.psi(n, k);
      const Vec3& q = st.plan.waypoints[n + 1];
      const double ell = s.channel.noise_power_w *
                         robust_offload_lhs((q - s.nodes[k].position).squaredNorm(), s.robust.jitter_sigma_m, 0.1) /
                         s.channel.ref_gain;
      for (int i = 0; i < 40; ++i) {
        const double vh = u(gen), ph = u(gen);
        if (eval(t, {vh, ph}) > 0.0) continue;
        ++feasible;
        CHECK((v0 * vh) * (v0 * vh) / (psi0 * ph) >= ell * (1.0 - 1e-12));
      }
    }
  }
  CHECK(feasible > 100);
}

TEST_CASE("SCA iteration cap and fixed point") {
  const Scenario s = small_scenario();
  Plan start = init_plan(s);
  // tau = tau_min leaves no room to offload; open the time shares first.
  start.tau.setConstant(1.0 / (s.K() + 1));
  const ScaState st = make_state(s, start);
  const ScaState one = run_sca(Block::power, s, st, 1e-3, 1);
  REQUIRE(one.history.size() == 2);
  CHECK(one.history[1] <= one.history[0]);
  CHECK(one.history[0] == doctest::Approx(total_energy(start, s).total_j));

  const ScaState many = run_sca(Block::power, s, st, 1e-3, 30);
  for (size_t i = 1; i < many.history.size(); ++i) CHECK(many.history[i] <= many.history[i - 1] + 1e-9);
  CHECK(many.history.back() < 0.5 * many.history.front());

  ScaState again = make_state(s, many.plan);
  again.history = {many.history.back()};
  const ScaState fixed = run_sca(Block::power, s, again, 1e-3, 30);
  CHECK(fixed.history.size() == 2);
  CHECK(fixed.history[0] - fixed.history[1] < 1e-3 * fixed.history[0]);
}

TEST_CASE("joint plan on a small instance") {
  const Scenario s = small_scenario();
  const PlanResult& r = small_joint();
  CHECK(r.converged);
  CHECK(r.outer_iterations <= 50);
  for (size_t i = 1; i < r.outer_history.size(); ++i) CHECK(r.outer_history[i] <= r.outer_history[i - 1] + 1e-9);
  for (size_t i = 1; i < r.trace.size(); ++i) {
    if (r.trace[i].inner > 0) CHECK(r.trace[i].objective_j <= r.trace[i - 1].objective_j + 1e-9);
  }
  CHECK(r.energy.total_j <= total_energy(init_plan(s), s).total_j);
  CHECK(r.plan.d_off.sum() > 0.0);
  CHECK(check_plan_deterministic(r.plan, s).satisfied(1e-6));
  const RobustCheck rc = check_plan_robust(r.plan, s);
  CHECK(rc.worst_speed >= -1e-6);
  CHECK(rc.worst_offload >= -1e-6);
  CHECK(r.plan.d_off.row(s.N() - 1).isZero(0.0));
  CHECK(r.plan.f_edg(0) == 0.0);

  const PlanResult again = plan(s);
  CHECK(again.energy.total_j == r.energy.total_j);
  CHECK(again.plan.d_off == r.plan.d_off);
}

TEST_CASE("baselines") {
  const Scenario s = small_scenario();
  const PlanResult local = baseline_plan(s, PlanMode::all_local);
  CHECK(local.energy.transmit_j == 0.0);
  CHECK(local.energy.edge_raw_j == 0.0);
  CHECK(local.plan.d_off.isZero(0.0));
  CHECK(small_joint().energy.total_j <= local.energy.total_j);

  const PlanResult remote = baseline_plan(s, PlanMode::all_offload);
  CHECK(remote.energy.local_j == 0.0);
  CHECK(check_plan_deterministic(remote.plan, s).satisfied(1e-6));
  CHECK(check_plan_robust(remote.plan, s).worst_offload >= -1e-6);
  CHECK(small_joint().energy.total_j <= remote.energy.total_j * (1 + 1e-3));

  const PlanResult nominal = baseline_plan(s, PlanMode::non_robust);
  const Scenario det = without_jitter(s);
  CHECK(check_plan_deterministic(nominal.plan, det).satisfied(1e-6));
  CHECK(check_plan_robust(nominal.plan, det).worst_offload >= -1e-6);
  CHECK(nominal.energy.total_j <= small_joint().energy.total_j * (1 + 1e-3));

  Scenario heavy = s;
  for (NodeSpec& n : heavy.nodes) n.data_demand_bits = 15e6;
  CHECK_THROWS_AS(baseline_plan(heavy, PlanMode::all_local), InfeasibleScenarioError);
  const PlanResult fallback = plan(heavy);
  CHECK(check_plan_deterministic(fallback.plan, heavy).satisfied(1e-6));
  CHECK(fallback.plan.d_off.sum() >= 3 * 3e6);

  CHECK(parse_plan_mode("all-offload") == PlanMode::all_offload);
  CHECK_THROWS_AS(parse_plan_mode("greedy"), std::invalid_argument);
}

TEST_CASE("zero data yields the zero-energy plan") {
  Scenario s = small_scenario();
  for (NodeSpec& n : s.nodes) n.data_demand_bits = 0.0;
  const PlanResult r = plan(s);
  CHECK(r.energy.total_j == 0.0);
  CHECK(r.outer_iterations <= 2);
  CHECK(check_plan_robust(r.plan, s).worst_speed >= 0.0);

  const ScaState st = make_state(s, init_plan(s));
  const Subproblem sp = build_power_subproblem(s, st);
  const Eigen::VectorXd x0 = solver::find_interior_point(sp.program, &sp.current);
  const solver::Solution sol = solver::solve(sp.program, x0, 1e-9);
  CHECK(sol.objective_value <= 1e-6);
}

TEST_CASE("seeded perturbation keeps the initializer feasible") {
  const Scenario s = default_scenario();
  PlannerOptions o;
  o.init_perturb_seed = 7;
  const Plan p = init_plan(s, o);
  CHECK(p.waypoints[10] != init_plan(s).waypoints[10]);
  CHECK(check_plan_robust(p, s).worst_speed > 0.0);
  CHECK(init_plan(s, o).waypoints[10] == p.waypoints[10]);
}
