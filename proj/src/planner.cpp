#include "uavedge/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "uavedge/errors.hpp"
#include "uavedge/rng.hpp"
#include "uavedge/robust.hpp"

namespace uavedge {

using solver::ConvexProgram;
using solver::Term;

namespace {

constexpr double kMbit = 1e6;
constexpr double kGHz = 1e9;
constexpr double kLn2 = std::numbers::ln2;
constexpr double kMinTangent = 1e-6;
constexpr double kExploreFraction = 1e-3;
constexpr double kTinyFraction = 1e-9;

size_t at(int i) { return static_cast<size_t>(i); }

/// h(s) = s + k sqrt(a e^4 + b e^2 s) + c, the reduced robust left-hand side
/// as a function of the squared distance s.
struct DistanceFn {
  double k = 0.0, a = 0.0, b = 0.0, e2 = 0.0, cst = 0.0;

  static DistanceFn speed(double sigma, double rho) {
    const double e2 = sigma * sigma;
    return {bernstein_mu_coefficient(rho), 12.0, 4.0, e2, 6.0 * e2 - 2.0 * e2 * std::log(rho)};
  }
  static DistanceFn offload(double sigma, double rho) {
    const double e2 = sigma * sigma;
    return {bernstein_mu_coefficient(rho), 3.0, 2.0, e2, 3.0 * e2 - e2 * std::log(rho)};
  }
  // value, first and second derivative in s
  void eval(double s, double& h, double& h1, double& h2) const {
    if (e2 == 0.0) {
      h = s;
      h1 = 1.0;
      h2 = 0.0;
      return;
    }
    const double w = a * e2 * e2 + b * e2 * s;
    const double r = std::sqrt(w);
    h = s + k * r + cst;
    h1 = 1.0 + k * b * e2 / (2.0 * r);
    h2 = -k * b * b * e2 * e2 / (4.0 * w * r);
  }
};

double pair_ell(const Scenario& s, const Plan& plan, int n, int k) {
  const Vec3& q = plan.waypoints[at(n + 1)];
  const double r2 = (q - s.nodes[at(k)].position).squaredNorm();
  return s.channel.noise_power_w * robust_offload_lhs(r2, s.robust.jitter_sigma_m, s.robust.off(n, k)) /
         s.channel.ref_gain;
}

bool offloads_anything(const Plan& p) { return (p.d_off.array() > 0.0).any(); }

bool uses_offload(PlanMode m) { return m != PlanMode::all_local; }
bool uses_local(PlanMode m) { return m != PlanMode::all_offload; }

Eigen::MatrixXi unset(int rows, int cols) { return Eigen::MatrixXi::Constant(rows, cols, -1); }

struct Builder {
  ConvexProgram prog;
  std::vector<double> lower, upper, start;

  int add(double lo, double hi, double x0) {
    lower.push_back(lo);
    upper.push_back(hi);
    start.push_back(x0);
    return prog.dimension++;
  }
  void finish(Subproblem& sp) {
    prog.lower = Eigen::Map<Eigen::VectorXd>(lower.data(), static_cast<Eigen::Index>(lower.size()));
    prog.upper = Eigen::Map<Eigen::VectorXd>(upper.data(), static_cast<Eigen::Index>(upper.size()));
    sp.current = Eigen::Map<Eigen::VectorXd>(start.data(), static_cast<Eigen::Index>(start.size()));
    sp.program = std::move(prog);
  }
};

// Scaled waypoint coordinates: a free variable index or a fixed value.
struct Point {
  int ix = -1, iy = -1;
  double x = 0.0, y = 0.0;
};

Term hop_term(const Point& P, const Point& Q, double L, double R2, const DistanceFn& fn, int slot) {
  Term t;
  int pos[4] = {-1, -1, -1, -1};
  const int idx[4] = {P.ix, P.iy, Q.ix, Q.iy};
  for (int i = 0; i < 4; ++i) {
    if (idx[i] >= 0) {
      pos[i] = static_cast<int>(t.vars.size());
      t.vars.push_back(idx[i]);
    }
  }
  const double fixed[4] = {P.x, P.y, Q.x, Q.y};
  t.label = "speed[" + std::to_string(slot) + "]";
  t.eval = [=](std::span<const double> v, std::span<double> g, std::span<double> h) {
    double c[4];
    for (int i = 0; i < 4; ++i) c[i] = pos[i] >= 0 ? v[pos[i]] : fixed[i];
    const double dx = c[2] - c[0], dy = c[3] - c[1];
    const double L2 = L * L;
    const double s = L2 * (dx * dx + dy * dy);
    double f, f1, f2;
    fn.eval(s, f, f1, f2);
    const int m = static_cast<int>(v.size());
    if (!g.empty()) {
      const double gx = f1 * 2.0 * L2 * dx / R2, gy = f1 * 2.0 * L2 * dy / R2;
      const double full[4] = {-gx, -gy, gx, gy};
      for (int i = 0; i < 4; ++i)
        if (pos[i] >= 0) g[pos[i]] = full[i];
    }
    if (!h.empty()) {
      const double d[2] = {dx, dy};
      double H[2][2];
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          H[a][b] = ((a == b ? 2.0 * L2 * f1 : 0.0) + 4.0 * L2 * L2 * f2 * d[a] * d[b]) / R2;
      for (int i = 0; i < 4; ++i) {
        if (pos[i] < 0) continue;
        for (int j = 0; j < 4; ++j) {
          if (pos[j] < 0) continue;
          const double sign = ((i < 2) == (j < 2)) ? 1.0 : -1.0;
          h[pos[i] + m * pos[j]] = sign * H[i % 2][j % 2];
        }
      }
    }
    return (f - R2) / R2;
  };
  return t;
}

// h_off(|q - w|^2) / A - 2 + phi_hat <= 0; q is free.
Term offload_term(int ix, int iy, int iphi, double L, const Vec3& w, double dz2, double A,
                  const DistanceFn& fn, int n, int k) {
  Term t;
  t.vars = {ix, iy, iphi};
  t.label = "offload[" + std::to_string(n) + "," + std::to_string(k) + "]";
  const double wx = w.x() / L, wy = w.y() / L;
  t.eval = [=](std::span<const double> v, std::span<double> g, std::span<double> h) {
    const double dx = v[0] - wx, dy = v[1] - wy;
    const double L2 = L * L;
    const double s = L2 * (dx * dx + dy * dy) + dz2;
    double f, f1, f2;
    fn.eval(s, f, f1, f2);
    if (!g.empty()) {
      g[0] = f1 * 2.0 * L2 * dx / A;
      g[1] = f1 * 2.0 * L2 * dy / A;
      g[2] = 1.0;
    }
    if (!h.empty()) {
      std::fill(h.begin(), h.end(), 0.0);
      const double d[2] = {dx, dy};
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          h[a + 3 * b] = ((a == b ? 2.0 * L2 * f1 : 0.0) + 4.0 * L2 * L2 * f2 * d[a] * d[b]) / A;
    }
    return f / A - 2.0 + v[2];
  };
  return t;
}

// coef / x0 - log2(1 + scale x1) <= 0 with x0 > 0 (trajectory rate); when
// `linear_first` the first variable enters as coef * x0 instead (power rate).
Term rate_term(int i0, int i1, double coef, double scale, bool linear_first, std::string label) {
  Term t;
  t.vars = {i0, i1};
  t.label = std::move(label);
  t.eval = [=](std::span<const double> v, std::span<double> g, std::span<double> h) {
    const double u = 1.0 + scale * v[1];
    if (!(u > 0.0) || (!linear_first && !(v[0] > 0.0))) return std::numeric_limits<double>::infinity();
    const double first = linear_first ? coef * v[0] : coef / v[0];
    if (!g.empty()) {
      g[0] = linear_first ? coef : -coef / (v[0] * v[0]);
      g[1] = -scale / (u * kLn2);
    }
    if (!h.empty()) {
      h[0] = linear_first ? 0.0 : 2.0 * coef / (v[0] * v[0] * v[0]);
      h[1] = 0.0;
      h[2] = 0.0;
      h[3] = scale * scale / (u * u * kLn2);
    }
    return first - std::log1p(scale * v[1]) / kLn2;
  };
  return t;
}

// alpha x^3
Term cubic_term(int i, double alpha, std::string label) {
  Term t;
  t.vars = {i};
  t.label = std::move(label);
  t.eval = [alpha](std::span<const double> v, std::span<double> g, std::span<double> h) {
    const double x = v[0];
    if (!g.empty()) g[0] = 3.0 * alpha * x * x;
    if (!h.empty()) h[0] = 6.0 * alpha * x;
    return alpha * x * x * x;
  };
  return t;
}

// x^2 - c y <= 0
Term square_minus_term(int ix, int iy, double c, std::string label) {
  Term t;
  t.vars = {ix, iy};
  t.label = std::move(label);
  t.eval = [c](std::span<const double> v, std::span<double> g, std::span<double> h) {
    if (!g.empty()) {
      g[0] = 2.0 * v[0];
      g[1] = -c;
    }
    if (!h.empty()) {
      h[0] = 2.0;
      h[1] = h[2] = h[3] = 0.0;
    }
    return v[0] * v[0] - c * v[1];
  };
  return t;
}

double transmit_energy(const Plan& p, const Scenario& s) {
  return s.time.slot_s() * (p.tau.array() * p.power.array()).sum();
}

Plan straight_line(const Scenario& s) {
  Plan p = Plan::zeros(s.N(), s.K());
  for (int n = 0; n <= s.N(); ++n) {
    const double a = static_cast<double>(n) / s.N();
    p.waypoints[at(n)] = (1.0 - a) * s.uav.start + a * s.uav.end;
  }
  return p;
}

void check_straight_line(const Scenario& s) {
  const double hop = (s.uav.end - s.uav.start).norm() / s.N();
  for (int n = 0; n < s.N(); ++n) {
    if (hop > effective_max_distance(s, n)) {
      throw InfeasibleScenarioError("straight-line robust-speed infeasible: hop " + std::to_string(hop) +
                                    " m exceeds robust reach in slot " + std::to_string(n));
    }
  }
}

void perturb_waypoints(Plan& p, const Scenario& s, std::uint64_t seed) {
  const double hop = (s.uav.end - s.uav.start).norm() / s.N();
  double reach = INFINITY;
  for (int n = 0; n < s.N(); ++n) reach = std::min(reach, effective_max_distance(s, n));
  const double radius = 0.45 * std::max(0.0, reach - hop);
  RandomStream rng(seed, 0);
  for (int n = 1; n < s.N(); ++n) {
    const double r = radius * std::sqrt(rng.uniform());
    const double a = 2.0 * std::numbers::pi * rng.uniform();
    p.waypoints[at(n)] += Vec3(r * std::cos(a), r * std::sin(a), 0.0);
  }
}

/// Pairs carrying fewer than `bits` of offload are moved to local processing;
/// the edge work freed by the move is taken from the following slots.
void snap_small_offloads(Plan& p, const Scenario& s, double bits) {
  const int N = s.N();
  const double slot = s.time.slot_s();
  for (int n = 0; n < N; ++n) {
    double cycles = 0.0;
    for (int k = 0; k < s.K(); ++k) {
      const double d = p.d_off(n, k);
      if (d <= 0.0 || d >= bits) continue;
      const NodeSpec& node = s.nodes[at(k)];
      if (node.cycles_per_bit * (p.d_loc(n, k) + d) > slot * node.max_cpu_hz) continue;
      p.d_loc(n, k) += d;
      p.d_off(n, k) = 0.0;
      cycles += s.uav.cycles_per_bit * d;
    }
    for (int j = n + 1; j < N && cycles > 0.0; ++j) {
      const double take = std::min(cycles, slot * p.f_edg(j));
      p.f_edg(j) -= take / slot;
      cycles -= take;
    }
  }
}

}  // namespace

const char* to_string(PlanMode m) {
  switch (m) {
    case PlanMode::joint: return "joint";
    case PlanMode::all_local: return "all-local";
    case PlanMode::all_offload: return "all-offload";
    case PlanMode::non_robust: return "non-robust";
  }
  return "?";
}

PlanMode parse_plan_mode(const std::string& text) {
  for (PlanMode m : {PlanMode::joint, PlanMode::all_local, PlanMode::all_offload, PlanMode::non_robust}) {
    if (text == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown mode '" + text + "'");
}

const char* to_string(Block b) { return b == Block::trajectory ? "trajectory" : "power"; }

Scenario without_jitter(const Scenario& s) {
  Scenario d = s;
  d.robust.jitter_sigma_m = 0.0;
  return d;
}

Plan init_plan(const Scenario& s, const PlannerOptions& opts) {
  for (const std::string& w : precheck_capacity(s)) {
    if (w.rfind("local-only infeasible", 0) == 0) throw InfeasibleScenarioError(w);
  }
  check_straight_line(s);
  Plan p = straight_line(s);
  if (opts.init_perturb_seed != 0) perturb_waypoints(p, s, opts.init_perturb_seed);
  const double slot = s.time.slot_s();
  for (int k = 0; k < s.K(); ++k) {
    const NodeSpec& node = s.nodes[at(k)];
    const double share = std::min(node.data_demand_bits / s.N(), slot * node.max_cpu_hz / node.cycles_per_bit);
    p.d_loc.col(k).setConstant(share);
  }
  const double tau = std::min(opts.tau_min, 1.0 / s.K());
  p.tau.setConstant(tau);
  return p;
}

ScaState make_state(const Scenario& s, const Plan& plan, const PlannerOptions& opts) {
  (void)opts;
  const int N = s.N(), K = s.K();
  ScaState st;
  st.plan = plan;
  st.phi = Eigen::MatrixXd::Ones(N, K);
  st.varphi = Eigen::MatrixXd::Zero(N, K);
  st.psi = Eigen::MatrixXd::Ones(N, K);
  const bool explore = !offloads_anything(plan);
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < K; ++k) {
      const double ell = pair_ell(s, plan, n, k);
      const double p = plan.power(n, k);
      const double d = plan.d_off(n, k);
      if (d > 0.0 && p > 0.0) {
        const double lo = required_snr(d, plan.tau(n, k), s);
        st.phi(n, k) = std::min(std::max(lo, kMinTangent), p / ell);
      }
      const double pmax = s.nodes[at(k)].max_tx_power_w;
      const double p_eff = p > 0.0 ? p : (explore ? kExploreFraction : kTinyFraction) * pmax;
      st.varphi(n, k) = std::sqrt(p_eff);
      st.psi(n, k) = p_eff / ell;
    }
  }
  return st;
}

Subproblem build_trajectory_subproblem(const Scenario& s, const ScaState& state, const PlannerOptions& opts) {
  const Plan& plan = state.plan;
  check_dimensions(plan, s);
  const int N = s.N(), K = s.K();
  const double slot = s.time.slot_s();
  const double L = s.uav.v_max * slot;
  const double R2 = L * L;
  const double sigma = s.robust.jitter_sigma_m;

  Subproblem sp;
  sp.block = Block::trajectory;
  sp.wx = unset(N + 1, 1);
  sp.wy = unset(N + 1, 1);
  sp.tau = unset(N, K);
  sp.phi = unset(N, K);
  Builder b;

  const double inf = std::numeric_limits<double>::infinity();
  for (int n = 1; n < N; ++n) {
    const Vec3& q = plan.waypoints[at(n)];
    sp.wx(n) = b.add(-inf, inf, q.x() / L);
    sp.wy(n) = b.add(-inf, inf, q.y() / L);
  }
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) sp.tau(n, k) = b.add(opts.tau_min, inf, plan.tau(n, k));
  int phi_count = 0;
  for (int n = 0; n + 1 < N; ++n) {
    for (int k = 0; k < K; ++k) {
      if (plan.d_off(n, k) > 0.0) {
        sp.phi(n, k) = b.add(0.0, inf, 1.0);
        ++phi_count;
      }
    }
  }

  // objective: transmission energy plus the fixed remainder
  {
    std::vector<int> vars;
    std::vector<double> coeffs;
    for (int n = 0; n < N; ++n) {
      for (int k = 0; k < K; ++k) {
        if (plan.power(n, k) == 0.0) continue;
        vars.push_back(sp.tau(n, k));
        coeffs.push_back(slot * plan.power(n, k));
      }
    }
    const double rest = total_energy(plan, s).total_j - transmit_energy(plan, s);
    b.prog.objective.push_back(Term::linear(vars, coeffs, rest, "energy"));
  }

  for (int n = 0; n < N; ++n) {
    std::vector<int> vars;
    for (int k = 0; k < K; ++k) vars.push_back(sp.tau(n, k));
    b.prog.inequalities.push_back(
        Term::linear(vars, std::vector<double>(at(K), 1.0), -1.0, "tau_sum[" + std::to_string(n) + "]"));
  }

  auto point = [&](int n) {
    Point P;
    if (sp.wx(n) >= 0) {
      P.ix = sp.wx(n);
      P.iy = sp.wy(n);
    } else {
      P.x = plan.waypoints[at(n)].x() / L;
      P.y = plan.waypoints[at(n)].y() / L;
    }
    return P;
  };
  for (int n = 0; n < N; ++n) {
    b.prog.inequalities.push_back(hop_term(point(n), point(n + 1), L, R2, DistanceFn::speed(sigma, s.robust.trj(n)), n));
  }

  for (int n = 0; n + 1 < N; ++n) {
    for (int k = 0; k < K; ++k) {
      if (sp.phi(n, k) < 0) continue;
      const NodeSpec& node = s.nodes[at(k)];
      const double phi0 = state.phi(n, k);
      const double A = s.channel.ref_gain * plan.power(n, k) / (s.channel.noise_power_w * phi0);
      const double dz = s.uav.altitude_m - node.position.z();
      b.prog.inequalities.push_back(offload_term(sp.wx(n + 1), sp.wy(n + 1), sp.phi(n, k), L, node.position,
                                                 dz * dz, A, DistanceFn::offload(sigma, s.robust.off(n, k)), n, k));
      const double c = plan.d_off(n, k) / (slot * s.channel.bandwidth_hz);
      b.prog.inequalities.push_back(rate_term(sp.tau(n, k), sp.phi(n, k), c, phi0, false,
                                              "rate[" + std::to_string(n) + "," + std::to_string(k) + "]"));
    }
  }

  sp.full_decision_variables = (K + 2) * N - 2;
  sp.full_auxiliary_variables = (3 * K + 2) * N;
  sp.decision_variables = 2 * (N - 1) + N * K;
  sp.auxiliary_variables = phi_count;
  b.finish(sp);
  return sp;
}

Subproblem build_power_subproblem(const Scenario& s, const ScaState& state, const PlannerOptions& opts) {
  const Plan& plan = state.plan;
  check_dimensions(plan, s);
  const int N = s.N(), K = s.K();
  const double slot = s.time.slot_s();
  const PlanMode mode = opts.mode;
  const bool off = uses_offload(mode);
  const bool loc = uses_local(mode);
  const double inf = std::numeric_limits<double>::infinity();

  Subproblem sp;
  sp.block = Block::power;
  sp.f = unset(N, 1);
  sp.power = unset(N, K);
  sp.d_loc = unset(N, K);
  sp.d_off = unset(N, K);
  sp.varphi = unset(N, K);
  sp.psi = unset(N, K);
  Builder b;

  Eigen::MatrixXd lo_snr = Eigen::MatrixXd::Zero(N, K);
  if (off) {
    for (int n = 1; n < N; ++n) sp.f(n) = b.add(0.0, s.uav.max_cpu_hz / kGHz, plan.f_edg(n) / kGHz);
  }
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < K; ++k) {
      const NodeSpec& node = s.nodes[at(k)];
      if (loc) {
        sp.d_loc(n, k) = b.add(0.0, slot * node.max_cpu_hz / (node.cycles_per_bit * kMbit), plan.d_loc(n, k) / kMbit);
      }
      if (!off || n + 1 >= N) continue;
      sp.d_off(n, k) = b.add(0.0, inf, plan.d_off(n, k) / kMbit);
      sp.power(n, k) = b.add(0.0, node.max_tx_power_w, plan.power(n, k));
      const double v0 = state.varphi(n, k);
      sp.varphi(n, k) = b.add(0.0, inf, v0 > 0.0 ? std::min(1.0, std::sqrt(plan.power(n, k)) / v0) : 0.0);
      lo_snr(n, k) = required_snr(plan.d_off(n, k), plan.tau(n, k), s);
      sp.psi(n, k) = b.add(0.0, inf, lo_snr(n, k) / state.psi(n, k));
    }
  }

  // objective
  {
    std::vector<int> pv;
    std::vector<double> pc;
    for (int n = 0; n < N; ++n) {
      for (int k = 0; k < K; ++k) {
        const NodeSpec& node = s.nodes[at(k)];
        if (sp.d_loc(n, k) >= 0) {
          const double cm = node.cycles_per_bit * kMbit;
          b.prog.objective.push_back(
              cubic_term(sp.d_loc(n, k), node.capacitance * cm * cm * cm / (slot * slot), "local_energy"));
        }
        if (sp.power(n, k) >= 0) {
          pv.push_back(sp.power(n, k));
          pc.push_back(slot * plan.tau(n, k));
        }
      }
      if (sp.f(n) >= 0) {
        b.prog.objective.push_back(
            cubic_term(sp.f(n), s.chi * s.uav.capacitance * slot * kGHz * kGHz * kGHz, "edge_energy"));
      }
    }
    b.prog.objective.push_back(Term::linear(pv, pc, 0.0, "transmit_energy"));
  }

  // data completion
  for (int k = 0; k < K; ++k) {
    const double demand = s.nodes[at(k)].data_demand_bits / kMbit;
    const double scale = std::max(demand, 1.0);
    std::vector<int> vars;
    for (int n = 0; n < N; ++n) {
      if (sp.d_loc(n, k) >= 0) vars.push_back(sp.d_loc(n, k));
      if (sp.d_off(n, k) >= 0) vars.push_back(sp.d_off(n, k));
    }
    b.prog.inequalities.push_back(Term::linear(vars, std::vector<double>(vars.size(), -1.0 / scale), demand / scale,
                                               "data_completion[" + std::to_string(k) + "]"));
  }

  if (off) {
    // Edge work and offloads in units of 1e9 cycles, normalized by one slot at full speed.
    const double unit = slot * s.uav.max_cpu_hz / kGHz;
    const double c_off = s.uav.cycles_per_bit * kMbit / kGHz / unit;
    const double c_f = slot / unit;
    auto prefix = [&](int j, double sign, std::string label) {
      std::vector<int> vars;
      std::vector<double> coeffs;
      for (int i = 1; i <= j; ++i) {
        vars.push_back(sp.f(i));
        coeffs.push_back(sign * c_f);
      }
      for (int i = 0; i < j; ++i) {
        for (int k = 0; k < K; ++k) {
          if (sp.d_off(i, k) < 0) continue;
          vars.push_back(sp.d_off(i, k));
          coeffs.push_back(-sign * c_off);
        }
      }
      b.prog.inequalities.push_back(Term::linear(vars, coeffs, 0.0, std::move(label)));
    };
    for (int j = 1; j <= N - 2; ++j) prefix(j, 1.0, "causality[" + std::to_string(j) + "]");
    prefix(N - 1, -1.0, "completion");

    for (int n = 0; n + 1 < N; ++n) {
      for (int k = 0; k < K; ++k) {
        const std::string tag = "[" + std::to_string(n) + "," + std::to_string(k) + "]";
        const double v0 = state.varphi(n, k);
        const double psi0 = state.psi(n, k);
        b.prog.inequalities.push_back(square_minus_term(sp.varphi(n, k), sp.power(n, k), 1.0 / (v0 * v0), "power_aux" + tag));
        const double coef = kMbit / (plan.tau(n, k) * slot * s.channel.bandwidth_hz);
        b.prog.inequalities.push_back(rate_term(sp.d_off(n, k), sp.psi(n, k), coef, psi0, true, "snr_aux" + tag));
        // Tangent of varphi^2 / psi at (v0, psi0): 2 a varphi - a^2 psi >= ell.
        const double ell = pair_ell(s, plan, n, k);
        const double a = v0 / psi0;
        b.prog.inequalities.push_back(Term::linear({sp.varphi(n, k), sp.psi(n, k)},
                                                   {-2.0 * a * v0 / ell, a * a * psi0 / ell}, 1.0,
                                                   "snr_surrogate" + tag));
      }
    }
  }

  sp.full_decision_variables = (3 * K + 1) * N;
  sp.full_auxiliary_variables = 4 * K * N;
  int dec = 0, aux = 0;
  for (int n = 0; n < N; ++n) {
    dec += sp.f(n) >= 0;
    for (int k = 0; k < K; ++k) {
      dec += (sp.power(n, k) >= 0) + (sp.d_loc(n, k) >= 0) + (sp.d_off(n, k) >= 0);
      aux += (sp.varphi(n, k) >= 0) + (sp.psi(n, k) >= 0);
    }
  }
  sp.decision_variables = dec;
  sp.auxiliary_variables = aux;
  b.finish(sp);
  return sp;
}

Plan extract_plan(const Subproblem& sp, const Scenario& s, const ScaState& state, const Eigen::VectorXd& x,
                  ScaState* next) {
  Plan p = state.plan;
  const int N = s.N(), K = s.K();
  if (next) *next = state;
  if (sp.block == Block::trajectory) {
    const double L = s.uav.v_max * s.time.slot_s();
    for (int n = 1; n < N; ++n) {
      p.waypoints[at(n)] = Vec3(x[sp.wx(n)] * L, x[sp.wy(n)] * L, s.uav.altitude_m);
    }
    for (int n = 0; n < N; ++n) {
      for (int k = 0; k < K; ++k) {
        p.tau(n, k) = x[sp.tau(n, k)];
        if (next && sp.phi(n, k) >= 0) next->phi(n, k) = x[sp.phi(n, k)] * state.phi(n, k);
      }
    }
  } else {
    for (int n = 0; n < N; ++n) {
      p.f_edg(n) = sp.f(n) >= 0 ? x[sp.f(n)] * kGHz : 0.0;
      for (int k = 0; k < K; ++k) {
        p.d_loc(n, k) = sp.d_loc(n, k) >= 0 ? x[sp.d_loc(n, k)] * kMbit : 0.0;
        p.d_off(n, k) = sp.d_off(n, k) >= 0 ? x[sp.d_off(n, k)] * kMbit : 0.0;
        p.power(n, k) = sp.power(n, k) >= 0 ? x[sp.power(n, k)] : 0.0;
        if (next && sp.varphi(n, k) >= 0) {
          const double v = x[sp.varphi(n, k)] * state.varphi(n, k);
          next->varphi(n, k) = v;
          next->psi(n, k) = v * v / pair_ell(s, p, n, k);
        }
      }
    }
  }
  if (next) next->plan = p;
  return p;
}

ScaState run_sca(Block block, const Scenario& s, ScaState state, double eps, int max_iter,
                 const PlannerOptions& opts, std::vector<ScaTrace>* trace, int outer) {
  if (state.history.empty()) state.history.push_back(total_energy(state.plan, s).total_j);
  double e_old = state.history.back();
  if (trace) trace->push_back({outer, block, 0, e_old});
  solver::Options so;
  for (int it = 1; it <= max_iter; ++it) {
    const Subproblem sp = block == Block::trajectory ? build_trajectory_subproblem(s, state, opts)
                                                     : build_power_subproblem(s, state, opts);
    solver::Solution sol;
    try {
      const Eigen::VectorXd x0 = solver::find_interior_point(sp.program, &sp.current, so);
      sol = solver::solve(sp.program, x0, opts.solver_tol, so);
    } catch (const SolverError& e) {
      throw SolverError(std::string(to_string(block)) + " block, outer " + std::to_string(outer) + ", iteration " +
                        std::to_string(it) + ": " + e.what());
    }
    if (sol.status == solver::Status::unbounded) {
      throw SolverError(std::string(to_string(block)) + " block unbounded at outer " + std::to_string(outer));
    }
    ScaState next;
    Plan candidate = extract_plan(sp, s, state, sol.point, &next);
    if (block == Block::power && uses_local(opts.mode)) {
      snap_small_offloads(candidate, s, opts.snap_bits);
      next.plan = candidate;
    }
    const double e_new = total_energy(candidate, s).total_j;
    if (!(e_new <= e_old)) {
      // A surrogate step that does not lower the true energy ends the loop.
      state.history.push_back(e_old);
      if (trace) trace->push_back({outer, block, it, e_old});
      break;
    }
    next.history = std::move(state.history);
    state = std::move(next);
    state.history.push_back(e_new);
    if (trace) trace->push_back({outer, block, it, e_new});
    const bool small = e_old - e_new < std::max(eps * std::abs(e_old), 1e-9);
    e_old = e_new;
    if (small) break;
  }
  return state;
}

namespace {

/// Straight line with equal time shares and a power-block phase-I; used when
/// the all-local initializer does not apply.
Plan offload_init(const Scenario& s, const PlannerOptions& opts) {
  check_straight_line(s);
  Plan p = straight_line(s);
  if (opts.init_perturb_seed != 0) perturb_waypoints(p, s, opts.init_perturb_seed);
  p.tau.setConstant(1.0 / (s.K() + 1));
  ScaState st = make_state(s, p, opts);
  for (int n = 0; n < s.N(); ++n) {
    for (int k = 0; k < s.K(); ++k) {
      const double half = 0.5 * s.nodes[at(k)].max_tx_power_w;
      st.varphi(n, k) = std::sqrt(half);
      st.psi(n, k) = half / pair_ell(s, p, n, k);
    }
  }
  const Subproblem sp = build_power_subproblem(s, st, opts);
  Eigen::VectorXd x;
  try {
    x = solver::find_interior_point(sp.program, &sp.current);
  } catch (const SolverError& e) {
    throw InfeasibleScenarioError(std::string("no feasible offloading schedule: ") + e.what());
  }
  return extract_plan(sp, s, st, x);
}

}  // namespace

PlanResult plan(const Scenario& input, const PlannerOptions& opts) {
  validate(input);
  const Scenario s = opts.mode == PlanMode::non_robust ? without_jitter(input) : input;
  Plan start;
  if (opts.mode == PlanMode::all_offload) {
    start = offload_init(s, opts);
  } else if (opts.mode == PlanMode::all_local) {
    start = init_plan(s, opts);
  } else {
    try {
      start = init_plan(s, opts);
    } catch (const InfeasibleScenarioError&) {
      start = offload_init(s, opts);
    }
  }

  PlanResult out;
  ScaState state = make_state(s, start, opts);
  double e_prev = total_energy(start, s).total_j;
  out.outer_history.push_back(e_prev);
  for (int outer = 1; outer <= opts.max_outer; ++outer) {
    if (uses_offload(opts.mode)) {
      ScaState fresh = make_state(s, state.plan, opts);
      fresh.history = {e_prev};
      state = run_sca(Block::trajectory, s, std::move(fresh), opts.eps_trj, opts.max_sca, opts, &out.trace, outer);
    }
    ScaState fresh = make_state(s, state.plan, opts);
    fresh.history = {state.history.empty() ? e_prev : state.history.back()};
    state = run_sca(Block::power, s, std::move(fresh), opts.eps_pwr, opts.max_sca, opts, &out.trace, outer);
    const double e_new = state.history.back();
    out.outer_history.push_back(e_new);
    out.outer_iterations = outer;
    if (e_prev - e_new < std::max(opts.eps_outer * std::abs(e_prev), 1e-9)) {
      out.converged = true;
      break;
    }
    e_prev = e_new;
  }
  out.plan = state.plan;
  out.energy = total_energy(out.plan, input);
  return out;
}

PlanResult baseline_plan(const Scenario& s, PlanMode mode, PlannerOptions opts) {
  opts.mode = mode;
  return plan(s, opts);
}

RobustCheck check_plan_robust(const Plan& p, const Scenario& s) {
  check_dimensions(p, s);
  RobustCheck r;
  r.worst_speed = INFINITY;
  r.worst_offload = INFINITY;
  const double reach = s.uav.v_max * s.time.slot_s();
  const double sigma = s.robust.jitter_sigma_m;
  for (int n = 0; n < s.N(); ++n) {
    const double hop2 = (p.waypoints[at(n + 1)] - p.waypoints[at(n)]).squaredNorm();
    const double m = reach * reach - robust_speed_lhs(hop2, sigma, s.robust.trj(n));
    if (m < r.worst_speed) {
      r.worst_speed = m;
      r.speed_slot = n;
    }
    for (int k = 0; k < s.K(); ++k) {
      if (!(p.d_off(n, k) > 0.0)) continue;
      const double snr = required_snr(p.d_off(n, k), p.tau(n, k), s);
      const double allowed = p.power(n, k) > 0.0
                                 ? s.channel.ref_gain * p.power(n, k) / (s.channel.noise_power_w * snr)
                                 : -INFINITY;
      const double r2 = (p.waypoints[at(n + 1)] - s.nodes[at(k)].position).squaredNorm();
      const double m2 = allowed - robust_offload_lhs(r2, sigma, s.robust.off(n, k));
      if (m2 < r.worst_offload) {
        r.worst_offload = m2;
        r.offload_slot = n;
        r.offload_node = k;
      }
    }
  }
  return r;
}

}  // namespace uavedge
