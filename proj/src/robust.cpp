#include "uavedge/robust.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "uavedge/rng.hpp"

namespace uavedge {

namespace {

double uniform_rho_trj(const Scenario& s, int slot) {
  return slot < 0 ? s.robust.rho_trj : s.robust.trj(slot);
}

}  // namespace

BernsteinTriple trajectory_triple(const Vec3& q_prev, const Vec3& q_next, const Scenario& s,
                                  int slot) {
  const double e = s.robust.jitter_sigma_m;
  const Vec3 hop = q_next - q_prev;
  const double reach = s.uav.v_max * s.time.slot_s();
  BernsteinTriple t;
  t.A = -2.0 * e * e * Eigen::Matrix3d::Identity();
  t.b = -std::sqrt(2.0) * e * hop;
  t.c = -hop.squaredNorm() + reach * reach;
  t.rho = uniform_rho_trj(s, slot);
  return t;
}

BernsteinTriple offload_triple(const Vec3& q, const Vec3& w, double required_gain, const Scenario& s,
                               int slot, int node) {
  if (!(required_gain >= 0.0)) throw std::invalid_argument("required gain must be non-negative");
  const double e = s.robust.jitter_sigma_m;
  BernsteinTriple t;
  t.A = -e * e * Eigen::Matrix3d::Identity();
  t.b = -e * (q - w);
  t.c = required_gain > 0.0 ? -(q - w).squaredNorm() + s.channel.ref_gain / required_gain
                            : std::numeric_limits<double>::infinity();
  t.rho = (slot < 0 || node < 0) ? s.robust.rho_off : s.robust.off(slot, node);
  return t;
}

double bernstein_mu_coefficient(double rho) { return std::sqrt(-2.0 * std::log(rho)); }

RobustMargin bernstein_margin(const BernsteinTriple& t) {
  if (!(t.rho > 0.0 && t.rho < 1.0)) throw std::invalid_argument("violation budget must lie in (0,1)");
  const double a = -t.A(0, 0);
  const double scale = std::max(1.0, std::abs(a));
  if ((t.A + a * Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-12 * scale || a < 0.0) {
    throw std::invalid_argument("only A = -a I with a >= 0 is supported");
  }
  RobustMargin m;
  m.nu_star = a;
  m.mu_star = std::sqrt(3.0 * a * a + 2.0 * t.b.squaredNorm());
  m.margin = t.A.trace() - bernstein_mu_coefficient(t.rho) * m.mu_star + std::log(t.rho) * m.nu_star + t.c;
  return m;
}

double robust_speed_lhs(double hop_sq, double sigma, double rho) {
  const double e2 = sigma * sigma;
  return hop_sq + bernstein_mu_coefficient(rho) * std::sqrt(12.0 * e2 * e2 + 4.0 * e2 * hop_sq) +
         6.0 * e2 - 2.0 * e2 * std::log(rho);
}

double robust_offload_lhs(double dist_sq, double sigma, double rho) {
  const double e2 = sigma * sigma;
  return dist_sq + bernstein_mu_coefficient(rho) * std::sqrt(3.0 * e2 * e2 + 2.0 * e2 * dist_sq) +
         3.0 * e2 - e2 * std::log(rho);
}

double effective_max_distance(const Scenario& s, int slot) {
  const double reach = s.uav.v_max * s.time.slot_s();
  const Vec3 origin = Vec3::Zero();
  auto margin_at = [&](double d) {
    return bernstein_margin(trajectory_triple(origin, Vec3(d, 0.0, 0.0), s, slot)).margin;
  };
  if (margin_at(0.0) < 0.0) return 0.0;
  double lo = 0.0;
  double hi = reach;
  if (margin_at(hi) >= 0.0) return hi;
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    if (margin_at(mid) >= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double mc_violation_estimate(const std::function<bool(std::span<const Vec3>)>& violated, int points,
                             double sigma, int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  std::vector<Vec3> jitter(static_cast<size_t>(points));
  long long count = 0;
  for (int i = 0; i < samples; ++i) {
    RandomStream rng(seed, static_cast<std::uint64_t>(i));
    for (Vec3& v : jitter) {
      for (int c = 0; c < 3; ++c) v[c] = sigma * rng.normal();
    }
    if (violated(jitter)) ++count;
  }
  return static_cast<double>(count) / samples;
}

}  // namespace uavedge
