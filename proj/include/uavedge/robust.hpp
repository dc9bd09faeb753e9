#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>

#include "uavedge/scenario.hpp"

namespace uavedge {

/// Data of the chance constraint  P{ x^T A x + 2 b^T x + c >= 0 } >= 1 - rho
/// with x standard Gaussian in R^3.
struct BernsteinTriple {
  Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
  Vec3 b = Vec3::Zero();
  double c = 0.0;
  double rho = 0.1;
};

/// Optimal value of the deterministic Bernstein counterpart; the chance
/// constraint is guaranteed when margin >= 0.
struct RobustMargin {
  double margin = 0.0;
  double mu_star = 0.0;
  double nu_star = 0.0;
};

/// Speed condition between consecutive waypoints under independent jitter.
/// `slot` selects a per-slot violation budget; -1 uses the uniform one.
BernsteinTriple trajectory_triple(const Vec3& q_prev, const Vec3& q_next, const Scenario& s,
                                  int slot = -1);

/// Offloading condition at UAV position q for node position w. The required
/// channel gain (2^(dN/(tau T B)) - 1) sigma^2 / p must be >= 0; zero encodes
/// a pair that offloads nothing and yields c = +inf.
BernsteinTriple offload_triple(const Vec3& q, const Vec3& w, double required_gain, const Scenario& s,
                               int slot = -1, int node = -1);

/// Closed-form maximization over the Bernstein auxiliaries. Only isotropic
/// A = -a I (a >= 0) is supported; anything else throws std::invalid_argument.
RobustMargin bernstein_margin(const BernsteinTriple& t);

/// sqrt(-2 ln rho), the coefficient of mu in the counterpart.
double bernstein_mu_coefficient(double rho);

/// Squared-distance left-hand sides of the reduced robust constraints,
/// obtained by eliminating (mu, nu) in closed form:
///   speed:    |dq|^2 + k sqrt(12 e^4 + 4 e^2 |dq|^2) + 6 e^2 - 2 e^2 ln rho <= (V T/N)^2
///   offload:  r^2    + k sqrt( 3 e^4 + 2 e^2 r^2)     + 3 e^2 -   e^2 ln rho <= allowed r^2
/// with e the jitter deviation and k = sqrt(-2 ln rho).
double robust_speed_lhs(double hop_sq, double sigma, double rho);
double robust_offload_lhs(double dist_sq, double sigma, double rho);

/// Largest hop length D with non-negative robust speed margin (bisection, 1e-9 m).
double effective_max_distance(const Scenario& s, int slot = -1);

/// Monte Carlo frequency of `violated` over jitter draws. Each sample draws
/// `points` i.i.d. N(0, sigma^2 I_3) offsets from the stream (seed, sample).
double mc_violation_estimate(const std::function<bool(std::span<const Vec3>)>& violated, int points,
                             double sigma, int samples, std::uint64_t seed);

}  // namespace uavedge
