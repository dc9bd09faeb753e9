#pragma once

#include <Eigen/Core>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace uavedge::solver {

/// Smooth function of a few decision variables.
///
/// `eval(x, grad, hess)` receives the values of `vars` (in order) and returns
/// the function value. When `grad` is non-empty it must receive the partial
/// derivatives; when `hess` is non-empty it must receive the dense
/// column-major Hessian (vars.size()^2 entries). A non-finite value marks a
/// point outside the function's domain.
struct Term {
  using Eval = std::function<double(std::span<const double>, std::span<double>, std::span<double>)>;

  std::vector<int> vars;
  Eval eval;
  bool affine = false;
  std::string label;

  /// sum_j coeffs[j] x[vars[j]] + constant
  static Term linear(std::vector<int> vars, std::vector<double> coeffs, double constant,
                     std::string label = {});
};

/// min sum(objective)  s.t.  g_i(x) <= 0,  eq_matrix x = eq_offset,  lower <= x <= upper.
/// Every objective term and inequality must be convex.
struct ConvexProgram {
  int dimension = 0;
  std::vector<Term> objective;
  std::vector<Term> inequalities;
  Eigen::MatrixXd eq_matrix;  // rows x dimension, possibly empty
  Eigen::VectorXd eq_offset;
  Eigen::VectorXd lower;  // empty = unbounded; entries may be -inf
  Eigen::VectorXd upper;  // empty = unbounded; entries may be +inf

  double lower_bound(int j) const {
    return lower.size() ? lower[j] : -std::numeric_limits<double>::infinity();
  }
  double upper_bound(int j) const {
    return upper.size() ? upper[j] : std::numeric_limits<double>::infinity();
  }
  int equality_count() const { return static_cast<int>(eq_matrix.rows()); }
};

enum class Status { converged, max_iterations, infeasible, unbounded };

const char* to_string(Status s);

struct Multipliers {
  Eigen::VectorXd inequality;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd equality;
};

struct TracePoint {
  int iteration = 0;
  double objective = 0.0;
  double gap = 0.0;
};

struct Solution {
  Eigen::VectorXd point;
  double objective_value = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  Status status = Status::max_iterations;
  Multipliers multipliers;
  std::vector<TracePoint> trace;
};

struct Options {
  double t0 = 1.0;
  double mu = 10.0;
  double newton_tol = 1e-9;  // on lambda^2 / 2
  double alpha = 0.25;
  double beta = 0.5;
  double feasibility_tol = 1e-9;
  int max_newton_per_centering = 200;
  int max_newton_total = 5000;
  /// Inequalities touching more variables than this enter the Newton system
  /// as low-rank updates instead of dense blocks.
  int low_rank_threshold = 48;
  bool record_trace = false;
};

double objective_value(const ConvexProgram& p, const Eigen::VectorXd& x);

/// Largest inequality value and bound violation at x (<= 0 means feasible).
double max_violation(const ConvexProgram& p, const Eigen::VectorXd& x);

/// Normalizes the equality system: drops linearly dependent rows, and throws
/// SolverError when the system is inconsistent.
void preprocess_equalities(ConvexProgram& p);

/// Strictly feasible point (all g_i < 0, bounds strict, equalities satisfied).
/// Starts from `hint` when given; otherwise from a bound-derived guess, and
/// minimizes the maximum infeasibility. Throws SolverError (infeasible) when
/// the phase-I optimum is not negative.
Eigen::VectorXd find_interior_point(const ConvexProgram& p, const Eigen::VectorXd* hint = nullptr,
                                    const Options& opts = {});

/// Barrier method from a strictly feasible `start`; stops when the duality
/// gap estimate m / t <= tol.
Solution solve(const ConvexProgram& p, const Eigen::VectorXd& start, double tol,
               const Options& opts = {});

/// max of the relative stationarity residual, |lambda_i g_i|, constraint
/// violations and negative multipliers.
double check_kkt(const ConvexProgram& p, const Eigen::VectorXd& x, const Multipliers& m);

/// Iteration trace as CSV (iteration,objective,gap).
void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace);

/// Central-difference check of every term's gradient and Hessian at x. Each
/// coordinate is differenced with steps rel_step * {0.1, 1, 10, 100, 1000}
/// (scaled by max(1, |x_j|)); the smallest error over steps staying in the
/// domain is kept.
struct DerivativeCheck {
  double max_gradient_error = 0.0;  // relative
  double max_hessian_error = 0.0;   // relative
  std::string worst_label;
  int terms_checked = 0;
};
DerivativeCheck check_derivatives(const ConvexProgram& p, const Eigen::VectorXd& x,
                                  double rel_step = 1e-6);

}  // namespace uavedge::solver
