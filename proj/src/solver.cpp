#include "uavedge/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "uavedge/errors.hpp"

namespace uavedge::solver {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using SpMat = Eigen::SparseMatrix<double>;

// Scratch storage reused across term evaluations.
struct Scratch {
  std::vector<double> x, g, h;
  void fit(size_t v) {
    if (x.size() < v) x.resize(v);
    if (g.size() < v) g.resize(v);
    if (h.size() < v * v) h.resize(v * v);
  }
};

double eval_value(const Term& term, const Eigen::VectorXd& x, Scratch& s) {
  const size_t v = term.vars.size();
  s.fit(v);
  for (size_t j = 0; j < v; ++j) s.x[j] = x[term.vars[j]];
  return term.eval(std::span<const double>(s.x.data(), v), {}, {});
}

double eval_full(const Term& term, const Eigen::VectorXd& x, Scratch& s, bool hessian) {
  const size_t v = term.vars.size();
  s.fit(v);
  for (size_t j = 0; j < v; ++j) s.x[j] = x[term.vars[j]];
  std::fill_n(s.g.begin(), v, 0.0);
  if (hessian) std::fill_n(s.h.begin(), v * v, 0.0);
  return term.eval(std::span<const double>(s.x.data(), v), std::span<double>(s.g.data(), v),
                   hessian ? std::span<double>(s.h.data(), v * v) : std::span<double>());
}

int finite_bound_count(const ConvexProgram& p) {
  int m = 0;
  for (int j = 0; j < p.dimension; ++j) {
    if (std::isfinite(p.lower_bound(j))) ++m;
    if (std::isfinite(p.upper_bound(j))) ++m;
  }
  return m;
}

bool strictly_inside(const ConvexProgram& p, const Eigen::VectorXd& x, Scratch& s) {
  for (int j = 0; j < p.dimension; ++j) {
    if (!(x[j] > p.lower_bound(j)) || !(x[j] < p.upper_bound(j))) return false;
  }
  for (const Term& g : p.inequalities) {
    if (!(eval_value(g, x, s) < 0.0)) return false;
  }
  return true;
}

// Newton system for  t f0(x) + phi(x)  restricted to  A x = b.
class BarrierNewton {
 public:
  BarrierNewton(const ConvexProgram& p, const Options& o) : p_(p), opts_(o) {
    n_ = p.dimension;
  }

  // Barrier objective value; +inf outside the strict interior.
  double value(const Eigen::VectorXd& x, double t) {
    double f = 0.0;
    for (const Term& term : p_.objective) f += eval_value(term, x, scratch_);
    if (!std::isfinite(f)) return kInf;
    double phi = 0.0;
    for (const Term& g : p_.inequalities) {
      const double v = eval_value(g, x, scratch_);
      if (!(v < 0.0)) return kInf;
      phi -= std::log(-v);
    }
    for (int j = 0; j < n_; ++j) {
      const double l = p_.lower_bound(j), u = p_.upper_bound(j);
      if (std::isfinite(l)) {
        if (!(x[j] > l)) return kInf;
        phi -= std::log(x[j] - l);
      }
      if (std::isfinite(u)) {
        if (!(x[j] < u)) return kInf;
        phi -= std::log(u - x[j]);
      }
    }
    return t * f + phi;
  }

  // Computes the Newton step at x; returns false when the system cannot be solved.
  bool step(const Eigen::VectorXd& x, double t, Eigen::VectorXd& dx, double& lambda_sq) {
    assemble(x, t);
    if (!factor()) return false;
    const Eigen::VectorXd g_hat = scale_.cwiseProduct(grad_);
    Eigen::VectorXd dy;
    const int r = p_.equality_count();
    if (r == 0) {
      dy = -apply_inverse(g_hat);
      nu_.resize(0);
    } else {
      const Eigen::MatrixXd a_hat = p_.eq_matrix * scale_.asDiagonal();
      const Eigen::MatrixXd m_at = apply_inverse(Eigen::MatrixXd(a_hat.transpose()));
      const Eigen::MatrixXd schur = a_hat * m_at;
      const Eigen::VectorXd m_g = apply_inverse(g_hat);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(schur);
      if (ldlt.info() != Eigen::Success) return false;
      nu_ = ldlt.solve(-(a_hat * m_g));
      dy = -(m_g + m_at * nu_);
    }
    dx = scale_.cwiseProduct(dy);
    lambda_sq = -grad_.dot(dx);
    return dx.allFinite() && std::isfinite(lambda_sq);
  }

  const Eigen::VectorXd& gradient() const { return grad_; }
  const Eigen::VectorXd& equality_weights() const { return nu_; }

 private:
  void assemble(const Eigen::VectorXd& x, double t) {
    grad_ = Eigen::VectorXd::Zero(n_);
    triplets_.clear();
    low_rank_.clear();
    low_rank_weights_.clear();
    for (int j = 0; j < n_; ++j) triplets_.emplace_back(j, j, 0.0);

    auto add_block = [&](const Term& term, double wg, double wh, bool outer) {
      const size_t v = term.vars.size();
      for (size_t a = 0; a < v; ++a) grad_[term.vars[a]] += wg * scratch_.g[a];
      if (term.affine && !outer) return;
      for (size_t c = 0; c < v; ++c) {
        for (size_t a = 0; a < v; ++a) {
          const int row = term.vars[a], col = term.vars[c];
          if (row < col) continue;
          double h = term.affine ? 0.0 : wh * scratch_.h[c * v + a];
          if (outer) h += wg * wg * scratch_.g[a] * scratch_.g[c];
          if (outer || !term.affine) triplets_.emplace_back(row, col, h);
        }
      }
    };

    for (const Term& term : p_.objective) {
      eval_full(term, x, scratch_, !term.affine);
      add_block(term, t, t, false);
    }
    for (const Term& g : p_.inequalities) {
      const double v = eval_full(g, x, scratch_, !g.affine);
      const double inv = 1.0 / (-v);
      if (static_cast<int>(g.vars.size()) <= opts_.low_rank_threshold) {
        add_block(g, inv, inv, true);
      } else {
        // Long rows: the outer product enters through Woodbury.
        add_block(g, inv, inv, false);
        Eigen::VectorXd col = Eigen::VectorXd::Zero(n_);
        for (size_t a = 0; a < g.vars.size(); ++a) col[g.vars[a]] += scratch_.g[a];
        low_rank_.push_back(std::move(col));
        low_rank_weights_.push_back(inv * inv);
      }
    }
    for (int j = 0; j < n_; ++j) {
      const double l = p_.lower_bound(j), u = p_.upper_bound(j);
      if (std::isfinite(l)) {
        const double d = x[j] - l;
        grad_[j] -= 1.0 / d;
        triplets_.emplace_back(j, j, 1.0 / (d * d));
      }
      if (std::isfinite(u)) {
        const double d = u - x[j];
        grad_[j] += 1.0 / d;
        triplets_.emplace_back(j, j, 1.0 / (d * d));
      }
    }
  }

  bool factor() {
    SpMat h(n_, n_);
    h.setFromTriplets(triplets_.begin(), triplets_.end());
    // Jacobi scaling including the low-rank diagonal.
    Eigen::VectorXd diag = h.diagonal();
    for (size_t i = 0; i < low_rank_.size(); ++i) {
      diag += low_rank_weights_[i] * low_rank_[i].cwiseAbs2();
    }
    scale_.resize(n_);
    for (int j = 0; j < n_; ++j) {
      scale_[j] = diag[j] > 1e-300 ? 1.0 / std::sqrt(diag[j]) : 1.0;
    }
    h_scaled_ = scale_.asDiagonal() * h * scale_.asDiagonal();
    h_scaled_.makeCompressed();
    if (!pattern_ready_) {
      llt_.analyzePattern(h_scaled_);
      pattern_ready_ = true;
    }
    double reg = 0.0;
    for (int attempt = 0; attempt < 12; ++attempt) {
      if (reg > 0.0) {
        SpMat shifted = h_scaled_;
        for (int j = 0; j < n_; ++j) shifted.coeffRef(j, j) += reg;
        llt_.factorize(shifted);
      } else {
        llt_.factorize(h_scaled_);
      }
      if (llt_.info() == Eigen::Success) break;
      reg = reg == 0.0 ? 1e-12 : reg * 100.0;
    }
    if (llt_.info() != Eigen::Success) return false;

    const int r = static_cast<int>(low_rank_.size());
    if (r > 0) {
      u_hat_.resize(n_, r);
      for (int i = 0; i < r; ++i) u_hat_.col(i) = scale_.cwiseProduct(low_rank_[i]);
      z_ = llt_.solve(u_hat_);
      Eigen::MatrixXd cap = u_hat_.transpose() * z_;
      for (int i = 0; i < r; ++i) cap(i, i) += 1.0 / low_rank_weights_[static_cast<size_t>(i)];
      cap_llt_.compute(cap);
      if (cap_llt_.info() != Eigen::Success) return false;
    } else {
      u_hat_.resize(n_, 0);
      z_.resize(n_, 0);
    }
    return true;
  }

  template <typename M>
  Eigen::MatrixXd apply_inverse(const M& rhs) const {
    Eigen::MatrixXd y = llt_.solve(Eigen::MatrixXd(rhs));
    if (u_hat_.cols() > 0) y -= z_ * cap_llt_.solve(u_hat_.transpose() * y);
    return y;
  }

  const ConvexProgram& p_;
  const Options& opts_;
  int n_ = 0;
  Scratch scratch_;
  Eigen::VectorXd grad_, scale_, nu_;
  std::vector<Eigen::Triplet<double>> triplets_;
  std::vector<Eigen::VectorXd> low_rank_;
  std::vector<double> low_rank_weights_;
  SpMat h_scaled_;
  Eigen::SimplicialLLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> llt_;
  bool pattern_ready_ = false;
  Eigen::MatrixXd u_hat_, z_;
  Eigen::LLT<Eigen::MatrixXd> cap_llt_;
};

Multipliers barrier_multipliers(const ConvexProgram& p, const Eigen::VectorXd& x, double t,
                                const Eigen::VectorXd& nu_scaled) {
  Scratch s;
  Multipliers m;
  m.inequality.resize(static_cast<int>(p.inequalities.size()));
  for (size_t i = 0; i < p.inequalities.size(); ++i) {
    m.inequality[static_cast<int>(i)] = 1.0 / (-t * eval_value(p.inequalities[i], x, s));
  }
  m.lower = Eigen::VectorXd::Zero(p.dimension);
  m.upper = Eigen::VectorXd::Zero(p.dimension);
  for (int j = 0; j < p.dimension; ++j) {
    if (std::isfinite(p.lower_bound(j))) m.lower[j] = 1.0 / (t * (x[j] - p.lower_bound(j)));
    if (std::isfinite(p.upper_bound(j))) m.upper[j] = 1.0 / (t * (p.upper_bound(j) - x[j]));
  }
  m.equality = nu_scaled.size() ? Eigen::VectorXd(nu_scaled / t)
                                : Eigen::VectorXd::Zero(p.equality_count());
  return m;
}

// Least-squares multipliers for the near-active set. The barrier estimates
// 1/(-t g_i) lose accuracy once g_i ~ 1/t is dominated by rounding in g_i.
Multipliers refine_multipliers(const ConvexProgram& p, const Eigen::VectorXd& x, double t,
                               const Multipliers& barrier) {
  const int n = p.dimension;
  const double cut = 1.0 / std::sqrt(t);
  Scratch s;
  Eigen::VectorXd g0 = Eigen::VectorXd::Zero(n);
  for (const Term& term : p.objective) {
    eval_full(term, x, s, false);
    for (size_t a = 0; a < term.vars.size(); ++a) g0[term.vars[a]] += s.g[a];
  }
  // Columns: active inequalities, active lower bounds, active upper bounds, equalities.
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<std::pair<int, int>> slots;  // (kind, index)
  int col = 0;
  for (size_t i = 0; i < p.inequalities.size(); ++i) {
    if (!(barrier.inequality[static_cast<int>(i)] >= cut)) continue;
    const Term& g = p.inequalities[i];
    eval_full(g, x, s, false);
    for (size_t a = 0; a < g.vars.size(); ++a) trip.emplace_back(g.vars[a], col, s.g[a]);
    slots.emplace_back(0, static_cast<int>(i));
    ++col;
  }
  for (int j = 0; j < n; ++j) {
    if (barrier.lower[j] >= cut) {
      trip.emplace_back(j, col++, -1.0);
      slots.emplace_back(1, j);
    }
    if (barrier.upper[j] >= cut) {
      trip.emplace_back(j, col++, 1.0);
      slots.emplace_back(2, j);
    }
  }
  for (int r = 0; r < p.equality_count(); ++r) {
    for (int j = 0; j < n; ++j) {
      if (p.eq_matrix(r, j) != 0.0) trip.emplace_back(j, col, p.eq_matrix(r, j));
    }
    slots.emplace_back(3, r);
    ++col;
  }
  Multipliers out = barrier;
  if (col == 0) return out;
  SpMat J(n, col);
  J.setFromTriplets(trip.begin(), trip.end());
  const Eigen::MatrixXd G = Eigen::MatrixXd(SpMat(J.transpose() * J));
  const Eigen::VectorXd rhs = -(J.transpose() * g0);
  Eigen::VectorXd scale = G.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd Gs = scale.asDiagonal() * G * scale.asDiagonal();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(Gs + 1e-14 * Eigen::MatrixXd::Identity(col, col));
  if (ldlt.info() != Eigen::Success) return out;
  const Eigen::VectorXd y = scale.cwiseProduct(ldlt.solve(scale.cwiseProduct(rhs)));
  if (!y.allFinite()) return out;
  out.inequality.setZero();
  out.lower.setZero();
  out.upper.setZero();
  for (int c = 0; c < col; ++c) {
    const auto [kind, idx] = slots[static_cast<size_t>(c)];
    const double v = kind == 3 ? y[c] : std::max(0.0, y[c]);
    if (kind == 0) out.inequality[idx] = v;
    if (kind == 1) out.lower[idx] = v;
    if (kind == 2) out.upper[idx] = v;
    if (kind == 3) out.equality[idx] = v;
  }
  return out;
}

using StopPredicate = std::function<bool(const Eigen::VectorXd&)>;

Solution barrier_minimize(const ConvexProgram& p, const Eigen::VectorXd& start, double tol,
                          const Options& opts, const StopPredicate& early_stop) {
  Solution sol;
  sol.point = start;
  const int m = static_cast<int>(p.inequalities.size()) + finite_bound_count(p);
  BarrierNewton newton(p, opts);
  Eigen::VectorXd x = start;
  const double f_start = objective_value(p, start);
  double t = m == 0 ? 1.0 : opts.t0;
  int total = 0;
  Eigen::VectorXd dx, nu;
  bool stalled = false;

  auto centering = [&](int max_steps, bool polish) {
    double F = newton.value(x, t);
    for (int it = 0; it < max_steps && total < opts.max_newton_total; ++it) {
      double lambda_sq = 0.0;
      if (!newton.step(x, t, dx, lambda_sq)) {
        stalled = true;
        return;
      }
      nu = newton.equality_weights();
      if (!polish && lambda_sq / 2.0 <= opts.newton_tol) return;
      if (polish && lambda_sq <= 1e-26) return;
      double step = 1.0;
      const double slope = -lambda_sq;
      Eigen::VectorXd trial;
      double F_trial = kInf;
      const double floor = 1e-13 * std::abs(F);
      while (step > 1e-20) {
        trial = x + step * dx;
        F_trial = newton.value(trial, t);
        if (F_trial <= F + opts.alpha * step * slope + floor) break;
        step *= opts.beta;
      }
      if (!(step > 1e-20)) {
        stalled = true;
        return;
      }
      ++total;
      if (step * dx.lpNorm<Eigen::Infinity>() > 1e10 * (1.0 + x.lpNorm<Eigen::Infinity>()) ||
          objective_value(p, trial) < -1e25) {
        x = trial;
        sol.status = Status::unbounded;
        return;
      }
      x = trial;
      F = F_trial;
      if (early_stop && early_stop(x)) return;
    }
  };

  auto certify = [&]() {
    sol.point = x;
    sol.iterations = total;
    sol.multipliers = barrier_multipliers(p, x, t, nu);
    sol.kkt_residual = check_kkt(p, x, sol.multipliers);
    if (sol.kkt_residual > tol) {
      Multipliers ls = refine_multipliers(p, x, t, sol.multipliers);
      const double r = check_kkt(p, x, ls);
      if (r < sol.kkt_residual) {
        sol.multipliers = std::move(ls);
        sol.kkt_residual = r;
      }
    }
    return sol.kkt_residual <= tol;
  };

  sol.status = Status::max_iterations;
  int extra_rounds = 0;
  while (total < opts.max_newton_total) {
    centering(opts.max_newton_per_centering, false);
    const double gap = m == 0 ? 0.0 : m / t;
    if (opts.record_trace) sol.trace.push_back({total, objective_value(p, x), gap});
    if (sol.status == Status::unbounded) break;
    if (early_stop) {
      if (early_stop(x)) {
        sol.status = Status::converged;
        break;
      }
      if (gap <= tol) break;
    } else if (gap <= tol || m == 0 || stalled) {
      // Certificate check; rounding near the boundary may need a polish or
      // a few more barrier rounds.
      if (certify()) {
        sol.status = Status::converged;
        break;
      }
      centering(10, true);
      if (certify()) {
        sol.status = Status::converged;
        break;
      }
      if (m == 0 || ++extra_rounds > 3) break;
    }
    stalled = false;
    t *= opts.mu;
  }
  if (sol.status != Status::converged && !early_stop) certify();
  sol.point = x;
  sol.iterations = total;
  sol.objective_value = objective_value(p, x);
  if (sol.status != Status::unbounded && sol.objective_value > f_start + 1e-12 * (1.0 + std::abs(f_start))) {
    // Never hand back something worse than the start point.
    sol.point = start;
    sol.objective_value = f_start;
    sol.status = Status::max_iterations;
  }
  return sol;
}

// Wraps g(x) into g(x) - s with s appended as variable index `s_index`.
Term shifted_term(const Term& g, int s_index) {
  Term out;
  out.vars = g.vars;
  out.vars.push_back(s_index);
  out.affine = g.affine;
  out.label = g.label;
  const size_t v = g.vars.size();
  Term::Eval inner = g.eval;
  out.eval = [inner, v](std::span<const double> x, std::span<double> grad, std::span<double> hess) {
    std::span<double> g_in = grad.empty() ? grad : grad.subspan(0, v);
    std::span<double> h_in = hess.empty() ? hess : hess.subspan(0, v * v);
    const double val = inner(x.subspan(0, v), g_in, h_in);
    if (!grad.empty()) grad[v] = -1.0;
    if (!hess.empty()) {
      const size_t w = v + 1;
      for (size_t c = v; c-- > 0;) {
        for (size_t r = v; r-- > 0;) hess[c * w + r] = hess[c * v + r];
      }
      for (size_t i = 0; i < w; ++i) {
        hess[v * w + i] = 0.0;
        hess[i * w + v] = 0.0;
      }
    }
    return val - x[v];
  };
  return out;
}

}  // namespace

const char* to_string(Status s) {
  switch (s) {
    case Status::converged:
      return "converged";
    case Status::max_iterations:
      return "max-iterations";
    case Status::infeasible:
      return "infeasible";
    case Status::unbounded:
      return "unbounded";
  }
  return "unknown";
}

Term Term::linear(std::vector<int> vars, std::vector<double> coeffs, double constant,
                  std::string label) {
  if (vars.size() != coeffs.size()) throw DimensionError("linear term: vars and coeffs differ in size");
  Term t;
  t.vars = std::move(vars);
  t.affine = true;
  t.label = std::move(label);
  t.eval = [coeffs = std::move(coeffs), constant](std::span<const double> x, std::span<double> g,
                                                  std::span<double>) {
    double v = constant;
    for (size_t j = 0; j < coeffs.size(); ++j) v += coeffs[j] * x[j];
    if (!g.empty()) std::copy(coeffs.begin(), coeffs.end(), g.begin());
    return v;
  };
  return t;
}

double objective_value(const ConvexProgram& p, const Eigen::VectorXd& x) {
  Scratch s;
  double f = 0.0;
  for (const Term& term : p.objective) f += eval_value(term, x, s);
  return f;
}

double max_violation(const ConvexProgram& p, const Eigen::VectorXd& x) {
  Scratch s;
  double worst = -kInf;
  for (const Term& g : p.inequalities) {
    const double v = eval_value(g, x, s);
    worst = std::isnan(v) ? kInf : std::max(worst, v);
  }
  for (int j = 0; j < p.dimension; ++j) {
    if (std::isfinite(p.lower_bound(j))) worst = std::max(worst, p.lower_bound(j) - x[j]);
    if (std::isfinite(p.upper_bound(j))) worst = std::max(worst, x[j] - p.upper_bound(j));
  }
  if (p.equality_count() > 0) {
    const double r = (p.eq_matrix * x - p.eq_offset).lpNorm<Eigen::Infinity>();
    worst = std::max(worst, r);
  }
  return worst;
}

void preprocess_equalities(ConvexProgram& p) {
  if (p.equality_count() == 0) return;
  if (p.eq_matrix.cols() != p.dimension || p.eq_offset.size() != p.eq_matrix.rows()) {
    throw DimensionError("equality system does not match the program dimension");
  }
  // Row-pivoted QR of A^T selects an independent subset of rows.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(p.eq_matrix.transpose());
  qr.setThreshold(1e-10);
  const int rank = static_cast<int>(qr.rank());
  if (rank == p.equality_count()) return;
  Eigen::MatrixXd a(rank, p.dimension);
  Eigen::VectorXd b(rank);
  const auto& perm = qr.colsPermutation().indices();
  for (int i = 0; i < rank; ++i) {
    a.row(i) = p.eq_matrix.row(perm[i]);
    b[i] = p.eq_offset[perm[i]];
  }
  // The dropped rows must be implied by the kept ones.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  const Eigen::VectorXd x0 = cod.solve(b);
  const double resid = (p.eq_matrix * x0 - p.eq_offset).lpNorm<Eigen::Infinity>();
  if (resid > 1e-8 * (1.0 + p.eq_offset.lpNorm<Eigen::Infinity>())) {
    throw SolverError("infeasible: inconsistent equality constraints");
  }
  p.eq_matrix = std::move(a);
  p.eq_offset = std::move(b);
}

Eigen::VectorXd find_interior_point(const ConvexProgram& program, const Eigen::VectorXd* hint,
                                    const Options& opts) {
  ConvexProgram p = program;
  preprocess_equalities(p);
  const int n = p.dimension;
  Eigen::VectorXd x0(n);
  if (hint) {
    if (hint->size() != n) throw DimensionError("interior point hint has the wrong size");
    x0 = *hint;
  } else {
    for (int j = 0; j < n; ++j) {
      const double l = p.lower_bound(j), u = p.upper_bound(j);
      if (std::isfinite(l) && std::isfinite(u)) {
        x0[j] = 0.5 * (l + u);
      } else if (std::isfinite(l)) {
        x0[j] = l + 1.0;
      } else if (std::isfinite(u)) {
        x0[j] = u - 1.0;
      } else {
        x0[j] = 0.0;
      }
    }
  }
  if (p.equality_count() > 0) {
    const Eigen::VectorXd r = p.eq_offset - p.eq_matrix * x0;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(p.eq_matrix);
    x0 += cod.solve(r);
  }
  Scratch s;
  if (strictly_inside(p, x0, s)) return x0;

  // Phase I: minimize s subject to g_i(x) <= s and bound rows <= s.
  ConvexProgram aux;
  aux.dimension = n + 1;
  aux.objective.push_back(Term::linear({n}, {1.0}, 0.0, "phase1"));
  double worst = -kInf;
  for (const Term& g : p.inequalities) {
    const double v = eval_value(g, x0, s);
    if (!std::isfinite(v)) throw SolverError("phase-I start outside the domain of " + g.label);
    worst = std::max(worst, v);
    aux.inequalities.push_back(shifted_term(g, n));
  }
  for (int j = 0; j < n; ++j) {
    const double l = p.lower_bound(j), u = p.upper_bound(j);
    if (std::isfinite(l)) {
      worst = std::max(worst, l - x0[j]);
      aux.inequalities.push_back(Term::linear({j, n}, {-1.0, -1.0}, l, "lower"));
    }
    if (std::isfinite(u)) {
      worst = std::max(worst, x0[j] - u);
      aux.inequalities.push_back(Term::linear({j, n}, {1.0, -1.0}, -u, "upper"));
    }
  }
  if (aux.inequalities.empty()) return x0;
  if (p.equality_count() > 0) {
    aux.eq_matrix = Eigen::MatrixXd::Zero(p.equality_count(), n + 1);
    aux.eq_matrix.leftCols(n) = p.eq_matrix;
    aux.eq_offset = p.eq_offset;
  }
  const double excess = std::max(1.0, std::abs(worst)) * 0.1 + 1e-3;
  const double s0 = worst + excess;
  aux.lower = Eigen::VectorXd::Constant(n + 1, -kInf);
  aux.upper = Eigen::VectorXd::Constant(n + 1, kInf);
  aux.lower[n] = -std::max(1.0, std::abs(worst)) - excess;
  Eigen::VectorXd z(n + 1);
  z.head(n) = x0;
  z[n] = s0;

  Options o = opts;
  o.t0 = static_cast<double>(aux.inequalities.size() + 1) / excess;
  o.record_trace = false;
  Scratch es;
  auto done = [&](const Eigen::VectorXd& zz) {
    return zz[n] < 0.0 && strictly_inside(p, zz.head(n), es);
  };
  const Solution r = barrier_minimize(aux, z, opts.feasibility_tol, o, done);
  const Eigen::VectorXd x = r.point.head(n);
  if (strictly_inside(p, x, es)) return x;
  throw SolverError("infeasible: phase-I optimum " + std::to_string(r.point[n]) + " is not negative");
}

Solution solve(const ConvexProgram& program, const Eigen::VectorXd& start, double tol,
               const Options& opts) {
  ConvexProgram p = program;
  preprocess_equalities(p);
  if (start.size() != p.dimension) throw DimensionError("start point has the wrong size");
  Scratch s;
  if (!strictly_inside(p, start, s)) throw SolverError("start point is not strictly feasible");
  if (p.equality_count() > 0) {
    const double r = (p.eq_matrix * start - p.eq_offset).lpNorm<Eigen::Infinity>();
    if (r > 1e-7 * (1.0 + p.eq_offset.lpNorm<Eigen::Infinity>())) {
      throw SolverError("start point violates the equality constraints");
    }
  }
  return barrier_minimize(p, start, tol, opts, nullptr);
}

double check_kkt(const ConvexProgram& p, const Eigen::VectorXd& x, const Multipliers& m) {
  const int n = p.dimension;
  Scratch s;
  Eigen::VectorXd g0 = Eigen::VectorXd::Zero(n);
  for (const Term& term : p.objective) {
    eval_full(term, x, s, false);
    for (size_t a = 0; a < term.vars.size(); ++a) g0[term.vars[a]] += s.g[a];
  }
  Eigen::VectorXd r = g0;
  double comp = 0.0;
  double feas = 0.0;
  double neg = 0.0;
  for (size_t i = 0; i < p.inequalities.size(); ++i) {
    const Term& g = p.inequalities[i];
    const double lam = i < static_cast<size_t>(m.inequality.size()) ? m.inequality[static_cast<int>(i)] : 0.0;
    const double v = eval_full(g, x, s, false);
    for (size_t a = 0; a < g.vars.size(); ++a) r[g.vars[a]] += lam * s.g[a];
    comp = std::max(comp, std::abs(lam * v));
    feas = std::max(feas, v);
    neg = std::max(neg, -lam);
  }
  for (int j = 0; j < n; ++j) {
    const double ll = m.lower.size() ? m.lower[j] : 0.0;
    const double lu = m.upper.size() ? m.upper[j] : 0.0;
    r[j] += lu - ll;
    if (std::isfinite(p.lower_bound(j))) {
      comp = std::max(comp, std::abs(ll * (x[j] - p.lower_bound(j))));
      feas = std::max(feas, p.lower_bound(j) - x[j]);
    }
    if (std::isfinite(p.upper_bound(j))) {
      comp = std::max(comp, std::abs(lu * (p.upper_bound(j) - x[j])));
      feas = std::max(feas, x[j] - p.upper_bound(j));
    }
    neg = std::max({neg, -ll, -lu});
  }
  if (p.equality_count() > 0) {
    if (m.equality.size() == p.equality_count()) r += p.eq_matrix.transpose() * m.equality;
    feas = std::max(feas, (p.eq_matrix * x - p.eq_offset).lpNorm<Eigen::Infinity>());
  }
  const double stationarity = r.lpNorm<Eigen::Infinity>() / (1.0 + g0.lpNorm<Eigen::Infinity>());
  return std::max({stationarity, comp, feas, neg});
}

void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace) {
  out << "iteration,objective,gap\n";
  out.precision(17);
  for (const TracePoint& tp : trace) out << tp.iteration << ',' << tp.objective << ',' << tp.gap << '\n';
}

DerivativeCheck check_derivatives(const ConvexProgram& p, const Eigen::VectorXd& x, double rel_step) {
  DerivativeCheck out;
  Scratch s, sp, sm;
  auto review = [&](const Term& term) {
    const size_t v = term.vars.size();
    eval_full(term, x, s, true);
    const std::vector<double> g(s.g.begin(), s.g.begin() + static_cast<long>(v));
    const std::vector<double> h(s.h.begin(), s.h.begin() + static_cast<long>(v * v));
    double gnorm = 0.0;
    for (double gi : g) gnorm = std::max(gnorm, std::abs(gi));
    double hnorm = 0.0;
    for (double hi : h) hnorm = std::max(hnorm, std::abs(hi));
    // Several steps per coordinate; the best one separates roundoff (small
    // steps) from truncation (large steps).
    static constexpr double kStepScales[] = {0.1, 1.0, 10.0, 100.0, 1000.0};
    for (size_t j = 0; j < v; ++j) {
      const int idx = term.vars[j];
      double best_g = INFINITY, best_h = INFINITY;
      for (double scale : kStepScales) {
        const double step = scale * rel_step * std::max(1.0, std::abs(x[idx]));
        Eigen::VectorXd xp = x, xm = x;
        xp[idx] += step;
        xm[idx] -= step;
        const double fp = eval_full(term, xp, sp, false);
        const double fm = eval_full(term, xm, sm, false);
        if (!std::isfinite(fp) || !std::isfinite(fm)) continue;
        const double fd = (fp - fm) / (2.0 * step);
        best_g = std::min(best_g, std::abs(fd - g[j]) / std::max({std::abs(g[j]), 1e-6 * gnorm, 1e-12}));
        if (!term.affine) {
          double herr = 0.0;
          for (size_t a = 0; a < v; ++a) {
            const double hd = (sp.g[a] - sm.g[a]) / (2.0 * step);
            const double ha = h[j * v + a];
            herr = std::max(herr, std::abs(hd - ha) / std::max({std::abs(ha), 1e-6 * hnorm, 1e-12}));
          }
          best_h = std::min(best_h, herr);
        }
      }
      if (best_g > out.max_gradient_error) {
        out.max_gradient_error = best_g;
        out.worst_label = term.label;
      }
      if (!term.affine) out.max_hessian_error = std::max(out.max_hessian_error, best_h);
    }
    ++out.terms_checked;
  };
  for (const Term& t : p.objective) review(t);
  for (const Term& t : p.inequalities) review(t);
  return out;
}

}  // namespace uavedge::solver
