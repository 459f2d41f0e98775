#pragma once

// Feasibility solver for linear matrix inequalities with linear equalities.
//
//   maximize  t   subject to   F_b(z) >= t I  for every block b,   E z = g.
//
// Equalities are eliminated exactly (z = z0 + N w with N spanning null(E)),
// then the margin t is driven up by a log-det barrier path-following method
// on (w, t) with damped Newton centering steps. The decision vector is kept
// inside the ball ||w|| <= radius so the problem stays bounded.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gdctl/affine.hpp"
#include "gdctl/matkernel.hpp"

namespace gdctl {

/// One affine symmetric block F(z) = F0 + sum_i z_i F_i.
struct LmiBlock {
  std::string name;
  Matrix constant;                  // F0
  std::vector<Matrix> coefficients;  // F_1..F_d

  Index size() const { return constant.rows(); }

  Matrix evaluate(const Vector& z) const {
    Matrix out = constant;
    for (std::size_t i = 0; i < coefficients.size(); ++i) {
      const double zi = z(static_cast<Index>(i));
      if (zi != 0.0) out += zi * coefficients[i];
    }
    return out;
  }
};

struct LmiProblem {
  Index dim = 0;
  std::vector<LmiBlock> blocks;
  Matrix eq_matrix;  // E, rows = equality count, cols = dim
  Vector eq_rhs;     // g
  std::optional<Vector> objective;

  /// Adds the symmetric block `expr` (its symmetric part is taken).
  void add_block(std::string name, const AffineMatrix& expr) {
    if (expr.rows() != expr.cols()) throw DimensionError("add_block: block must be square");
    AffineMatrix s = expr.symmetric_part();
    LmiBlock b{std::move(name), s.constant(), {}};
    b.coefficients.assign(static_cast<std::size_t>(dim), Matrix::Zero(s.rows(), s.cols()));
    for (const auto& [var, coef] : s.terms()) {
      if (var >= dim) throw DimensionError("add_block: variable index beyond problem dimension");
      b.coefficients[static_cast<std::size_t>(var)] = coef;
    }
    blocks.push_back(std::move(b));
  }

  /// Adds the entrywise equalities expr(z) = 0.
  void add_equalities(const AffineMatrix& expr) {
    const Index count = expr.rows() * expr.cols();
    const Index base = eq_matrix.rows();
    Matrix e = Matrix::Zero(base + count, dim);
    Vector g = Vector::Zero(base + count);
    if (base > 0) {
      e.topRows(base) = eq_matrix;
      g.head(base) = eq_rhs;
    }
    for (Index i = 0; i < expr.rows(); ++i) {
      for (Index j = 0; j < expr.cols(); ++j) {
        const Index row = base + i * expr.cols() + j;
        g(row) = -expr.constant()(i, j);
        for (const auto& [var, coef] : expr.terms()) e(row, var) = coef(i, j);
      }
    }
    eq_matrix = std::move(e);
    eq_rhs = std::move(g);
  }

  /// Adds a single scalar equality expr(z) = 0 where expr is 1x1.
  void add_equality(const AffineMatrix& expr) { add_equalities(expr); }

  void validate() const {
    for (const auto& b : blocks) {
      if (static_cast<Index>(b.coefficients.size()) != dim)
        throw DimensionError("LmiProblem: block '" + b.name + "' coefficient count != dim");
      require_symmetric(b.constant, default_symmetry_tol(b.constant), "LmiProblem block");
      for (const auto& c : b.coefficients) {
        if (c.rows() != b.size() || c.cols() != b.size())
          throw DimensionError("LmiProblem: block '" + b.name + "' coefficient shape mismatch");
        require_symmetric(c, default_symmetry_tol(c), "LmiProblem coefficient");
      }
    }
    if (eq_matrix.size() > 0 && eq_matrix.cols() != dim)
      throw DimensionError("LmiProblem: equality matrix column count != dim");
    if (eq_matrix.rows() != eq_rhs.size())
      throw DimensionError("LmiProblem: equality right-hand side length mismatch");
    if (objective && objective->size() != dim)
      throw DimensionError("LmiProblem: objective length != dim");
  }
};

enum class SdpStatus { feasible, marginal, infeasible, numerical_failure };

inline const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::feasible: return "feasible";
    case SdpStatus::marginal: return "marginal";
    case SdpStatus::infeasible: return "infeasible";
    case SdpStatus::numerical_failure: return "numerical-failure";
  }
  return "unknown";
}

struct SdpOptions {
  double strictness = 1e-8;          // feasible <=> margin > strictness
  double marginal_tolerance = 1e-10;  // marginal <=> margin >= -marginal_tolerance
  double radius = 0.0;               // ball radius on w; 0 selects 1e3 * max(1, |z0|)
  int max_outer_iterations = 60;
  int max_newton_iterations = 100;
  double gap_tolerance = 1e-11;      // relative barrier gap at which to stop
  double equality_tolerance = 1e-8;
};

struct SdpSolution {
  Vector z;
  double margin = -std::numeric_limits<double>::infinity();
  double equality_residual = 0.0;
  SdpStatus status = SdpStatus::infeasible;
  std::string active_block;
  std::vector<double> margin_log;  // best margin after each outer iteration
  std::vector<std::string> iterate_log;
  int newton_steps = 0;
};

struct BlockReport {
  std::string name;
  double min_eigenvalue;
};

struct CheckReport {
  std::vector<BlockReport> blocks;
  double margin = std::numeric_limits<double>::infinity();
  double equality_residual = 0.0;
  SdpStatus status = SdpStatus::infeasible;
  std::string active_block;
};

inline SdpStatus classify(double margin, double residual, const SdpOptions& opt) {
  if (!std::isfinite(margin) || !std::isfinite(residual)) return SdpStatus::numerical_failure;
  if (residual > opt.equality_tolerance) return SdpStatus::infeasible;
  if (margin > opt.strictness) return SdpStatus::feasible;
  if (margin >= -opt.marginal_tolerance) return SdpStatus::marginal;
  return SdpStatus::infeasible;
}

/// Independent verification of a candidate point: assembles each block and
/// takes its smallest eigenvalue with the Jacobi solver.
inline CheckReport check_solution(const LmiProblem& problem, const Vector& z,
                                  const SdpOptions& opt = {}) {
  if (z.size() != problem.dim) {
    throw DimensionError("check_solution: z has length " + std::to_string(z.size()) +
                         ", problem dim is " + std::to_string(problem.dim));
  }
  CheckReport rep;
  for (const auto& b : problem.blocks) {
    const double lmin = min_eigenvalue(sym(b.evaluate(z)));
    rep.blocks.push_back({b.name, lmin});
    if (lmin < rep.margin) {
      rep.margin = lmin;
      rep.active_block = b.name;
    }
  }
  if (problem.eq_matrix.rows() > 0) {
    rep.equality_residual = (problem.eq_matrix * z - problem.eq_rhs).cwiseAbs().maxCoeff();
  }
  rep.status = classify(rep.margin, rep.equality_residual, opt);
  return rep;
}

namespace detail {

struct NullSpace {
  Vector z0;  // minimum-norm particular solution
  Matrix basis;
  double residual = 0.0;
};

inline NullSpace eliminate_equalities(const LmiProblem& p, double tolerance) {
  NullSpace out;
  const Index d = p.dim;
  if (p.eq_matrix.rows() == 0) {
    out.z0 = Vector::Zero(d);
    out.basis = Matrix::Identity(d, d);
    return out;
  }
  const Matrix et = p.eq_matrix.transpose();
  Eigen::ColPivHouseholderQR<Matrix> qr(et);
  qr.setThreshold(1e-12);
  const Index rank = qr.rank();
  const Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  const Matrix r = qr.matrixR().template triangularView<Eigen::Upper>();
  const Vector pg = qr.colsPermutation().transpose() * p.eq_rhs;

  Vector y = Vector::Zero(rank);
  if (rank > 0) {
    const Matrix r1t = r.topLeftCorner(rank, rank).transpose();
    y = r1t.template triangularView<Eigen::Lower>().solve(pg.head(rank));
  }
  out.z0 = q.leftCols(rank) * y;
  out.basis = q.rightCols(d - rank);
  out.residual = (p.eq_matrix * out.z0 - p.eq_rhs).cwiseAbs().maxCoeff();
  const double scale = 1.0 + p.eq_rhs.cwiseAbs().maxCoeff();
  if (out.residual > tolerance * scale) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "solve_feasibility: equality constraints are inconsistent "
                  "(residual %.3e)", out.residual);
    throw InfeasibleEqualitiesError(buf, out.residual);
  }
  return out;
}

// The problem restricted to the null space: block b is C_b + sum_i w_i G_bi.
struct ReducedProblem {
  std::vector<Matrix> constants;
  std::vector<std::vector<Matrix>> coefficients;
  Index vars = 0;
  Index barrier_degree = 0;
};

inline ReducedProblem reduce(const LmiProblem& p, const NullSpace& ns) {
  ReducedProblem rp;
  rp.vars = ns.basis.cols();
  for (const auto& b : p.blocks) {
    rp.constants.push_back(b.evaluate(ns.z0));
    std::vector<Matrix> g(static_cast<std::size_t>(rp.vars), Matrix::Zero(b.size(), b.size()));
    for (Index i = 0; i < rp.vars; ++i) {
      for (Index j = 0; j < p.dim; ++j) {
        const double nji = ns.basis(j, i);
        if (nji != 0.0) g[static_cast<std::size_t>(i)] += nji * b.coefficients[static_cast<std::size_t>(j)];
      }
    }
    rp.coefficients.push_back(std::move(g));
    rp.barrier_degree += b.size();
  }
  return rp;
}

inline Matrix reduced_block(const ReducedProblem& rp, std::size_t b, const Vector& w) {
  Matrix s = rp.constants[b];
  for (Index i = 0; i < rp.vars; ++i) {
    const double wi = w(i);
    if (wi != 0.0) s += wi * rp.coefficients[b][static_cast<std::size_t>(i)];
  }
  return sym(s);
}

inline double reduced_margin(const ReducedProblem& rp, const Vector& w, std::size_t* active = nullptr) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < rp.constants.size(); ++b) {
    const double lmin = min_eigenvalue(reduced_block(rp, b, w));
    if (lmin < m) {
      m = lmin;
      if (active) *active = b;
    }
  }
  return m;
}

// Barrier objective  tau * (lin . x) - sum_b logdet(F_b(w) - t I) - log(R^2 - |w|^2)
// over x = (w, t) when t is free, or x = w with t held fixed.
class BarrierCentering {
 public:
  BarrierCentering(const ReducedProblem& rp, double radius, bool free_t)
      : rp_(rp), radius2_(radius * radius), free_t_(free_t) {}

  Index size() const { return rp_.vars + (free_t_ ? 1 : 0); }

  // Returns +inf outside the domain.
  double value(const Vector& w, double t, double tau, const Vector& lin) const {
    const double ball = radius2_ - w.squaredNorm();
    if (!(ball > 0.0)) return std::numeric_limits<double>::infinity();
    double f = -std::log(ball);
    for (std::size_t b = 0; b < rp_.constants.size(); ++b) {
      Matrix s = reduced_block(rp_, b, w);
      s.diagonal().array() -= t;
      const PdFactor fac = factor_pd(s, std::numeric_limits<double>::infinity());
      if (!fac) return std::numeric_limits<double>::infinity();
      f -= 2.0 * fac.lower.diagonal().array().log().sum();
    }
    f += tau * lin.head(rp_.vars).dot(w);
    if (free_t_) f += tau * lin(rp_.vars) * t;
    return f;
  }

  // Gradient and Hessian at an interior point.
  void derivatives(const Vector& w, double t, double tau, const Vector& lin, Vector& grad,
                   Matrix& hess) const {
    const Index p = rp_.vars;
    const Index nx = size();
    grad = Vector::Zero(nx);
    hess = Matrix::Zero(nx, nx);
    for (std::size_t b = 0; b < rp_.constants.size(); ++b) {
      Matrix s = reduced_block(rp_, b, w);
      s.diagonal().array() -= t;
      const PdFactor fac = factor_pd(s, std::numeric_limits<double>::infinity());
      const Index k = s.rows();
      const Matrix si = solve_pd(fac, Matrix::Identity(k, k));
      std::vector<Matrix> sg(static_cast<std::size_t>(p));
      for (Index i = 0; i < p; ++i) {
        const Matrix& gi = rp_.coefficients[b][static_cast<std::size_t>(i)];
        sg[static_cast<std::size_t>(i)] = si * gi;
        grad(i) -= sg[static_cast<std::size_t>(i)].trace();
      }
      for (Index i = 0; i < p; ++i) {
        const Matrix& a = sg[static_cast<std::size_t>(i)];
        for (Index j = i; j < p; ++j) {
          // tr(S^-1 G_i S^-1 G_j)
          const double h = (a.array() * sg[static_cast<std::size_t>(j)].transpose().array()).sum();
          hess(i, j) += h;
          if (j != i) hess(j, i) += h;
        }
      }
      if (free_t_) {
        grad(p) += si.trace();
        const Matrix si2 = si * si;
        hess(p, p) += si2.trace();
        for (Index i = 0; i < p; ++i) {
          // -tr(S^-1 G_i S^-1)
          const double h = -(sg[static_cast<std::size_t>(i)] * si).trace();
          hess(i, p) += h;
          hess(p, i) += h;
        }
      }
    }
    const double ball = radius2_ - w.squaredNorm();
    grad.head(p) += 2.0 * w / ball;
    hess.topLeftCorner(p, p) += (2.0 / ball) * Matrix::Identity(p, p) +
                                (4.0 / (ball * ball)) * (w * w.transpose());
    grad.head(p) += tau * lin.head(p);
    if (free_t_) grad(p) += tau * lin(p);
  }

  struct Outcome {
    int steps = 0;
    bool converged = false;
    bool failed = false;
  };

  // Damped Newton with Armijo backtracking. Keeps (w, t) strictly interior.
  Outcome center(Vector& w, double& t, double tau, const Vector& lin, int max_steps) const {
    Outcome out;
    const Index p = rp_.vars;
    Vector grad;
    Matrix hess;
    double f = value(w, t, tau, lin);
    if (!std::isfinite(f)) {
      out.failed = true;
      return out;
    }
    for (; out.steps < max_steps; ++out.steps) {
      derivatives(w, t, tau, lin, grad, hess);
      if (!grad.allFinite() || !hess.allFinite()) {
        out.failed = true;
        return out;
      }
      Vector dx;
      PdFactor fac = factor_pd(sym(hess), std::numeric_limits<double>::infinity());
      double ridge = 1e-14 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
      while (!fac && ridge < 1e20) {
        Matrix hr = sym(hess);
        hr.diagonal().array() += ridge;
        fac = factor_pd(hr, std::numeric_limits<double>::infinity());
        ridge *= 100.0;
      }
      if (!fac) {
        out.failed = true;
        return out;
      }
      dx = -solve_pd(fac, grad);
      const double decrement2 = -grad.dot(dx);
      if (decrement2 <= 1e-14) {
        out.converged = true;
        return out;
      }
      double step = 1.0;
      Vector w_new;
      double t_new = t;
      double f_new = std::numeric_limits<double>::infinity();
      bool accepted = false;
      for (int ls = 0; ls < 80; ++ls, step *= 0.5) {
        w_new = w + step * dx.head(p);
        t_new = free_t_ ? t + step * dx(p) : t;
        f_new = value(w_new, t_new, tau, lin);
        if (std::isfinite(f_new) && f_new <= f - 0.25 * step * decrement2) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        // No further decrease possible at working precision.
        out.converged = decrement2 < 1e-6;
        out.failed = !out.converged;
        return out;
      }
      w = w_new;
      t = t_new;
      f = f_new;
    }
    return out;
  }

 private:
  const ReducedProblem& rp_;
  double radius2_;
  bool free_t_;
};

}  // namespace detail

/// Maximizes the smallest block eigenvalue subject to the equalities. When the
/// problem carries an objective and the margin clears `strictness`, a second
/// phase minimizes the objective while keeping every block >= strictness.
inline SdpSolution solve_feasibility(const LmiProblem& problem, const SdpOptions& opt = {}) {
  problem.validate();
  SdpSolution sol;
  const detail::NullSpace ns = detail::eliminate_equalities(problem, 1e-9);
  const detail::ReducedProblem rp = detail::reduce(problem, ns);
  const Index p = rp.vars;

  auto finish = [&](const Vector& w) {
    sol.z = ns.z0 + ns.basis * w;
    const CheckReport rep = check_solution(problem, sol.z, opt);
    sol.margin = rep.margin;
    sol.active_block = rep.active_block;
    sol.equality_residual = rep.equality_residual;
    sol.status = rep.status;
    return sol;
  };

  if (problem.blocks.empty() || p == 0) {
    // Nothing to move: the equalities pin z, or there is no block to improve.
    finish(Vector::Zero(p));
    sol.margin_log.push_back(sol.margin);
    return sol;
  }

  const double z0_norm = ns.z0.size() > 0 ? ns.z0.cwiseAbs().maxCoeff() : 0.0;
  const double radius = opt.radius > 0.0 ? opt.radius : 1e3 * std::max(1.0, z0_norm);
  Vector w = Vector::Zero(p);
  const double m0 = detail::reduced_margin(rp, w);
  double scale = 1.0;
  for (const auto& c : rp.constants) scale = std::max(scale, c.norm());
  double t = m0 - (1.0 + std::abs(m0));
  const double nu = static_cast<double>(rp.barrier_degree + 1);
  double tau = nu / scale;

  Vector best_w = w;
  double best_margin = m0;
  Vector lin = Vector::Zero(p + 1);
  lin(p) = -1.0;  // minimize -t

  const detail::BarrierCentering phase1(rp, radius, true);
  bool failed = false;
  for (int outer = 0; outer < opt.max_outer_iterations; ++outer) {
    const auto res = phase1.center(w, t, tau, lin, opt.max_newton_iterations);
    sol.newton_steps += res.steps;
    const double m = detail::reduced_margin(rp, w);
    if (m > best_margin) {
      best_margin = m;
      best_w = w;
    }
    sol.margin_log.push_back(best_margin);
    char buf[160];
    std::snprintf(buf, sizeof buf, "outer %d: tau=%.3e t=%.6e margin=%.6e newton=%d%s", outer, tau,
                  t, m, res.steps, res.failed ? " (centering failed)" : "");
    sol.iterate_log.emplace_back(buf);
    if (res.failed) {
      failed = outer == 0;
      break;
    }
    if (nu / tau <= opt.gap_tolerance * std::max(1.0, std::abs(best_margin))) break;
    tau *= 10.0;
  }

  if (failed && !(best_margin > m0)) {
    finish(best_w);
    sol.status = SdpStatus::numerical_failure;
    return sol;
  }

  if (problem.objective && best_margin > opt.strictness) {
    // Phase II: minimize c^T z over {F_b(z) >= strictness I}.
    const Vector c_w = ns.basis.transpose() * (*problem.objective);
    const detail::BarrierCentering phase2(rp, radius, false);
    double floor = std::min(opt.strictness, 0.5 * best_margin);
    Vector w2 = best_w;
    double tau2 = nu / scale;
    for (int outer = 0; outer < opt.max_outer_iterations; ++outer) {
      const auto res = phase2.center(w2, floor, tau2, c_w,
                                     opt.max_newton_iterations);
      sol.newton_steps += res.steps;
      if (res.failed) break;
      best_w = w2;
      if (nu / tau2 <= opt.gap_tolerance) break;
      tau2 *= 10.0;
    }
  }
  return finish(best_w);
}

}  // namespace gdctl
