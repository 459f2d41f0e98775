#pragma once

// Infinite-horizon discrete LQR and its gradient-descent reading.
// Gains follow the u = K x convention, so K already carries the minus sign.

#include <cmath>
#include <cstdio>

#include "gdctl/gdsynth.hpp"
#include "gdctl/system.hpp"

namespace gdctl {

struct LqrWeights {
  Matrix Q;
  Matrix R;

  void validate(Index n, Index m) const {
    if (Q.rows() != n || Q.cols() != n) throw DimensionError("LqrWeights: Q is " + shape_of(Q));
    if (R.rows() != m || R.cols() != m) throw DimensionError("LqrWeights: R is " + shape_of(R));
    require_symmetric(Q, default_symmetry_tol(Q), "LqrWeights Q");
    require_symmetric(R, default_symmetry_tol(R), "LqrWeights R");
    if (min_eigenvalue(sym(Q)) < -1e-10) throw PreconditionError("LqrWeights: Q is not PSD");
    if (!is_positive_definite(sym(R))) throw PreconditionError("LqrWeights: R is not PD");
  }
};

struct LqrDesign {
  LqrWeights weights;
  Matrix P_bar;
  Matrix K_bar;
  Matrix Gamma_bar;
  int iterations = 0;
  double residual = 0.0;  // Riccati residual, max-abs
};

struct DareOptions {
  double tolerance = 1e-12;
  int max_iterations = 100000;
};

struct DareResult {
  Matrix P;
  int iterations = 0;
};

/// Value iteration P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA from P = Q.
inline DareResult solve_dare_iterations(const SystemModel& sys, const LqrWeights& w,
                                        const DareOptions& opt = {}) {
  sys.validate();
  w.validate(sys.states(), sys.inputs());
  if (!is_stabilizable(sys)) throw PreconditionError("solve_dare: (A, B) is not stabilizable");
  const Matrix& a = sys.A;
  const Matrix& b = sys.B;
  Matrix p = sym(w.Q);
  double delta = 0.0;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const Matrix pa = p * a;
    const Matrix bpa = b.transpose() * pa;
    const Matrix gain_term = solve_linear(w.R + b.transpose() * p * b, bpa);
    Matrix next = sym(w.Q + a.transpose() * pa - bpa.transpose() * gain_term);
    delta = max_abs(next - p);
    const double scale = std::max(max_abs(p), std::numeric_limits<double>::min());
    p = std::move(next);
    if (!all_finite(p)) break;
    if (delta <= opt.tolerance * scale) return {p, it};
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "solve_dare: no convergence in %d iterations (last step %.3e)",
                opt.max_iterations, delta);
  throw ConvergenceError(buf, delta);
}

inline Matrix solve_dare(const SystemModel& sys, const LqrWeights& w, const DareOptions& opt = {}) {
  return solve_dare_iterations(sys, w, opt).P;
}

/// K = -(R + B'PB)^-1 B'PA.
inline Matrix lqr_gain(const SystemModel& sys, const Matrix& p_bar, const Matrix& r) {
  const Matrix& b = sys.B;
  return -solve_linear(r + b.transpose() * p_bar * b, b.transpose() * p_bar * sys.A);
}

inline double riccati_residual(const SystemModel& sys, const LqrWeights& w, const Matrix& p,
                               const Matrix& k) {
  const Matrix acl = closed_loop(sys, k);
  return max_abs(p - (w.Q + k.transpose() * w.R * k + acl.transpose() * p * acl));
}

/// Gamma = (I - (A + BK)) P^-1 / 2, the direction matrix of the LQR loop.
inline Matrix gamma_of_lqr(const SystemModel& sys, const Matrix& k_bar, const Matrix& p_bar) {
  const Matrix acl = closed_loop(sys, k_bar);
  if (!(spectral_radius(acl) < 1.0)) throw PreconditionError("gamma_of_lqr: closed loop is unstable");
  if (!is_positive_definite(sym(p_bar))) throw PreconditionError("gamma_of_lqr: P is not PD");
  const Index n = sys.states();
  const Matrix deficit = Matrix::Identity(n, n) - acl;
  const Matrix gamma = solve_linear(sym(p_bar), 0.5 * deficit.transpose()).transpose();
  const double consistency = max_abs(Matrix::Identity(n, n) - 2.0 * gamma * p_bar - acl);
  if (consistency > 1e-9 * std::max(1.0, max_abs(acl))) {
    throw Error("gamma_of_lqr: I - 2 Gamma P misses A + BK by " + std::to_string(consistency));
  }
  return gamma;
}

inline LqrDesign design_lqr(const SystemModel& sys, const LqrWeights& w, const DareOptions& opt = {}) {
  LqrDesign d;
  d.weights = w;
  const DareResult dare = solve_dare_iterations(sys, w, opt);
  d.P_bar = dare.P;
  d.iterations = dare.iterations;
  d.K_bar = lqr_gain(sys, d.P_bar, w.R);
  d.residual = riccati_residual(sys, w, d.P_bar, d.K_bar);
  d.Gamma_bar = gamma_of_lqr(sys, d.K_bar, d.P_bar);
  return d;
}

/// Solves S = M + Acl' S Acl by summing the series from S = M.
inline Matrix discrete_lyapunov(const Matrix& acl, const Matrix& m, const DareOptions& opt = {}) {
  Matrix s = m;
  Matrix term = m;
  double step = 0.0;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    term = acl.transpose() * term * acl;
    step = max_abs(term);
    s += term;
    if (step <= opt.tolerance * std::max(max_abs(s), std::numeric_limits<double>::min())) return sym(s);
  }
  throw ConvergenceError("discrete_lyapunov: series did not converge", step);
}

/// Infinite-horizon cost sum x'Qx + u'Ru of u = K x from x0.
inline double closed_loop_cost(const SystemModel& sys, const Matrix& k, const LqrWeights& w,
                               const Vector& x0) {
  sys.validate();
  w.validate(sys.states(), sys.inputs());
  if (x0.size() != sys.states()) throw DimensionError("closed_loop_cost: x0 length mismatch");
  const Matrix acl = closed_loop(sys, k);
  const double rho = spectral_radius(acl);
  if (!(rho < 1.0)) {
    throw PreconditionError("closed_loop_cost: gain is not stabilizing (rho = " +
                            std::to_string(rho) + "), the cost diverges");
  }
  const Matrix s = discrete_lyapunov(acl, w.Q + k.transpose() * w.R * k);
  return x0.dot(s * x0);
}

struct EquivalenceReport {
  Matrix K_bar;
  Matrix P_bar;
  double gain_distance = 0.0;         // max |K - K_bar|
  double closed_loop_distance = 0.0;  // max |(A + BK) - (A + BK_bar)|
};

/// Spot check of a GD design against the LQR optimum for the given weights.
inline EquivalenceReport lqr_equivalence_check(const SystemModel& sys, const GdDesign& design,
                                               const LqrWeights& w) {
  EquivalenceReport rep;
  rep.P_bar = solve_dare(sys, w);
  rep.K_bar = lqr_gain(sys, rep.P_bar, w.R);
  rep.gain_distance = max_abs(design.K - rep.K_bar);
  rep.closed_loop_distance = max_abs(closed_loop(sys, design.K) - closed_loop(sys, rep.K_bar));
  return rep;
}

}  // namespace gdctl
