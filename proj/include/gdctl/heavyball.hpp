#pragma once

// Momentum-augmented ("heavy-ball") feedback u_k = K1 x_k + K2 x_{k-1}.
//
// The closed loop is matched to x_{k+1} = x_k - 2 Gamma P x_k + Delta (x_k - x_{k-1}),
// i.e. the augmented map [[I - 2 Gamma P + Delta, -Delta], [I, 0]] on (x_k, x_{k-1}).
// The bilinear product Delta Y is carried as its own unknown W.

#include <cstdio>
#include <string>

#include "gdctl/gdsynth.hpp"

namespace gdctl {

struct HeavyBallDesign {
  Matrix Gamma;
  Matrix P;
  Matrix Delta;
  Matrix K1;
  Matrix K2;
  Matrix Y;
  Matrix F1;
  Matrix F2;
  Matrix W;
  double lambda = 0.99;
  double margin = 0.0;         // smallest eigenvalue of the 4n x 4n LMI
  double solver_margin = 0.0;  // over every synthesis block
  GammaMode mode = GammaMode::free;
};

/// [[I - 2 Gamma P + Delta, -Delta], [I, 0]]
inline Matrix augmented_matrix(const Matrix& gamma, const Matrix& p, const Matrix& delta) {
  const Index n = gamma.rows();
  if (gamma.cols() != n || p.rows() != n || p.cols() != n || delta.rows() != n || delta.cols() != n)
    throw DimensionError("augmented_matrix: Gamma, P, Delta must share one square shape");
  const Matrix eye = Matrix::Identity(n, n);
  Matrix out(2 * n, 2 * n);
  out << eye - 2.0 * gamma * p + delta, -delta, eye, Matrix::Zero(n, n);
  return out;
}

/// [[A + B K1, B K2], [I, 0]]
inline Matrix hb_closed_loop(const SystemModel& sys, const Matrix& k1, const Matrix& k2) {
  const Index n = sys.states();
  Matrix out(2 * n, 2 * n);
  out << closed_loop(sys, k1), sys.B * k2, Matrix::Identity(n, n), Matrix::Zero(n, n);
  return out;
}

inline Matrix hb_lmi(const Matrix& y, const Matrix& gamma, const Matrix& w, double lambda) {
  const Index n = y.rows();
  const Matrix z = Matrix::Zero(n, n);
  const Matrix m = y - 2.0 * gamma + w;
  Matrix l(4 * n, 4 * n);
  l << lambda * y, z, m.transpose(), y,
       z, lambda * y, -w.transpose(), z,
       m, -w, y, z,
       y, z, z, y;
  return l;
}

struct HbContractivityReport {
  double lmi_margin;        // min eig of the 4n x 4n LMI
  double quadratic_margin;  // min eig of lambda diag(Y,Y) - N' diag(P,P) N
  bool lmi_feasible;
  bool quadratic_feasible;
  bool agree;
};

/// Evaluates the contraction condition V(X_{k+1}) <= lambda V(X_k) for
/// V(X) = X' diag(P, P) X both as the LMI in (Y, Gamma, W) and directly as the
/// congruence-transformed quadratic inequality.
inline HbContractivityReport check_hb_contractivity(const Matrix& y, const Matrix& gamma,
                                                    const Matrix& w, double lambda,
                                                    double tolerance = 1e-10) {
  require_rate(lambda);
  require_symmetric(y, default_symmetry_tol(y), "check_hb_contractivity Y");
  if (!is_positive_definite(sym(y))) throw PreconditionError("check_hb_contractivity: Y is not PD");
  const Index n = y.rows();
  const Matrix ys = sym(y);
  const Matrix p = sym(inverse(ys));
  const Matrix z = Matrix::Zero(n, n);

  HbContractivityReport rep{};
  rep.lmi_margin = min_eigenvalue(sym(hb_lmi(ys, gamma, w, lambda)));

  // N = augmented map times diag(Y, Y) = [[Y - 2 Gamma + W, -W], [Y, 0]].
  Matrix nmap(2 * n, 2 * n);
  nmap << ys - 2.0 * gamma + w, -w, ys, z;
  Matrix pp = Matrix::Zero(2 * n, 2 * n);
  pp.topLeftCorner(n, n) = p;
  pp.bottomRightCorner(n, n) = p;
  Matrix yy = Matrix::Zero(2 * n, 2 * n);
  yy.topLeftCorner(n, n) = ys;
  yy.bottomRightCorner(n, n) = ys;
  rep.quadratic_margin = min_eigenvalue(sym(lambda * yy - nmap.transpose() * pp * nmap));

  rep.lmi_feasible = rep.lmi_margin >= -tolerance;
  rep.quadratic_feasible = rep.quadratic_margin >= -tolerance;
  rep.agree = rep.lmi_feasible == rep.quadratic_feasible;
  return rep;
}

struct HbSynthesisOptions {
  SdpOptions sdp;
  bool zero_momentum = false;  // pin W = 0 and F2 = 0
};

inline constexpr double kDefaultHeavyBallRate = 0.99;

namespace detail {

struct HbProblem {
  LmiProblem lmi;
  AffineMatrix y, gamma, w, f1, f2;
};

inline HbProblem build_hb_problem(const SystemModel& sys, double lambda, const GammaSpec& spec,
                                  bool zero_momentum) {
  const Index n = sys.states();
  const Index m = sys.inputs();
  VariablePool pool;
  HbProblem hp;
  hp.y = pool.symmetric(n, "Y");
  switch (spec.mode) {
    case GammaMode::scalar: hp.gamma = pool.scaled_identity(n, "gamma"); break;
    case GammaMode::fixed: hp.gamma = AffineMatrix(*spec.fixed_value); break;
    case GammaMode::free:
    case GammaMode::bounded: hp.gamma = pool.full(n, n, "Gamma"); break;
  }
  hp.w = pool.full(n, n, "W");
  hp.f1 = pool.full(m, n, "F1");
  hp.f2 = pool.full(m, n, "F2");
  hp.lmi.dim = pool.size();

  const AffineMatrix zero = AffineMatrix::zeros(n, n);
  const AffineMatrix step = hp.y - 2.0 * hp.gamma + hp.w;
  hp.lmi.add_block("contractivity",
                   AffineMatrix::blocks({{lambda * hp.y, zero, step.transpose(), hp.y},
                                         {zero, lambda * hp.y, -hp.w.transpose(), zero},
                                         {step, -hp.w, hp.y, zero},
                                         {hp.y, zero, zero, hp.y}}));
  const Matrix eye = Matrix::Identity(n, n);
  if (spec.mode != GammaMode::fixed)
    hp.lmi.add_block("gamma_pd", hp.gamma.symmetric_part() - spec.pd_floor * eye);
  if (spec.mode == GammaMode::bounded)
    hp.lmi.add_block("gamma_bound", AffineMatrix(*spec.upper_bound) - hp.gamma.symmetric_part());

  hp.lmi.add_equalities(sys.A * hp.y + sys.B * hp.f1 - step);
  hp.lmi.add_equalities(sys.B * hp.f2 + hp.w);
  if (zero_momentum) {
    hp.lmi.add_equalities(hp.w);
    hp.lmi.add_equalities(hp.f2);
  }

  AffineMatrix trace_y(1, 1);
  for (const auto& [var, coef] : hp.y.terms())
    trace_y.add_term(var, Matrix::Constant(1, 1, coef.trace()));
  const Matrix n_const = Matrix::Constant(1, 1, static_cast<double>(n));
  if (spec.mode == GammaMode::scalar || spec.mode == GammaMode::free) {
    hp.lmi.add_equality(trace_y - n_const);
  } else if (spec.mode == GammaMode::bounded) {
    hp.lmi.add_block("scale", AffineMatrix(n_const) - trace_y);
  }
  return hp;
}

}  // namespace detail

inline LmiProblem hb_problem(const SystemModel& sys, double lambda, const GammaSpec& spec,
                             bool zero_momentum = false) {
  sys.validate();
  require_rate(lambda);
  spec.validate(sys.states());
  return detail::build_hb_problem(sys, lambda, spec, zero_momentum).lmi;
}

/// Synthesizes (Gamma, P, Delta, K1, K2). The LMI is non-strict, so designs
/// with margin >= -marginal_tolerance are accepted.
inline HeavyBallDesign synthesize_hb(const SystemModel& sys, double lambda, const GammaSpec& spec,
                                     const HbSynthesisOptions& opt = {}) {
  sys.validate();
  require_rate(lambda);
  spec.validate(sys.states());
  if (!is_stabilizable(sys)) throw PreconditionError("synthesize_hb: (A, B) is not stabilizable");

  const detail::HbProblem hp = detail::build_hb_problem(sys, lambda, spec, opt.zero_momentum);
  const SdpSolution sol = solve_feasibility(hp.lmi, opt.sdp);
  if (sol.status != SdpStatus::feasible && sol.status != SdpStatus::marginal) {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "synthesize_hb: LMI infeasible (best margin %.6e, status %s, active block '%s')",
                  sol.margin, to_string(sol.status), sol.active_block.c_str());
    throw SynthesisInfeasibleError(buf, sol.margin, sol.active_block);
  }

  HeavyBallDesign d;
  d.mode = spec.mode;
  d.lambda = lambda;
  d.Y = sym(hp.y.evaluate(sol.z));
  d.Gamma = hp.gamma.evaluate(sol.z);
  d.W = hp.w.evaluate(sol.z);
  d.F1 = hp.f1.evaluate(sol.z);
  d.F2 = hp.f2.evaluate(sol.z);
  const Matrix yt = d.Y.transpose();
  d.K1 = solve_linear(yt, d.F1.transpose()).transpose();
  d.K2 = solve_linear(yt, d.F2.transpose()).transpose();
  d.Delta = solve_linear(yt, d.W.transpose()).transpose();
  d.P = sym(inverse(d.Y));
  d.solver_margin = sol.margin;
  d.margin = min_eigenvalue(sym(hb_lmi(d.Y, d.Gamma, d.W, lambda)));
  if (spec.mode == GammaMode::scalar || spec.mode == GammaMode::free) {
    const double c = static_cast<double>(sys.states()) / d.Y.trace();
    d.Y *= c;
    d.Gamma *= c;
    d.W *= c;
    d.F1 *= c;
    d.F2 *= c;
    d.P /= c;
    d.margin *= c;
    d.solver_margin *= c;
  }
  return d;
}

/// Verification form: Y symmetric, then Gamma, W, F1, F2 full; the LMI and
/// both equality sets, no normalization.
inline LmiProblem hb_check_problem(const SystemModel& sys, double lambda) {
  sys.validate();
  require_rate(lambda);
  const Index n = sys.states();
  const Index m = sys.inputs();
  VariablePool pool;
  const AffineMatrix y = pool.symmetric(n, "Y");
  const AffineMatrix gamma = pool.full(n, n, "Gamma");
  const AffineMatrix w = pool.full(n, n, "W");
  const AffineMatrix f1 = pool.full(m, n, "F1");
  const AffineMatrix f2 = pool.full(m, n, "F2");
  LmiProblem lp;
  lp.dim = pool.size();
  const AffineMatrix zero = AffineMatrix::zeros(n, n);
  const AffineMatrix step = y - 2.0 * gamma + w;
  lp.add_block("contractivity", AffineMatrix::blocks({{lambda * y, zero, step.transpose(), y},
                                                      {zero, lambda * y, -w.transpose(), zero},
                                                      {step, -w, y, zero},
                                                      {y, zero, zero, y}}));
  lp.add_equalities(sys.A * y + sys.B * f1 - step);
  lp.add_equalities(sys.B * f2 + w);
  return lp;
}

inline Vector hb_check_point(const HeavyBallDesign& d) {
  const Index n = d.Y.rows();
  Vector z(n * (n + 1) / 2 + d.Gamma.size() + d.W.size() + d.F1.size() + d.F2.size());
  Index at = 0;
  detail::pack_upper(sym(d.Y), z, at);
  detail::pack_full(d.Gamma, z, at);
  detail::pack_full(d.W, z, at);
  detail::pack_full(d.F1, z, at);
  detail::pack_full(d.F2, z, at);
  return z;
}

struct HbResiduals {
  double first;      // max |A Y + B F1 - (Y - 2 Gamma + W)|
  double second;     // max |B F2 + W|
  double augmented;  // max |hb_closed_loop - augmented_matrix|
};

inline HbResiduals hb_residuals(const SystemModel& sys, const HeavyBallDesign& d) {
  return {max_abs(sys.A * d.Y + sys.B * d.F1 - (d.Y - 2.0 * d.Gamma + d.W)),
          max_abs(sys.B * d.F2 + d.W),
          max_abs(hb_closed_loop(sys, d.K1, d.K2) - augmented_matrix(d.Gamma, d.P, d.Delta))};
}

}  // namespace gdctl
