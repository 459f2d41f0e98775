#pragma once

// Gradient-descent parameterization of static state feedback.
//
// A closed loop A + BK is read as one gradient step on V(x) = x^T P x with
// direction matrix Gamma:  x_{k+1} = (I - 2 Gamma P) x_k.  With Y = P^-1 and
// F = K Y the matching condition becomes the linear equality
// A Y + B F = Y - 2 Gamma, and lambda-contractivity of V is the LMI
//
//   [ lambda Y       (Y - 2 Gamma)^T ]
//   [ Y - 2 Gamma     Y              ]  > 0.

#include <cmath>
#include <optional>
#include <string>

#include "gdctl/affine.hpp"
#include "gdctl/sdp.hpp"
#include "gdctl/system.hpp"

namespace gdctl {

enum class GammaMode { scalar, fixed, free, bounded };

inline const char* to_string(GammaMode m) {
  switch (m) {
    case GammaMode::scalar: return "scalar";
    case GammaMode::fixed: return "fixed";
    case GammaMode::free: return "free";
    case GammaMode::bounded: return "bounded";
  }
  return "unknown";
}

inline GammaMode parse_gamma_mode(const std::string& s) {
  if (s == "scalar") return GammaMode::scalar;
  if (s == "fixed") return GammaMode::fixed;
  if (s == "free") return GammaMode::free;
  if (s == "bounded") return GammaMode::bounded;
  throw Error("unknown gamma mode '" + s + "' (expected scalar|fixed|free|bounded)");
}

struct GammaSpec {
  GammaMode mode = GammaMode::scalar;
  std::optional<Matrix> fixed_value;  // fixed mode
  std::optional<Matrix> upper_bound;  // bounded mode, symmetric U with sym(Gamma) <= U
  double pd_floor = 1e-8;             // sym(Gamma) >= pd_floor I

  static GammaSpec scalar() { return {}; }
  static GammaSpec free() { return {GammaMode::free, std::nullopt, std::nullopt, 1e-8}; }
  static GammaSpec fixed(Matrix g) { return {GammaMode::fixed, std::move(g), std::nullopt, 1e-8}; }
  static GammaSpec bounded(Matrix u) { return {GammaMode::bounded, std::nullopt, std::move(u), 1e-8}; }

  void validate(Index n) const {
    if (mode == GammaMode::fixed) {
      if (!fixed_value) throw PreconditionError("GammaSpec: fixed mode requires a value");
      if (fixed_value->rows() != n || fixed_value->cols() != n)
        throw DimensionError("GammaSpec: fixed Gamma must be " + std::to_string(n) + "x" +
                             std::to_string(n));
      for (const Complex& v : eigenvalues(*fixed_value).values) {
        if (!(v.real() > 0.0))
          throw PreconditionError("GammaSpec: fixed Gamma needs eigenvalues with positive real part");
      }
    }
    if (mode == GammaMode::bounded) {
      if (!upper_bound) throw PreconditionError("GammaSpec: bounded mode requires an upper bound");
      if (upper_bound->rows() != n || upper_bound->cols() != n)
        throw DimensionError("GammaSpec: bound U must be " + std::to_string(n) + "x" +
                             std::to_string(n));
      require_symmetric(*upper_bound, default_symmetry_tol(*upper_bound), "GammaSpec bound");
    }
  }
};

struct GdDesign {
  Matrix Gamma;
  Matrix P;
  Matrix K;
  Matrix Y;
  Matrix F;
  double lambda = 1.0;
  double margin = 0.0;         // smallest eigenvalue of the contractivity LMI
  double solver_margin = 0.0;  // smallest eigenvalue over every synthesis block
  GammaMode mode = GammaMode::scalar;
};

struct ContractivityReport {
  double margin;   // smallest eigenvalue of the assembled LMI
  bool contractive;  // margin > 0
};

inline void require_rate(double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw PreconditionError("contraction rate lambda must lie in (0, 1], got " +
                            std::to_string(lambda));
  }
}

inline Matrix contractivity_lmi(const Matrix& y, const Matrix& gamma, double lambda) {
  const Index n = y.rows();
  const Matrix m = y - 2.0 * gamma;
  Matrix l(2 * n, 2 * n);
  l << lambda * y, m.transpose(), m, y;
  return l;
}

/// Smallest eigenvalue of the contractivity LMI for V = x^T Y^-1 x.
inline ContractivityReport check_contractivity(const Matrix& y, const Matrix& gamma,
                                               double lambda) {
  require_rate(lambda);
  require_symmetric(y, default_symmetry_tol(y), "check_contractivity Y");
  if (gamma.rows() != y.rows() || gamma.cols() != y.cols())
    throw DimensionError("check_contractivity: Gamma shape " + shape_of(gamma));
  if (!is_positive_definite(sym(y))) throw PreconditionError("check_contractivity: Y is not PD");
  const double margin = min_eigenvalue(sym(contractivity_lmi(sym(y), gamma, lambda)));
  return {margin, margin > 0.0};
}

/// Rescales (Y, F, Gamma) jointly so that trace(Y) = n. K and A + BK are unchanged.
inline GdDesign canonicalize(GdDesign d) {
  const double n = static_cast<double>(d.Y.rows());
  const double c = n / d.Y.trace();
  d.Y *= c;
  d.F *= c;
  d.Gamma *= c;
  d.P /= c;
  d.margin *= c;
  d.solver_margin *= c;
  return d;
}

struct SynthesisOptions {
  SdpOptions sdp;
};

namespace detail {

struct GdProblem {
  LmiProblem lmi;
  AffineMatrix y, f, gamma;
};

inline GdProblem build_gd_problem(const SystemModel& sys, double lambda, const GammaSpec& spec) {
  const Index n = sys.states();
  const Index m = sys.inputs();
  VariablePool pool;
  GdProblem gp;
  gp.y = pool.symmetric(n, "Y");
  gp.f = pool.full(m, n, "F");
  switch (spec.mode) {
    case GammaMode::scalar: gp.gamma = pool.scaled_identity(n, "gamma"); break;
    case GammaMode::fixed: gp.gamma = AffineMatrix(*spec.fixed_value); break;
    case GammaMode::free:
    case GammaMode::bounded: gp.gamma = pool.full(n, n, "Gamma"); break;
  }
  gp.lmi.dim = pool.size();

  const AffineMatrix step = gp.y - 2.0 * gp.gamma;
  gp.lmi.add_block("contractivity", AffineMatrix::blocks({{lambda * gp.y, step.transpose()},
                                                          {step, gp.y}}));
  const Matrix eye = Matrix::Identity(n, n);
  if (spec.mode != GammaMode::fixed) {
    gp.lmi.add_block("gamma_pd", gp.gamma.symmetric_part() - spec.pd_floor * eye);
  }
  if (spec.mode == GammaMode::bounded) {
    gp.lmi.add_block("gamma_bound", AffineMatrix(*spec.upper_bound) - gp.gamma.symmetric_part());
  }
  gp.lmi.add_equalities(sys.A * gp.y + sys.B * gp.f - step);

  AffineMatrix trace_y(1, 1);
  for (const auto& [var, coef] : gp.y.terms())
    trace_y.add_term(var, Matrix::Constant(1, 1, coef.trace()));
  const Matrix n_const = Matrix::Constant(1, 1, static_cast<double>(n));
  if (spec.mode == GammaMode::scalar || spec.mode == GammaMode::free) {
    // The feasible set is a cone in (Y, F, Gamma); fix its scale.
    gp.lmi.add_equality(trace_y - n_const);
  } else if (spec.mode == GammaMode::bounded) {
    // Scaling down keeps Gamma <= U, scaling up does not: cap the scale only.
    gp.lmi.add_block("scale", AffineMatrix(n_const) - trace_y);
  }
  return gp;
}

}  // namespace detail

/// Builds the synthesis LMI without solving it (for inspection and dumps).
inline LmiProblem gd_problem(const SystemModel& sys, double lambda, const GammaSpec& spec) {
  sys.validate();
  require_rate(lambda);
  spec.validate(sys.states());
  return detail::build_gd_problem(sys, lambda, spec).lmi;
}

/// Synthesizes (Gamma, P, K) with A + BK = I - 2 Gamma P and a lambda-contractive V.
inline GdDesign synthesize_gd(const SystemModel& sys, double lambda, const GammaSpec& spec,
                              const SynthesisOptions& opt = {}) {
  sys.validate();
  require_rate(lambda);
  spec.validate(sys.states());
  if (!is_stabilizable(sys)) throw PreconditionError("synthesize_gd: (A, B) is not stabilizable");

  const detail::GdProblem gp = detail::build_gd_problem(sys, lambda, spec);
  const SdpSolution sol = solve_feasibility(gp.lmi, opt.sdp);
  if (sol.status != SdpStatus::feasible) {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "synthesize_gd: no design with margin > %.1e (best margin %.6e, status %s, "
                  "active block '%s')",
                  opt.sdp.strictness, sol.margin, to_string(sol.status), sol.active_block.c_str());
    throw SynthesisInfeasibleError(buf, sol.margin, sol.active_block);
  }

  GdDesign d;
  d.mode = spec.mode;
  d.lambda = lambda;
  d.Y = sym(gp.y.evaluate(sol.z));
  d.F = gp.f.evaluate(sol.z);
  d.Gamma = gp.gamma.evaluate(sol.z);
  d.K = solve_linear(d.Y.transpose(), d.F.transpose()).transpose();
  d.P = sym(inverse(d.Y));
  d.solver_margin = sol.margin;
  d.margin = check_contractivity(d.Y, d.Gamma, lambda).margin;
  if (spec.mode == GammaMode::scalar || spec.mode == GammaMode::free) d = canonicalize(d);
  return d;
}

/// Verification form of the synthesis problem: Y symmetric, F and Gamma full,
/// contractivity block plus the matching equalities, no normalization.
/// Variables are laid out as Y (upper triangle, row-major), F, Gamma.
inline LmiProblem gd_check_problem(const SystemModel& sys, double lambda) {
  sys.validate();
  require_rate(lambda);
  VariablePool pool;
  const AffineMatrix y = pool.symmetric(sys.states(), "Y");
  const AffineMatrix f = pool.full(sys.inputs(), sys.states(), "F");
  const AffineMatrix gamma = pool.full(sys.states(), sys.states(), "Gamma");
  LmiProblem lp;
  lp.dim = pool.size();
  const AffineMatrix step = y - 2.0 * gamma;
  lp.add_block("contractivity", AffineMatrix::blocks({{lambda * y, step.transpose()}, {step, y}}));
  lp.add_equalities(sys.A * y + sys.B * f - step);
  return lp;
}

namespace detail {

inline void pack_upper(const Matrix& m, Vector& z, Index& at) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = i; j < m.cols(); ++j) z(at++) = m(i, j);
}

inline void pack_full(const Matrix& m, Vector& z, Index& at) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) z(at++) = m(i, j);
}

}  // namespace detail

/// Decision vector of gd_check_problem for a given (Y, F, Gamma).
inline Vector gd_check_point(const Matrix& y, const Matrix& f, const Matrix& gamma) {
  const Index n = y.rows();
  Vector z(n * (n + 1) / 2 + f.size() + gamma.size());
  Index at = 0;
  detail::pack_upper(sym(y), z, at);
  detail::pack_full(f, z, at);
  detail::pack_full(gamma, z, at);
  return z;
}

struct ClosedLoopReport {
  Matrix matrix;    // A + BK
  double residual;  // max |(A + BK) - (I - 2 Gamma P)|
};

inline ClosedLoopReport closed_loop(const SystemModel& sys, const GdDesign& d) {
  const Matrix acl = closed_loop(sys, d.K);
  const Index n = sys.states();
  const Matrix gd = Matrix::Identity(n, n) - 2.0 * d.Gamma * d.P;
  return {acl, max_abs(acl - gd)};
}

/// max |A Y + B F - (Y - 2 Gamma)|
inline double matching_residual(const SystemModel& sys, const GdDesign& d) {
  return max_abs(sys.A * d.Y + sys.B * d.F - (d.Y - 2.0 * d.Gamma));
}

struct InverseParameterization {
  Matrix Gamma;
  double min_real_part = 0.0;  // spectrum of I - (A + BK)
  double max_real_part = 0.0;
  bool spectrum_in_range = false;     // every real part inside (0, 2)
  bool gamma_eigs_positive = false;   // every eigenvalue of Gamma has positive real part
  bool gamma_sym_positive = false;    // sym(Gamma) > 0 (not implied by stability)
};

/// Gamma = (I - (A + BK)) P^-1 / 2 for any stabilizing K and PD P.
inline InverseParameterization inverse_parameterize(const SystemModel& sys, const Matrix& k,
                                                    const Matrix& p) {
  sys.validate();
  const Matrix acl = closed_loop(sys, k);
  const double rho = spectral_radius(acl);
  if (!(rho < 1.0)) {
    throw PreconditionError("inverse_parameterize: closed loop is not stable (rho = " +
                            std::to_string(rho) + ")");
  }
  require_symmetric(p, default_symmetry_tol(p), "inverse_parameterize P");
  if (!is_positive_definite(sym(p))) throw PreconditionError("inverse_parameterize: P is not PD");

  const Index n = sys.states();
  const Matrix deficit = Matrix::Identity(n, n) - acl;
  InverseParameterization out;
  // Gamma P = deficit / 2  <=>  P Gamma^T = deficit^T / 2.
  out.Gamma = solve_linear(sym(p), 0.5 * deficit.transpose()).transpose();
  out.min_real_part = std::numeric_limits<double>::infinity();
  out.max_real_part = -std::numeric_limits<double>::infinity();
  for (const Complex& v : eigenvalues(deficit).values) {
    out.min_real_part = std::min(out.min_real_part, v.real());
    out.max_real_part = std::max(out.max_real_part, v.real());
  }
  out.spectrum_in_range = out.min_real_part > 0.0 && out.max_real_part < 2.0;
  out.gamma_eigs_positive = true;
  for (const Complex& v : eigenvalues(out.Gamma).values)
    if (!(v.real() > 0.0)) out.gamma_eigs_positive = false;
  out.gamma_sym_positive = is_positive_definite(sym(out.Gamma));
  return out;
}

/// Entrywise ratios of I - (A + BK) to P. In a scalar-Gamma design every
/// ratio equals 2 gamma.
struct CollinearityReport {
  Matrix ratios;          // NaN where |P_ij| is negligible
  double mean_ratio = 0.0;
  double max_relative_spread = 0.0;  // max |r_ij - mean| / |mean|
  double implied_gamma = 0.0;        // mean_ratio / 2
};

inline CollinearityReport collinearity(const SystemModel& sys, const Matrix& k, const Matrix& p) {
  const Index n = sys.states();
  const Matrix deficit = Matrix::Identity(n, n) - closed_loop(sys, k);
  CollinearityReport rep;
  rep.ratios = Matrix::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  const double floor = 1e-12 * std::max(1.0, max_abs(p));
  double sum = 0.0;
  int count = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (std::abs(p(i, j)) <= floor) continue;
      rep.ratios(i, j) = deficit(i, j) / p(i, j);
      sum += rep.ratios(i, j);
      ++count;
    }
  }
  rep.mean_ratio = count > 0 ? sum / count : 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (!std::isnan(rep.ratios(i, j)))
        rep.max_relative_spread = std::max(
            rep.max_relative_spread,
            std::abs(rep.ratios(i, j) - rep.mean_ratio) / std::max(std::abs(rep.mean_ratio), 1e-300));
  rep.implied_gamma = 0.5 * rep.mean_ratio;
  return rep;
}

}  // namespace gdctl
