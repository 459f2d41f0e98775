#pragma once

// Closed-loop simulation and trajectory diagnostics.

#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gdctl/system.hpp"

namespace gdctl {

enum class PolicyKind { static_gain, two_step };

/// u_k = K x_k, or u_k = K1 x_k + K2 x_{k-1} with x_{-1} = x_0.
struct Policy {
  PolicyKind kind = PolicyKind::static_gain;
  Matrix K1;
  Matrix K2;
  std::string name;

  static Policy state_feedback(Matrix k, std::string name = "static") {
    return {PolicyKind::static_gain, std::move(k), Matrix(), std::move(name)};
  }
  static Policy two_step(Matrix k1, Matrix k2, std::string name = "two-step") {
    return {PolicyKind::two_step, std::move(k1), std::move(k2), std::move(name)};
  }

  void validate(Index n, Index m) const {
    auto check = [&](const Matrix& k, const char* what) {
      if (k.rows() != m || k.cols() != n) {
        throw DimensionError(std::string("Policy: ") + what + " is " + shape_of(k) + ", expected " +
                             std::to_string(m) + "x" + std::to_string(n));
      }
    };
    check(K1, "K1");
    if (kind == PolicyKind::two_step) check(K2, "K2");
  }
};

struct Trajectory {
  std::vector<Vector> states;  // x_0 .. x_N
  std::vector<Vector> inputs;  // u_0 .. u_{N-1}
  std::vector<double> values;  // V_0 .. V_N, empty without P
  std::string system_name;
  std::string policy_name;

  std::size_t steps() const { return inputs.size(); }
  bool has_values() const { return !values.empty(); }
};

inline double quadratic_value(const Matrix& p, const Vector& x) { return x.dot(p * x); }

/// Two-step policies start from the given x_{-1}; static policies ignore it.
inline Trajectory simulate_from(const SystemModel& sys, const Policy& policy, const Vector& x0,
                                const Vector& x_prev, std::size_t steps,
                                const std::optional<Matrix>& p = std::nullopt) {
  sys.validate();
  const Index n = sys.states();
  policy.validate(n, sys.inputs());
  if (x0.size() != n) throw DimensionError("simulate: x0 has length " + std::to_string(x0.size()));
  if (x_prev.size() != n) throw DimensionError("simulate: x_-1 has length " + std::to_string(x_prev.size()));
  if (steps < 1) throw PreconditionError("simulate: steps must be >= 1");
  if (p && (p->rows() != n || p->cols() != n)) throw DimensionError("simulate: P is " + shape_of(*p));

  Trajectory tr;
  tr.policy_name = policy.name;
  tr.states.reserve(steps + 1);
  tr.inputs.reserve(steps);
  tr.states.push_back(x0);
  Vector prev = x_prev;
  for (std::size_t k = 0; k < steps; ++k) {
    const Vector& x = tr.states.back();
    Vector u = policy.K1 * x;
    if (policy.kind == PolicyKind::two_step) u += policy.K2 * prev;
    Vector next = sys.A * x + sys.B * u;
    if (!next.allFinite()) {
      throw DivergenceError("simulate: state became non-finite at step " + std::to_string(k + 1),
                            k + 1);
    }
    prev = x;
    tr.inputs.push_back(std::move(u));
    tr.states.push_back(std::move(next));
  }
  if (p) {
    tr.values.reserve(tr.states.size());
    for (const Vector& x : tr.states) tr.values.push_back(quadratic_value(*p, x));
  }
  return tr;
}

inline Trajectory simulate(const SystemModel& sys, const Policy& policy, const Vector& x0,
                           std::size_t steps, const std::optional<Matrix>& p = std::nullopt) {
  return simulate_from(sys, policy, x0, x0, steps, p);
}

struct ContractionProfile {
  std::vector<double> ratios;  // V_{k+1} / V_k, skipped where V_k <= 1e-300
  std::vector<std::size_t> indices;
  double max_ratio = 0.0;
  std::optional<std::size_t> first_violation;
};

inline ContractionProfile contraction_profile(const Trajectory& tr, const Matrix& p, double lambda) {
  if (!is_positive_definite(sym(p))) throw PreconditionError("contraction_profile: P is not PD");
  ContractionProfile prof;
  std::vector<double> v = tr.values;
  if (v.empty())
    for (const Vector& x : tr.states) v.push_back(quadratic_value(p, x));
  for (std::size_t k = 0; k + 1 < v.size(); ++k) {
    if (!(v[k] > 1e-300)) continue;
    const double r = v[k + 1] / v[k];
    prof.ratios.push_back(r);
    prof.indices.push_back(k);
    prof.max_ratio = std::max(prof.max_ratio, r);
    if (!prof.first_violation && r > lambda + 1e-9) prof.first_violation = k;
  }
  return prof;
}

struct DescentAngles {
  std::vector<double> angles;         // NaN at skipped indices
  std::vector<std::size_t> skipped;
  double max_angle = 0.0;
};

/// Angle between the step x_{k+1} - x_k and the negative gradient -2 P x_k.
inline DescentAngles descent_angle(const Trajectory& tr, const Matrix& p) {
  if (!is_positive_definite(sym(p))) throw PreconditionError("descent_angle: P is not PD");
  DescentAngles out;
  for (std::size_t k = 0; k + 1 < tr.states.size(); ++k) {
    const Vector& x = tr.states[k];
    const Vector step = tr.states[k + 1] - x;
    const Vector grad = -2.0 * (p * x);
    const double ns = step.norm();
    const double ng = grad.norm();
    if (x.norm() <= 1e-12 || ns <= 1e-12 * std::max(1.0, x.norm()) || ng == 0.0) {
      out.angles.push_back(std::nan(""));
      out.skipped.push_back(k);
      continue;
    }
    // atan2 of |a x b| and a.b stays accurate near 0 and pi, unlike acos.
    const double dot = step.dot(grad);
    const Vector rejection = step - (dot / (ng * ng)) * grad;
    const double a = std::atan2(rejection.norm() * ng, dot);
    out.angles.push_back(a);
    out.max_angle = std::max(out.max_angle, a);
  }
  return out;
}

using Polyline = std::vector<std::array<double, 2>>;

struct LevelSet {
  double level;
  Polyline points;  // closed: last point repeats the first
};

/// Points x with x'Px = c, mapped from the unit circle through P^{-1/2}.
inline std::vector<LevelSet> level_sets(const Matrix& p, const std::vector<double>& levels,
                                        std::size_t resolution = 200) {
  if (p.rows() != 2 || p.cols() != 2)
    throw DimensionError("level_sets: only 2x2 P is supported, got " + shape_of(p));
  if (resolution < 3) throw PreconditionError("level_sets: resolution must be >= 3");
  const SymmetricEigen eig = sym_eig(sym(p));
  if (!(eig.values(0) > 0.0)) throw PreconditionError("level_sets: P is not PD");
  std::vector<LevelSet> out;
  for (double c : levels) {
    if (!(c > 0.0)) throw PreconditionError("level_sets: levels must be positive");
    LevelSet ls{c, {}};
    ls.points.reserve(resolution + 1);
    for (std::size_t i = 0; i <= resolution; ++i) {
      const double th = 2.0 * M_PI * static_cast<double>(i % resolution) / static_cast<double>(resolution);
      Vector s(2);
      s << std::sqrt(c / eig.values(0)) * std::cos(th), std::sqrt(c / eig.values(1)) * std::sin(th);
      const Vector x = eig.vectors * s;
      ls.points.push_back({x(0), x(1)});
    }
    out.push_back(std::move(ls));
  }
  return out;
}

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// CSV with header k,x1..xn,u1..um,V (and an optional angle column).
/// The last row carries the final state with empty input cells.
inline void write_csv(std::ostream& os, const Trajectory& tr,
                      const std::vector<double>* angles = nullptr) {
  const Index n = tr.states.empty() ? 0 : tr.states.front().size();
  const Index m = tr.inputs.empty() ? 0 : tr.inputs.front().size();
  os << "k";
  for (Index i = 1; i <= n; ++i) os << ",x" << i;
  for (Index i = 1; i <= m; ++i) os << ",u" << i;
  os << ",V";
  if (angles) os << ",angle";
  os << "\n";
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    os << k;
    for (Index i = 0; i < n; ++i) os << "," << format_g17(tr.states[k](i));
    for (Index i = 0; i < m; ++i) {
      os << ",";
      if (k < tr.inputs.size()) os << format_g17(tr.inputs[k](i));
    }
    os << ",";
    if (tr.has_values()) os << format_g17(tr.values[k]);
    if (angles) {
      os << ",";
      if (k < angles->size() && !std::isnan((*angles)[k])) os << format_g17((*angles)[k]);
    }
    os << "\n";
  }
}

/// First step k with |x_i(k)| <= frac * |x_i(0)|.
inline std::optional<std::size_t> band_entry_step(const Trajectory& tr, Index i, double frac) {
  const double band = frac * std::abs(tr.states.front()(i));
  for (std::size_t k = 1; k < tr.states.size(); ++k)
    if (std::abs(tr.states[k](i)) <= band) return k;
  return std::nullopt;
}

}  // namespace gdctl
