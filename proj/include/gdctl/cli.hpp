#pragma once

// Subcommands of the gdctl tool. Each returns a process exit code:
// 0 ok, 1 usage or I/O error, 2 synthesis infeasible, 3 check failure.

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gdctl/io.hpp"

namespace gdctl::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kInfeasible = 2, kCheckFailed = 3 };

struct Options {
  std::string problem;
  std::string output;
  std::string design;
  std::string design2;
  std::optional<double> lambda;
  std::optional<std::string> gamma_mode;
  std::optional<std::string> gamma_bound;  // path to a JSON matrix
  std::optional<std::size_t> steps;
  std::vector<double> x0;
  bool angles = false;
  std::vector<double> levels;
  std::optional<std::string> dump_lmi;
};

inline std::string fmt(double v, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

namespace detail {

inline double rate_or(const Options& o, const io::ProblemFile& pf, double fallback) {
  const double lambda = o.lambda ? *o.lambda : pf.lambda.value_or(fallback);
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw io::FormatError("lambda must lie in (0, 1], got " + fmt(lambda, "%g"));
  return lambda;
}

inline GammaSpec gamma_spec(const Options& o, const io::ProblemFile& pf) {
  GammaSpec spec = pf.gamma;
  std::optional<Matrix> bound;
  if (o.gamma_bound) bound = io::matrix_from_json(io::parse_json(io::read_file(*o.gamma_bound)), "gamma bound");
  GammaMode mode = spec.mode;
  if (o.gamma_mode) {
    try {
      mode = parse_gamma_mode(*o.gamma_mode);
    } catch (const Error& e) {
      throw io::FormatError(e.what());
    }
  } else if (bound) {
    mode = GammaMode::bounded;
  }
  switch (mode) {
    case GammaMode::scalar: return GammaSpec::scalar();
    case GammaMode::free: return GammaSpec::free();
    case GammaMode::fixed:
      if (!spec.fixed_value) throw io::FormatError("fixed gamma mode needs spec.gamma.value in the problem");
      return GammaSpec::fixed(*spec.fixed_value);
    case GammaMode::bounded:
      if (bound) return GammaSpec::bounded(*bound);
      if (!spec.upper_bound) throw io::FormatError("bounded gamma mode needs --gamma-bound or spec.gamma.bound");
      return GammaSpec::bounded(*spec.upper_bound);
  }
  return spec;
}

inline void validate_spec(const GammaSpec& spec, Index n) {
  try {
    spec.validate(n);
  } catch (const Error& e) {
    throw io::FormatError(e.what());
  }
}

inline std::optional<Vector> start_state(const Options& o, const io::ProblemFile& pf) {
  if (!o.x0.empty()) {
    if (static_cast<Index>(o.x0.size()) != pf.system.states())
      throw io::FormatError("--x0 has " + std::to_string(o.x0.size()) + " entries, system has " +
                            std::to_string(pf.system.states()) + " states");
    return Eigen::Map<const Vector>(o.x0.data(), static_cast<Index>(o.x0.size()));
  }
  return pf.sim.x0;
}

inline void dump_lmi(const Options& o, const LmiProblem& lp) {
  if (o.dump_lmi) io::write_file(*o.dump_lmi, io::to_text(io::lmi_problem_to_json(lp)));
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const SynthesisInfeasibleError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const io::FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

/// The LMI is still solved so the message carries the best margin reached.
inline int report_unstabilizable(const LmiProblem& lp, std::ostream& err) {
  const SdpSolution sol = solve_feasibility(lp);
  err << "infeasible: (A, B) is not stabilizable, no contractive design exists (best margin "
      << fmt(sol.margin, "%.6e") << " in block '" << sol.active_block << "')\n";
  return int(kInfeasible);
}

}  // namespace detail

inline int cmd_synth(const Options& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const io::ProblemFile pf = io::load_problem(o.problem);
    const double lambda = detail::rate_or(o, pf, 1.0);
    const GammaSpec spec = detail::gamma_spec(o, pf);
    detail::validate_spec(spec, pf.system.states());
    const LmiProblem lp = gd_problem(pf.system, lambda, spec);
    detail::dump_lmi(o, lp);
    if (!is_stabilizable(pf.system)) return detail::report_unstabilizable(lp, err);
    const GdDesign d = synthesize_gd(pf.system, lambda, spec);
    io::write_file(o.output, io::emit_design(io::to_design_file(pf.system, d)));
    out << "synth: " << to_string(d.mode) << " mode, lambda " << fmt(lambda, "%g")
        << ", margin " << fmt(d.margin, "%.6e") << ", rho(A+BK) "
        << fmt(spectral_radius(closed_loop(pf.system, d.K)), "%.6f") << "\n";
    return int(kOk);
  });
}

inline int cmd_lqr(const Options& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const io::ProblemFile pf = io::load_problem(o.problem);
    if (!pf.lqr) throw io::FormatError("problem has no 'lqr' weights");
    if (!is_stabilizable(pf.system)) {
      err << "infeasible: (A, B) is not stabilizable, the Riccati equation has no stabilizing solution\n";
      return int(kInfeasible);
    }
    const LqrDesign l = design_lqr(pf.system, *pf.lqr);
    io::DesignFile df = io::to_design_file(pf.system, l);
    const std::optional<Vector> x0 = detail::start_state(o, pf);
    if (x0) df.values["cost"] = quadratic_value(l.P_bar, *x0);
    io::write_file(o.output, io::emit_design(df));
    out << "lqr: " << l.iterations << " Riccati iterations, residual " << fmt(l.residual, "%.3e");
    if (x0) out << ", cost " << fmt(df.values["cost"], "%.6f");
    out << "\n";
    return int(kOk);
  });
}

inline int cmd_hb(const Options& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const io::ProblemFile pf = io::load_problem(o.problem);
    const double lambda = detail::rate_or(o, pf, kDefaultHeavyBallRate);
    const GammaSpec spec = detail::gamma_spec(o, pf);
    detail::validate_spec(spec, pf.system.states());
    const LmiProblem lp = hb_problem(pf.system, lambda, spec);
    detail::dump_lmi(o, lp);
    if (!is_stabilizable(pf.system)) return detail::report_unstabilizable(lp, err);
    const HeavyBallDesign d = synthesize_hb(pf.system, lambda, spec);
    io::write_file(o.output, io::emit_design(io::to_design_file(pf.system, d)));
    out << "hb: " << to_string(d.mode) << " mode, lambda " << fmt(lambda, "%g") << ", margin "
        << fmt(d.margin, "%.6e") << ", augmented rho "
        << fmt(spectral_radius(hb_closed_loop(pf.system, d.K1, d.K2)), "%.6f") << "\n";
    return int(kOk);
  });
}

struct CheckRow {
  std::string name;
  double value;
  std::string limit;
  bool pass;
};

inline std::vector<CheckRow> check_rows(const io::DesignFile& df, const SystemModel& sys) {
  std::vector<CheckRow> rows;
  const Index n = sys.states();
  const Matrix eye = Matrix::Identity(n, n);
  auto at_most = [&](const std::string& name, double v, double lim) {
    rows.push_back({name, v, "<= " + fmt(lim, "%g"), v <= lim});
  };
  auto at_least = [&](const std::string& name, double v, double lim) {
    rows.push_back({name, v, ">= " + fmt(lim, "%g"), v >= lim});
  };
  auto below = [&](const std::string& name, double v, double lim) {
    rows.push_back({name, v, "< " + fmt(lim, "%g"), v < lim});
  };

  const Matrix& p = df.matrix("P");
  if (p.rows() != n || p.cols() != n) throw io::FormatError("design P does not match the system");
  const bool p_pd = is_positive_definite(sym(p));
  rows.push_back({"P_positive_definite", min_eigenvalue(sym(p)), "> 0", p_pd});
  if (!p_pd) return rows;
  const Matrix y = sym(inverse(sym(p)));
  const double lambda = df.lambda.value_or(1.0);

  if (df.policy == "heavy-ball") {
    HeavyBallDesign h;
    h.Y = y;
    h.P = p;
    h.Gamma = df.matrix("Gamma");
    h.Delta = df.matrix("Delta");
    h.K1 = df.matrix("K1");
    h.K2 = df.matrix("K2");
    h.W = h.Delta * y;
    h.F1 = h.K1 * y;
    h.F2 = h.K2 * y;
    h.lambda = lambda;
    const HbResiduals r = hb_residuals(sys, h);
    at_most("first_equality", r.first, 1e-7);
    at_most("second_equality", r.second, 1e-7);
    at_most("augmented_match", r.augmented, 1e-6);
    const CheckReport cr = check_solution(hb_check_problem(sys, lambda), hb_check_point(h));
    at_least("lmi_margin", cr.margin, -1e-10);
    below("augmented_rho", spectral_radius(hb_closed_loop(sys, h.K1, h.K2)), 1.0);
    return rows;
  }

  const Matrix& k = df.matrix("K");
  const Matrix& gamma = df.matrix("Gamma");
  const Matrix acl = closed_loop(sys, k);
  const Matrix f = k * y;
  at_most("matching_residual", max_abs(sys.A * y + sys.B * f - (y - 2.0 * gamma)), 1e-7);
  at_most("closed_loop_residual", max_abs(acl - (eye - 2.0 * gamma * p)), 1e-6);
  const CheckReport cr = check_solution(gd_check_problem(sys, lambda), gd_check_point(y, f, gamma));
  at_least("lmi_margin", cr.margin, -1e-10);
  below("rho", spectral_radius(acl), 1.0);

  if (df.policy == "lqr") {
    LqrWeights w{df.matrix("Q"), df.matrix("R")};
    const double scale = std::max(1.0, max_abs(p));
    at_most("riccati_residual", riccati_residual(sys, w, p, k), 1e-8 * scale);
    at_most("lqr_gain_match", max_abs(k - lqr_gain(sys, p, w.R)), 1e-8 * std::max(1.0, max_abs(k)));
  } else if (df.mode == "scalar") {
    // Gamma = gamma I makes I - (A + BK) = 2 gamma P, so the entrywise ratios
    // must agree and equal twice the stored gamma.
    const CollinearityReport col = collinearity(sys, k, p);
    rows.push_back({"collinearity_ratio", col.mean_ratio,
                    "spread " + fmt(col.max_relative_spread, "%.2e") + " <= 0.01",
                    col.max_relative_spread <= 1e-2});
    const double stored = gamma(0, 0);
    const double rel = std::abs(col.implied_gamma - stored) / std::max(std::abs(col.implied_gamma), 1e-300);
    rows.push_back({"gamma_scale", stored, "implied " + fmt(col.implied_gamma, "%.6g") + " within 1%",
                    rel <= 1e-2});
  }
  return rows;
}

inline int cmd_check(const Options& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const io::DesignFile df = io::load_design(o.design);
    const io::ProblemFile pf = io::load_problem(o.problem);
    const std::vector<CheckRow> rows = check_rows(df, pf.system);
    bool ok = true;
    char line[200];
    std::snprintf(line, sizeof line, "%-22s %-20s %-36s %s\n", "check", "value", "limit", "status");
    out << line;
    for (const auto& r : rows) {
      std::snprintf(line, sizeof line, "%-22s %-20s %-36s %s\n", r.name.c_str(),
                    fmt(r.value, "%.10g").c_str(), r.limit.c_str(), r.pass ? "PASS" : "FAIL");
      out << line;
      ok = ok && r.pass;
    }
    out << (ok ? "all checks passed\n" : "check FAILED\n");
    return int(ok ? kOk : kCheckFailed);
  });
}

inline int cmd_sim(const Options& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const io::DesignFile df = io::load_design(o.design);
    const io::ProblemFile pf = io::load_problem(o.problem);
    const std::optional<Vector> x0 = detail::start_state(o, pf);
    if (!x0) throw io::FormatError("no initial state: pass --x0 or set sim.x0 in the problem");
    const std::size_t steps = o.steps.value_or(pf.sim.steps);
    if (steps < 1) throw io::FormatError("--steps must be >= 1");
    const Matrix& p = df.matrix("P");
    Trajectory tr = simulate(pf.system, io::policy_of(df), *x0, steps, p);
    tr.system_name = pf.name;

    const bool as_json = o.output.size() >= 5 && o.output.compare(o.output.size() - 5, 5, ".json") == 0;
    std::optional<DescentAngles> angles;
    if (o.angles) angles = descent_angle(tr, p);
    if (as_json) {
      io::json j = io::trajectory_to_json(tr);
      if (angles) {
        j["angles"] = io::json::array();
        for (double a : angles->angles) j["angles"].push_back(a);
      }
      io::write_file(o.output, io::to_text(j));
    } else {
      std::ostringstream csv;
      write_csv(csv, tr, angles ? &angles->angles : nullptr);
      io::write_file(o.output, csv.str());
    }

    const std::vector<double>& levels = o.levels.empty() ? pf.sim.levels : o.levels;
    if (!levels.empty()) {
      io::write_file(o.output + ".levels.json",
                     io::to_text(io::level_sets_to_json(level_sets(p, levels))));
    }
    out << "sim: " << steps << " steps, final |x| " << fmt(tr.states.back().norm(), "%.6e") << "\n";
    return int(kOk);
  });
}

struct DesignSummary {
  std::optional<double> cost;
  double rho = 0.0;
  double margin = 0.0;
  double max_angle = 0.0;
};

inline DesignSummary summarize(const io::DesignFile& df, const io::ProblemFile& pf,
                               const std::optional<Vector>& x0, std::size_t steps) {
  const SystemModel& sys = pf.system;
  DesignSummary s;
  const Matrix& p = df.matrix("P");
  const Matrix y = sym(inverse(sym(p)));
  const double lambda = df.lambda.value_or(1.0);
  if (df.policy == "heavy-ball") {
    const Matrix w = df.matrix("Delta") * y;
    s.rho = spectral_radius(hb_closed_loop(sys, df.matrix("K1"), df.matrix("K2")));
    s.margin = min_eigenvalue(sym(hb_lmi(y, df.matrix("Gamma"), w, lambda)));
  } else {
    s.rho = spectral_radius(closed_loop(sys, df.matrix("K")));
    s.margin = check_contractivity(y, df.matrix("Gamma"), lambda).margin;
    if (pf.lqr && x0 && s.rho < 1.0) s.cost = closed_loop_cost(sys, df.matrix("K"), *pf.lqr, *x0);
  }
  if (x0) {
    try {
      s.max_angle = descent_angle(simulate(sys, io::policy_of(df), *x0, steps), p).max_angle;
    } catch (const DivergenceError&) {
      s.max_angle = std::nan("");
    }
  }
  return s;
}

inline int cmd_compare(const Options& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const io::DesignFile a = io::load_design(o.design);
    const io::DesignFile b = io::load_design(o.design2);
    const io::ProblemFile pf = io::load_problem(o.problem);
    const std::optional<Vector> x0 = detail::start_state(o, pf);
    const std::size_t steps = o.steps.value_or(pf.sim.steps);
    const DesignSummary sa = summarize(a, pf, x0, steps);
    const DesignSummary sb = summarize(b, pf, x0, steps);
    auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("n/a"); };
    auto delta = [](const std::optional<double>& x, const std::optional<double>& y) {
      return x && y ? fmt(*y - *x) : std::string("n/a");
    };
    char line[200];
    std::snprintf(line, sizeof line, "%-12s %-20s %-20s %-20s\n", "metric", a.policy.c_str(),
                  b.policy.c_str(), "delta");
    out << line;
    auto row = [&](const char* name, const std::optional<double>& x, const std::optional<double>& y) {
      std::snprintf(line, sizeof line, "%-12s %-20s %-20s %-20s\n", name, opt(x).c_str(),
                    opt(y).c_str(), delta(x, y).c_str());
      out << line;
    };
    row("cost", sa.cost, sb.cost);
    row("rho", sa.rho, sb.rho);
    row("lmi_margin", sa.margin, sb.margin);
    row("max_angle", sa.max_angle, sb.max_angle);
    return int(kOk);
  });
}

}  // namespace gdctl::cli
