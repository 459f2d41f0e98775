#pragma once

// JSON problem and design files, trajectory and LMI dumps.
// Every floating-point number is written with 17 significant digits so
// emit -> parse -> emit is byte-stable.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdctl/gdsynth.hpp"
#include "gdctl/heavyball.hpp"
#include "gdctl/lqr.hpp"
#include "gdctl/sdp.hpp"
#include "gdctl/trajsim.hpp"

namespace gdctl::io {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "gdctl 1.0.0";

/// Malformed or schema-violating input file.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : Error(line > 0 ? what + " (line " + std::to_string(line) + ", column " +
                             std::to_string(column) + ")"
                       : what),
        line_(line), column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// ---------------------------------------------------------------------------
// Reading

inline json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // e.byte is 1-based and points just past the offending character.
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw FormatError("malformed JSON", line, column);
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << text;
  if (!out) throw FormatError("write to '" + path + "' failed");
}

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                                const std::string& where) {
  if (!obj.is_object()) throw FormatError(where + ": expected an object");
  for (const auto& item : obj.items())
    if (!known.count(item.key())) throw FormatError(where + ": unknown key '" + item.key() + "'");
}

inline double number_from_json(const json& j, const std::string& where) {
  if (!j.is_number()) throw FormatError(where + ": expected a number");
  return j.get<double>();
}

/// Row-major nested array -> Matrix. A bare number is read as 1x1.
inline Matrix matrix_from_json(const json& j, const std::string& where) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw FormatError(where + ": expected a non-empty nested array");
  const Index rows = static_cast<Index>(j.size());
  if (!j[0].is_array() || j[0].empty()) throw FormatError(where + ": rows must be non-empty arrays");
  const Index cols = static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw FormatError(where + ": array is not rectangular (row " + std::to_string(i) + ")");
    for (Index k = 0; k < cols; ++k)
      m(i, k) = number_from_json(row[static_cast<std::size_t>(k)], where);
  }
  return m;
}

inline Vector vector_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw FormatError(where + ": expected a non-empty array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number_from_json(j[i], where);
  return v;
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic writer

namespace detail {

inline void emit_number(std::string& out, double v) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

inline void emit(std::string& out, const json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& item : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += inner + json(item.key()).dump() + ": ";
        emit(out, item.value(), indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case json::value_t::array: {
      // Arrays of scalars stay on one line; nested arrays get one row per line.
      bool flat = true;
      for (const auto& v : j)
        if (v.is_structured()) flat = false;
      if (flat) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          emit(out, j[i], indent + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        emit(out, j[i], indent + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case json::value_t::number_float: emit_number(out, j.get<double>()); return;
    default: out += j.dump(); return;
  }
}

}  // namespace detail

/// Pretty JSON with sorted keys and %.17g floats.
inline std::string to_text(const json& j) {
  std::string out;
  detail::emit(out, j, 0);
  out += "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Problem files

struct SimSettings {
  std::optional<Vector> x0;
  std::size_t steps = 50;
  std::vector<double> levels;
};

struct ProblemFile {
  std::string name;
  SystemModel system;
  std::optional<double> lambda;
  GammaSpec gamma = GammaSpec::scalar();
  std::optional<LqrWeights> lqr;
  SimSettings sim;
};

inline GammaSpec gamma_from_json(const json& j) {
  reject_unknown_keys(j, {"mode", "value", "bound"}, "spec.gamma");
  if (!j.contains("mode") || !j["mode"].is_string()) throw FormatError("spec.gamma: 'mode' string required");
  GammaMode mode;
  try {
    mode = parse_gamma_mode(j["mode"].get<std::string>());
  } catch (const Error& e) {
    throw FormatError(std::string("spec.gamma: ") + e.what());
  }
  switch (mode) {
    case GammaMode::scalar: return GammaSpec::scalar();
    case GammaMode::free: return GammaSpec::free();
    case GammaMode::fixed:
      if (!j.contains("value")) throw FormatError("spec.gamma: fixed mode needs 'value'");
      return GammaSpec::fixed(matrix_from_json(j["value"], "spec.gamma.value"));
    case GammaMode::bounded:
      if (!j.contains("bound")) throw FormatError("spec.gamma: bounded mode needs 'bound'");
      return GammaSpec::bounded(matrix_from_json(j["bound"], "spec.gamma.bound"));
  }
  throw FormatError("spec.gamma: unsupported mode");
}

inline ProblemFile problem_from_json(const json& j) {
  reject_unknown_keys(j, {"name", "system", "spec", "lqr", "sim"}, "problem");
  ProblemFile pf;
  if (j.contains("name")) {
    if (!j["name"].is_string()) throw FormatError("problem.name: expected a string");
    pf.name = j["name"].get<std::string>();
  }
  if (!j.contains("system")) throw FormatError("problem: 'system' is required");
  const json& sj = j["system"];
  reject_unknown_keys(sj, {"A", "B"}, "system");
  if (!sj.contains("A") || !sj.contains("B")) throw FormatError("system: 'A' and 'B' are required");
  pf.system.A = matrix_from_json(sj["A"], "system.A");
  pf.system.B = matrix_from_json(sj["B"], "system.B");
  try {
    pf.system.validate();
  } catch (const Error& e) {
    throw FormatError(e.what());
  }
  const Index n = pf.system.states();

  if (j.contains("spec")) {
    const json& sp = j["spec"];
    reject_unknown_keys(sp, {"lambda", "gamma"}, "spec");
    if (sp.contains("lambda")) pf.lambda = number_from_json(sp["lambda"], "spec.lambda");
    if (sp.contains("gamma")) pf.gamma = gamma_from_json(sp["gamma"]);
  }
  if (j.contains("lqr")) {
    const json& lj = j["lqr"];
    reject_unknown_keys(lj, {"Q", "R"}, "lqr");
    if (!lj.contains("Q") || !lj.contains("R")) throw FormatError("lqr: 'Q' and 'R' are required");
    pf.lqr = LqrWeights{matrix_from_json(lj["Q"], "lqr.Q"), matrix_from_json(lj["R"], "lqr.R")};
    try {
      pf.lqr->validate(n, pf.system.inputs());
    } catch (const Error& e) {
      throw FormatError(e.what());
    }
  }
  if (j.contains("sim")) {
    const json& sj2 = j["sim"];
    reject_unknown_keys(sj2, {"x0", "steps", "levels"}, "sim");
    if (sj2.contains("x0")) {
      pf.sim.x0 = vector_from_json(sj2["x0"], "sim.x0");
      if (pf.sim.x0->size() != n) throw FormatError("sim.x0: length does not match A");
    }
    if (sj2.contains("steps")) {
      if (!sj2["steps"].is_number_integer() || sj2["steps"].get<long long>() < 1)
        throw FormatError("sim.steps: expected a positive integer");
      pf.sim.steps = sj2["steps"].get<std::size_t>();
    }
    if (sj2.contains("levels")) {
      const Vector lv = vector_from_json(sj2["levels"], "sim.levels");
      pf.sim.levels.assign(lv.data(), lv.data() + lv.size());
    }
  }
  return pf;
}

inline ProblemFile parse_problem(const std::string& text) { return problem_from_json(parse_json(text)); }
inline ProblemFile load_problem(const std::string& path) { return parse_problem(read_file(path)); }

// ---------------------------------------------------------------------------
// Design files

/// Flat design record. Matrices and scalar values sit at the top level of the
/// JSON object; provenance carries margins and residuals.
struct DesignFile {
  std::string policy;  // "gd", "heavy-ball" or "lqr"
  std::string mode;    // Gamma mode, empty for lqr
  std::optional<double> lambda;
  std::map<std::string, Matrix> matrices;
  std::map<std::string, double> values;
  std::string tool = kToolVersion;
  std::map<std::string, double> margins;
  std::map<std::string, double> residuals;

  const Matrix& matrix(const std::string& key) const {
    auto it = matrices.find(key);
    if (it == matrices.end()) throw FormatError("design: matrix '" + key + "' missing");
    return it->second;
  }
  bool has(const std::string& key) const { return matrices.count(key) > 0; }
};

inline json design_to_json(const DesignFile& d) {
  json j = json::object();
  j["policy"] = d.policy;
  if (!d.mode.empty()) j["mode"] = d.mode;
  if (d.lambda) j["lambda"] = *d.lambda;
  for (const auto& [k, m] : d.matrices) j[k] = matrix_to_json(m);
  for (const auto& [k, v] : d.values) j[k] = v;
  json prov = json::object();
  prov["tool"] = d.tool;
  prov["margins"] = json::object();
  for (const auto& [k, v] : d.margins) prov["margins"][k] = v;
  prov["residuals"] = json::object();
  for (const auto& [k, v] : d.residuals) prov["residuals"][k] = v;
  j["provenance"] = prov;
  return j;
}

inline std::string emit_design(const DesignFile& d) { return to_text(design_to_json(d)); }

inline DesignFile design_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("design: expected an object");
  DesignFile d;
  if (!j.contains("policy") || !j["policy"].is_string()) throw FormatError("design: 'policy' string required");
  d.policy = j["policy"].get<std::string>();
  if (d.policy != "gd" && d.policy != "heavy-ball" && d.policy != "lqr")
    throw FormatError("design: unknown policy '" + d.policy + "'");
  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    const json& v = item.value();
    if (key == "policy") continue;
    if (key == "mode") {
      if (!v.is_string()) throw FormatError("design.mode: expected a string");
      d.mode = v.get<std::string>();
    } else if (key == "lambda") {
      d.lambda = number_from_json(v, "design.lambda");
    } else if (key == "provenance") {
      reject_unknown_keys(v, {"tool", "margins", "residuals"}, "design.provenance");
      if (v.contains("tool")) d.tool = v["tool"].get<std::string>();
      auto read_map = [&](const char* name, std::map<std::string, double>& into) {
        if (!v.contains(name)) return;
        if (!v[name].is_object()) throw FormatError(std::string("design.provenance.") + name + ": expected an object");
        for (const auto& e : v[name].items())
          into[e.key()] = e.value().is_null() ? std::nan("")
                                              : number_from_json(e.value(), "design.provenance");
      };
      read_map("margins", d.margins);
      read_map("residuals", d.residuals);
    } else if (v.is_array()) {
      d.matrices[key] = matrix_from_json(v, "design." + key);
    } else if (v.is_number()) {
      d.values[key] = v.get<double>();
    } else if (v.is_null()) {
      d.values[key] = std::nan("");
    } else {
      throw FormatError("design: unexpected key '" + key + "'");
    }
  }
  return d;
}

inline DesignFile parse_design(const std::string& text) { return design_from_json(parse_json(text)); }
inline DesignFile load_design(const std::string& path) { return parse_design(read_file(path)); }

inline DesignFile to_design_file(const SystemModel& sys, const GdDesign& g) {
  DesignFile d;
  d.policy = "gd";
  d.mode = to_string(g.mode);
  d.lambda = g.lambda;
  d.matrices = {{"Gamma", g.Gamma}, {"P", g.P}, {"K", g.K}};
  d.margins = {{"contractivity", g.margin}, {"solver", g.solver_margin}};
  d.residuals = {{"matching", matching_residual(sys, g)},
                 {"closed_loop", closed_loop(sys, g).residual}};
  return d;
}

inline DesignFile to_design_file(const SystemModel& sys, const HeavyBallDesign& h) {
  DesignFile d;
  d.policy = "heavy-ball";
  d.mode = to_string(h.mode);
  d.lambda = h.lambda;
  d.matrices = {{"Gamma", h.Gamma}, {"P", h.P}, {"Delta", h.Delta}, {"K1", h.K1}, {"K2", h.K2}};
  const HbResiduals r = hb_residuals(sys, h);
  d.margins = {{"contractivity", h.margin}, {"solver", h.solver_margin}};
  d.residuals = {{"first", r.first}, {"second", r.second}, {"augmented", r.augmented}};
  return d;
}

inline DesignFile to_design_file(const SystemModel& sys, const LqrDesign& l) {
  DesignFile d;
  d.policy = "lqr";
  d.matrices = {{"P", l.P_bar}, {"K", l.K_bar}, {"Gamma", l.Gamma_bar},
                {"Q", l.weights.Q}, {"R", l.weights.R}};
  const Index n = sys.states();
  d.residuals = {{"riccati", l.residual},
                 {"closed_loop", max_abs(Matrix::Identity(n, n) - 2.0 * l.Gamma_bar * l.P_bar -
                                         closed_loop(sys, l.K_bar))}};
  return d;
}

/// The state-feedback policy a design file describes.
inline Policy policy_of(const DesignFile& d) {
  if (d.policy == "heavy-ball") return Policy::two_step(d.matrix("K1"), d.matrix("K2"), d.policy);
  return Policy::state_feedback(d.matrix("K"), d.policy);
}

// ---------------------------------------------------------------------------
// Dumps

inline json trajectory_to_json(const Trajectory& tr) {
  json j = json::object();
  j["system"] = tr.system_name;
  j["policy"] = tr.policy_name;
  j["states"] = json::array();
  for (const auto& x : tr.states) j["states"].push_back(vector_to_json(x));
  j["inputs"] = json::array();
  for (const auto& u : tr.inputs) j["inputs"].push_back(vector_to_json(u));
  j["values"] = json::array();
  for (double v : tr.values) j["values"].push_back(v);
  return j;
}

inline json level_sets_to_json(const std::vector<LevelSet>& sets) {
  json out = json::array();
  for (const auto& ls : sets) {
    json pts = json::array();
    for (const auto& p : ls.points) pts.push_back(json::array({p[0], p[1]}));
    out.push_back(json{{"level", ls.level}, {"points", pts}});
  }
  return out;
}

inline json lmi_problem_to_json(const LmiProblem& p) {
  json j = json::object();
  j["dim"] = p.dim;
  j["blocks"] = json::array();
  for (const auto& b : p.blocks) {
    json coeffs = json::array();
    for (const auto& c : b.coefficients) coeffs.push_back(matrix_to_json(c));
    j["blocks"].push_back(json{{"name", b.name}, {"constant", matrix_to_json(b.constant)},
                               {"coefficients", coeffs}});
  }
  j["eq_matrix"] = p.eq_matrix.size() ? matrix_to_json(p.eq_matrix) : json::array();
  j["eq_rhs"] = vector_to_json(p.eq_rhs.size() ? p.eq_rhs : Vector());
  if (p.objective) j["objective"] = vector_to_json(*p.objective);
  return j;
}

}  // namespace gdctl::io
