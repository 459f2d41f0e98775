// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gdctl/cli.hpp"

using namespace gdctl;
namespace fs = std::filesystem;

namespace {

const std::string kCli = GDCTL_CLI_PATH;
const std::string kProblems = GDCTL_PROBLEMS_DIR;

SystemModel steering() {
  SystemModel s;
  s.A.resize(2, 2);
  s.A << 1.0, 0.2, 0.0, 1.0;
  s.B.resize(2, 1);
  s.B << 0.06, 0.2;
  return s;
}

Vector steering_x0() {
  Vector x(2);
  x << -1.0, -0.3;
  return x;
}

LqrWeights steering_weights() { return {Matrix::Identity(2, 2), Matrix::Constant(1, 1, 10.0)}; }

Matrix mat(Index r, Index c, std::initializer_list<double> v) {
  Matrix m(r, c);
  auto it = v.begin();
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = *it++;
  return m;
}

Matrix gaussian(std::mt19937& rng, Index r, Index c, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = d(rng);
  return m;
}

SystemModel random_system(std::mt19937& rng, Index n, Index m) {
  SystemModel s{gaussian(rng, n, n), gaussian(rng, n, m)};
  std::uniform_real_distribution<double> target(0.5, 1.5);
  s.A *= target(rng) / spectral_radius(s.A);
  return s;
}

std::string g(double v) { return cli::fmt(v, "%.6g"); }

int run_cli(const std::string& args) {
  const int status = std::system((kCli + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Outcome {
  bool pass;
  std::string detail;
};

Outcome criterion1() {
  const LqrDesign d = design_lqr(steering(), steering_weights());
  const double dp = max_abs(d.P_bar - mat(2, 2, {13.08, 13.30, 13.30, 37.63}));
  const double dk = max_abs(d.K_bar - mat(1, 2, {-0.29, -0.76}));
  return {dp <= 0.01 && dk <= 0.01, "|P - printed| " + g(dp) + ", |K - printed| " + g(dk)};
}

Outcome criterion2() {
  const SystemModel sys = steering();
  const LqrWeights w = steering_weights();
  const LqrDesign d = design_lqr(sys, w);
  const double j1 = closed_loop_cost(sys, d.K_bar, w, steering_x0());
  const double j2 = closed_loop_cost(sys, mat(1, 2, {-0.23, -0.69}), w, steering_x0());
  return {std::abs(j1 - 24.45) <= 0.02 && std::abs(j2 - 24.99) <= 0.3,
          "J(K_bar) " + g(j1) + ", J([-0.23, -0.69]) " + g(j2)};
}

Outcome criterion3() {
  const SystemModel sys = steering();
  const LqrDesign d = design_lqr(sys, steering_weights());
  const Matrix gamma = gamma_of_lqr(sys, d.K_bar, d.P_bar);
  const double match = max_abs(Matrix::Identity(2, 2) - 2.0 * gamma * d.P_bar - closed_loop(sys, d.K_bar));
  const double printed = max_abs(2.0 * gamma - mat(2, 2, {0.0085, -0.0071, 0.00052, 0.0038}));
  return {match <= 1e-9 && printed <= 5e-4,
          "|I - 2 Gamma P - (A + BK)| " + g(match) + ", |2 Gamma - printed| " + g(printed)};
}

Outcome criterion4() {
  const SystemModel sys = steering();
  const GdDesign d = synthesize_gd(sys, 1.0, GammaSpec::scalar());
  const double residual = max_abs(sys.A * d.Y + sys.B * d.F - (d.Y - 2.0 * d.Gamma));
  const Matrix acl = closed_loop(sys, d.K);
  const double rho = spectral_radius(acl);
  const double asym = max_abs(acl - acl.transpose());
  std::mt19937 rng(4);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Trajectory tr = simulate(sys, Policy::state_feedback(d.K), gaussian(rng, 2, 1), 50);
    worst = std::max(worst, descent_angle(tr, d.P).max_angle);
  }
  const bool pass = residual <= 1e-7 && d.margin >= 0.0 && rho < 1.0 && asym <= 1e-5 && worst <= 1e-6;
  return {pass, "residual " + g(residual) + ", margin " + g(d.margin) + ", rho " + g(rho) +
                    ", asymmetry " + g(asym) + ", max angle " + g(worst)};
}

Outcome criterion5() {
  io::DesignFile df;
  df.policy = "gd";
  df.mode = "scalar";
  df.lambda = 1.0;
  df.matrices = {{"Gamma", 0.0015 * Matrix::Identity(2, 2)},
                 {"P", mat(2, 2, {1.69, 5.65, 5.65, 32.95})},
                 {"K", mat(1, 2, {-1.33, -7.76})}};
  const std::string path = (fs::temp_directory_path() / "gdctl_acceptance_printed.json").string();
  io::write_file(path, io::emit_design(df));
  const int code = run_cli("check " + path + " " + kProblems + "/steering.json");
  fs::remove(path);

  const auto rows = cli::check_rows(df, steering());
  std::optional<cli::CheckRow> col, scale;
  for (const auto& r : rows) {
    if (r.name == "collinearity_ratio") col = r;
    if (r.name == "gamma_scale") scale = r;
  }
  if (!col || !scale) return {false, "collinearity or gamma_scale row missing"};
  const CollinearityReport rep = collinearity(steering(), df.matrix("K"), df.matrix("P"));
  const bool pass = col->pass && std::abs(rep.mean_ratio - 0.0472) <= 1e-2 * 0.0472 &&
                    rep.max_relative_spread <= 1e-2 && !scale->pass && code == 3;
  return {pass, "ratio " + g(rep.mean_ratio) + " (spread " + g(rep.max_relative_spread) + "), implied gamma " +
                    g(rep.implied_gamma) + " vs printed 0.0015, check exit " + std::to_string(code)};
}

Outcome criterion6() {
  const SystemModel sys = steering();
  const GdDesign d = synthesize_gd(sys, 1.0, GammaSpec::bounded(mat(2, 2, {0.001, 0.0, 0.0, 0.1})));
  const Trajectory tr = simulate(sys, Policy::state_feedback(d.K), steering_x0(), 5000);
  const auto e1 = band_entry_step(tr, 0, 0.05);
  const auto e2 = band_entry_step(tr, 1, 0.05);
  const bool pass = e2 && (!e1 || *e2 < *e1);
  auto show = [](const std::optional<std::size_t>& s) { return s ? std::to_string(*s) : std::string("never"); };
  return {pass, "x2 enters 5% band at step " + show(e2) + ", x1 at step " + show(e1)};
}

Outcome criterion7() {
  std::mt19937 rng(7);
  int loops = 0, violations = 0;
  double lo = 1e300, hi = -1e300;
  while (loops < 500) {
    const Index n = 1 + loops % 4;
    const SystemModel sys = random_system(rng, n, 1 + loops % 2);
    const Matrix k = gaussian(rng, sys.inputs(), n);
    const Matrix acl = closed_loop(sys, k);
    if (!(spectral_radius(acl) < 1.0)) continue;
    const Matrix p = sym(discrete_lyapunov(acl, Matrix::Identity(n, n)));
    const InverseParameterization ip = inverse_parameterize(sys, k, p);
    lo = std::min(lo, ip.min_real_part);
    hi = std::max(hi, ip.max_real_part);
    if (!ip.spectrum_in_range) ++violations;
    ++loops;
  }
  return {violations == 0, std::to_string(loops) + " loops, real parts in [" + g(lo) + ", " + g(hi) + "], " +
                               std::to_string(violations) + " violations"};
}

Outcome criterion8() {
  std::vector<std::string> notes;
  bool pass = true;
  const SystemModel sys = steering();
  try {
    const HeavyBallDesign d = synthesize_hb(sys, kDefaultHeavyBallRate, GammaSpec::free());
    const HbResiduals r = hb_residuals(sys, d);
    const double rho = spectral_radius(hb_closed_loop(sys, d.K1, d.K2));
    const bool ok = r.first <= 1e-7 && r.second <= 1e-7 && rho <= std::sqrt(0.99) + 1e-6;
    pass = pass && ok;
    notes.push_back("steering synthesis feasible, augmented rho " + g(rho));
    std::mt19937 rng(8);
    int broken = 0;
    for (int i = 0; i < 100; ++i) {
      const Vector x0 = gaussian(rng, 2, 1), xm1 = gaussian(rng, 2, 1);
      const Trajectory tr = simulate_from(sys, Policy::two_step(d.K1, d.K2), x0, xm1, 50);
      double prev = quadratic_value(d.P, x0) + quadratic_value(d.P, xm1);
      for (std::size_t k = 0; k + 1 < tr.states.size(); ++k) {
        const double next = quadratic_value(d.P, tr.states[k + 1]) + quadratic_value(d.P, tr.states[k]);
        if (next > d.lambda * prev + 1e-9 * std::max(1.0, prev)) {
          ++broken;
          break;
        }
        prev = next;
      }
    }
    pass = pass && broken == 0;
    notes.push_back(std::to_string(broken) + "/100 trajectories break contraction");
  } catch (const SynthesisInfeasibleError& e) {
    pass = false;
    notes.push_back("steering synthesis at lambda 0.99 infeasible (best margin " + g(e.best_margin()) + ")");
  }

  std::mt19937 rng(500);
  std::uniform_real_distribution<double> rate(0.05, 1.0);
  int disagree = 0;
  for (int t = 0; t < 500; ++t) {
    const Index n = 1 + t % 3;
    const Matrix gm = gaussian(rng, n, n);
    const Matrix y = gm * gm.transpose() + 0.1 * Matrix::Identity(n, n);
    Matrix w = gaussian(rng, n, n);
    double lambda = rate(rng);
    Matrix gamma = gaussian(rng, n, n);
    if (t % 2 == 0) {
      lambda = 1.0;
      w *= 0.9 * sym_eig(y).values(0) / std::max(1e-12, w.norm());
      gamma = 0.5 * (y + w);
    }
    if (!check_hb_contractivity(y, gamma, w, lambda).agree) ++disagree;
  }
  notes.push_back("Schur forms disagree on " + std::to_string(disagree) + "/500 tuples");
  pass = pass && disagree == 0;

  std::string detail;
  for (const auto& s : notes) detail += (detail.empty() ? "" : "; ") + s;
  return {pass, detail};
}

Outcome criterion9() {
  std::mt19937 rng(9);
  int tested = 0, close = 0, errors = 0;
  double worst = 0.0, best = 1e300;
  while (tested < 200) {
    const Index n = 2 + tested % 3;
    const Index m = 1 + tested % 2;
    const SystemModel sys = random_system(rng, n, m);
    if (!is_stabilizable(sys)) continue;
    ++tested;
    const LqrWeights w{Matrix::Identity(n, n), Matrix::Identity(m, m)};
    const LqrDesign l = design_lqr(sys, w);
    try {
      const GdDesign d = synthesize_gd(sys, 1.0, GammaSpec::fixed(l.Gamma_bar));
      const double dist = lqr_equivalence_check(sys, d, w).gain_distance;
      worst = std::max(worst, dist);
      best = std::min(best, dist);
      if (dist <= 0.05) ++close;
    } catch (const Error&) {
      ++errors;
    }
  }
  return {close == tested, std::to_string(close) + "/" + std::to_string(tested) +
                               " gains within 0.05 of the DARE gain (distance range [" + g(best) + ", " +
                               g(worst) + "], " + std::to_string(errors) + " synthesis errors)"};
}

Outcome criterion10() {
  const fs::path dir = fs::temp_directory_path() / "gdctl_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string problem = kProblems + "/steering.json";
  bool ran = true;
  for (const char* tag : {"a", "b"}) {
    const std::string t = (dir / tag).string();
    ran = ran && run_cli("synth " + problem + " -o " + t + "_gd.json") == 0;
    ran = ran && run_cli("lqr " + problem + " -o " + t + "_lqr.json") == 0;
    ran = ran && run_cli("sim " + t + "_gd.json " + problem + " -o " + t + "_traj.csv --angles") == 0;
  }
  bool same = ran;
  for (const char* f : {"_gd.json", "_lqr.json", "_traj.csv", "_traj.csv.levels.json"}) {
    if (!same) break;
    same = io::read_file((dir / (std::string("a") + f)).string()) ==
           io::read_file((dir / (std::string("b") + f)).string());
  }
  fs::remove_all(dir);
  return {same, ran ? (same ? "design, LQR, trajectory and level-set files identical" : "files differ")
                    : "a CLI run failed"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"DARE golden values", criterion1},
      {"closed-loop cost golden values", criterion2},
      {"LQR direction matrix", criterion3},
      {"scalar-mode synthesis on steering", criterion4},
      {"printed design diagnosis", criterion5},
      {"direction-matrix shaping", criterion6},
      {"inverse parameterization spectrum", criterion7},
      {"heavy-ball property suite", criterion8},
      {"fixed-direction synthesis vs DARE gain", criterion9},
      {"CLI determinism", criterion10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2zu %-40s %s  %s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
