#include <iostream>

#include <CLI11.hpp>

#include "gdctl/cli.hpp"

int main(int argc, char** argv) {
  using namespace gdctl::cli;
  CLI::App app{"Gradient-descent shaped state-feedback synthesis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", gdctl::io::kToolVersion);

  Options o;
  std::optional<double> lambda;
  std::string gamma_mode, gamma_bound, dump_lmi;
  std::size_t steps = 0;

  auto add_synthesis_flags = [&](CLI::App* sub) {
    sub->add_option("--lambda", lambda, "contraction rate in (0, 1]");
    sub->add_option("--gamma-mode", gamma_mode, "scalar | free | fixed | bounded");
    sub->add_option("--gamma-bound", gamma_bound, "JSON file holding the bound U on sym(Gamma)");
    sub->add_option("--dump-lmi", dump_lmi, "write the LMI problem to this JSON file");
  };

  auto* synth = app.add_subcommand("synth", "gradient-descent feedback synthesis");
  synth->add_option("problem", o.problem, "problem file")->required();
  synth->add_option("-o,--output", o.output, "design file to write")->required();
  add_synthesis_flags(synth);

  auto* lqr = app.add_subcommand("lqr", "LQR design and its direction matrix");
  lqr->add_option("problem", o.problem, "problem file")->required();
  lqr->add_option("-o,--output", o.output, "design file to write")->required();
  lqr->add_option("--x0", o.x0, "initial state for the cost field")->delimiter(',');

  auto* hb = app.add_subcommand("hb", "heavy-ball (two-step) feedback synthesis");
  hb->add_option("problem", o.problem, "problem file")->required();
  hb->add_option("-o,--output", o.output, "design file to write")->required();
  add_synthesis_flags(hb);

  auto* check = app.add_subcommand("check", "re-verify a design against a problem");
  check->add_option("design", o.design, "design file")->required();
  check->add_option("problem", o.problem, "problem file")->required();

  auto* sim = app.add_subcommand("sim", "simulate a design");
  sim->add_option("design", o.design, "design file")->required();
  sim->add_option("problem", o.problem, "problem file")->required();
  sim->add_option("-o,--output", o.output, "trajectory file (.csv or .json)")->required();
  sim->add_option("--steps", steps, "number of steps");
  sim->add_option("--x0", o.x0, "initial state, comma separated")->delimiter(',');
  sim->add_flag("--angles", o.angles, "add the descent-angle column");
  sim->add_option("--levels", o.levels, "level values for V, comma separated")->delimiter(',');

  auto* compare = app.add_subcommand("compare", "compare two designs");
  compare->add_option("design", o.design, "first design file")->required();
  compare->add_option("design2", o.design2, "second design file")->required();
  compare->add_option("problem", o.problem, "problem file")->required();
  compare->add_option("--steps", steps, "steps for the descent-angle run");
  compare->add_option("--x0", o.x0, "initial state, comma separated")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  o.lambda = lambda;
  if (!gamma_mode.empty()) o.gamma_mode = gamma_mode;
  if (!gamma_bound.empty()) o.gamma_bound = gamma_bound;
  if (!dump_lmi.empty()) o.dump_lmi = dump_lmi;
  if (steps > 0) o.steps = steps;

  if (synth->parsed()) return cmd_synth(o, std::cout, std::cerr);
  if (lqr->parsed()) return cmd_lqr(o, std::cout, std::cerr);
  if (hb->parsed()) return cmd_hb(o, std::cout, std::cerr);
  if (check->parsed()) return cmd_check(o, std::cout, std::cerr);
  if (sim->parsed()) return cmd_sim(o, std::cout, std::cerr);
  if (compare->parsed()) return cmd_compare(o, std::cout, std::cerr);
  return kUsage;
}
