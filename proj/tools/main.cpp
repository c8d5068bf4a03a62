#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using namespace bimatch;
using namespace bimatch::cli;

void add_output(CLI::App* sub, std::string& format, std::string& out) {
  sub->add_option("--format", format, "Output format")->check(CLI::IsMember({"text", "json"}))->capture_default_str();
  sub->add_option("--out", out, "Write the result here (plus <out>.manifest.json) instead of stdout");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tests for productivity complementarities in bipartite matching networks"};
  app.set_version_flag("--version", std::string(BIMATCH_VERSION));
  app.require_subcommand(1);

  DiagnoseOptions diag;
  EstimateOptions est;
  SimulateOptions sim;
  ProductivityOptions prod;
  std::string diag_fmt = "text", est_fmt = "text", sim_fmt = "text", prod_fmt = "text";
  std::string rerun_manifest, rerun_out;
  double beta = 0.0;

  CLI::App* d = app.add_subcommand("diagnose", "Connectivity, cycle and identification diagnostics");
  d->add_option("--edges", diag.edges, "Edge list CSV (worker,firm,outcome)")->required();
  d->add_flag("--largest-component", diag.largest_component, "Restrict to the largest connected component");
  add_output(d, diag_fmt, diag.output.out);

  CLI::App* e = app.add_subcommand("estimate", "Estimate beta and test for no complementarities");
  e->add_option("--edges", est.edges, "Edge list CSV (worker,firm,outcome)")->required();
  e->add_option("--worker-instruments", est.worker_instruments, "CSV id,value of worker instruments");
  e->add_option("--firm-instruments", est.firm_instruments, "CSV id,value of firm instruments");
  e->add_option("--truth", est.truth, "CSV id,side,value with true productivities (oracle labeling)");
  e->add_option("--labeling", est.labeling, "Cycle labeling rule")
      ->check(CLI::IsMember({"rank", "random", "outcome", "oracle"}))
      ->capture_default_str();
  e->add_option("--gamma", est.gamma, "Test size / 1 - confidence level")->capture_default_str();
  e->add_option("--seed", est.seed, "Seed for random labels and tie-breaks")->capture_default_str();
  e->add_flag("--largest-component", est.largest_component, "Restrict to the largest connected component");
  e->add_flag("--cycles", est.include_cycles, "Include per-cycle statistics in JSON output");
  add_output(e, est_fmt, est.output.out);

  CLI::App* s = app.add_subcommand("simulate", "Monte Carlo study over a grid of (sigma, L, p, beta0)");
  s->add_option("--grid", sim.grid, "CSV grid with columns sigma,L,p,beta0[,gamma]; default grid when omitted")
      ->check(CLI::ExistingFile);
  s->add_option("--reps", sim.reps, "Replications per cell")->capture_default_str();
  s->add_option("--seed", sim.seed, "Base seed")->capture_default_str();
  s->add_option("--threads", sim.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  add_output(s, sim_fmt, sim.output.out);

  CLI::App* p = app.add_subcommand("productivity", "Recover worker and firm productivities");
  p->add_option("--edges", prod.edges, "Edge list CSV (worker,firm,outcome)")->required();
  p->add_option("--mode", prod.mode, "twfe (additive) or als (Tukey, needs --beta)")
      ->check(CLI::IsMember({"twfe", "als"}))
      ->capture_default_str();
  CLI::Option* beta_opt = p->add_option("--beta", beta, "Complementarity parameter for --mode als");
  p->add_option("--reference-worker", prod.reference_worker, "Worker whose alpha is pinned at 0");
  p->add_flag("--largest-component", prod.largest_component, "Restrict to the largest connected component");
  p->add_option("--tol", prod.tol, "ALS relative objective tolerance")->capture_default_str();
  p->add_option("--max-iter", prod.max_iter, "ALS iteration cap")->capture_default_str();
  add_output(p, prod_fmt, prod.output.out);

  CLI::App* r = app.add_subcommand("rerun", "Repeat a run from its manifest after checking input digests");
  r->add_option("manifest", rerun_manifest, "Manifest JSON (or a JSON output embedding one)")->required();
  r->add_option("--out", rerun_out, "Override the recorded output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : 2;
  }

  try {
    CommandResult res;
    if (*d) {
      diag.output.format = parse_format(diag_fmt);
      res = cmd_diagnose(diag);
    } else if (*e) {
      est.output.format = parse_format(est_fmt);
      res = cmd_estimate(est);
    } else if (*s) {
      sim.output.format = parse_format(sim_fmt);
      res = cmd_simulate(sim);
    } else if (*p) {
      prod.output.format = parse_format(prod_fmt);
      if (beta_opt->count() > 0) prod.beta = beta;
      res = cmd_productivity(prod);
    } else {
      res = cmd_rerun(rerun_manifest, rerun_out);
    }
    std::cout << res.stdout_text;
    return 0;
  } catch (const Error& err) {
    std::cerr << "error [" << to_string(err.code()) << "]: " << err.what() << "\n";
    const char* hint = remediation(err.code());
    if (*hint) std::cerr << "hint: " << hint << "\n";
    return exit_code(err.code());
  } catch (const std::exception& err) {
    std::cerr << "internal error: " << err.what() << "\n";
    return 1;
  }
}
