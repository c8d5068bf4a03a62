#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bimatch/diagnostics.hpp"
#include "bimatch/estimator.hpp"
#include "bimatch/montecarlo.hpp"
#include "bimatch/network.hpp"
#include "bimatch/productivity.hpp"
#include "bimatch/report.hpp"

namespace bimatch::cli {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open `" + path + "`");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write `" + path + "`");
    out << content;
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw Error(ErrorCode::kIo, "write to `" + path + "` failed");
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw Error(ErrorCode::kIo, "cannot move output into `" + path + "`");
  }
}

InputDigest digest(const std::string& role, const std::string& path) { return {role, path, sha256_file(path)}; }

const char* format_name(Format f) { return f == Format::kJson ? "json" : "text"; }

MatchingNetwork load_edges(const std::string& path, bool restrict_largest) {
  MatchingNetwork net = read_edge_list(path);
  if (!restrict_largest) return net;
  const auto comps = connected_components(net);
  if (comps.size() <= 1) return net;
  const Component& big = comps[largest_component(comps)];
  return net.subnetwork(big.workers, big.firms);
}

// Emits the document either to stdout (returned) or to --out plus a sidecar
// manifest. Text documents carry the manifest as a trailing comment line.
CommandResult finish(const OutputOptions& out, RunManifest manifest, std::string text, json doc) {
  CommandResult res;
  res.manifest = std::move(manifest);
  const json mj = to_json(res.manifest);
  std::string content;
  if (out.format == Format::kJson) {
    doc["manifest"] = mj;
    content = doc.dump(2) + "\n";
  } else {
    content = std::move(text);
    content += "# manifest: " + mj.dump() + "\n";
  }
  if (out.out.empty()) {
    res.stdout_text = std::move(content);
  } else {
    write_atomic(out.out, content);
    write_atomic(out.out + ".manifest.json", mj.dump(2) + "\n");
  }
  return res;
}

json output_options(const OutputOptions& o) { return {{"format", format_name(o.format)}, {"out", o.out}}; }

ProductivityAssignment read_productivity_file(const std::string& path) {
  std::istringstream in(read_file(path));
  ProductivityAssignment prod;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kParse, path + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!header) {
      if (f.size() != 3 || f[0] != "id" || f[1] != "side" || f[2] != "value") fail("expected header `id,side,value`");
      header = true;
      continue;
    }
    if (f.size() != 3) fail("expected 3 fields");
    double v = 0.0;
    std::size_t used = 0;
    try {
      v = std::stod(f[2], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != f[2].size() || !std::isfinite(v)) fail("invalid value `" + f[2] + "`");
    if (f[1] == "worker") {
      prod.alpha[f[0]] = v;
    } else if (f[1] == "firm") {
      prod.psi[f[0]] = v;
    } else {
      fail("side must be `worker` or `firm`");
    }
  }
  if (!header) fail("missing header `id,side,value`");
  return prod;
}

}  // namespace

Format parse_format(const std::string& name) {
  if (name == "text") return Format::kText;
  if (name == "json") return Format::kJson;
  throw Error(ErrorCode::kInvalidArgument, "unknown format `" + name + "` (use text or json)");
}

CommandResult cmd_diagnose(const DiagnoseOptions& opt) {
  RunManifest m;
  m.command = "diagnose";
  m.options = {{"edges", opt.edges}, {"largest_component", opt.largest_component}, {"output", output_options(opt.output)}};
  m.inputs.push_back(digest("edges", opt.edges));
  const MatchingNetwork net = load_edges(opt.edges, opt.largest_component);
  const DiagnosticsReport report = diagnose(net);
  return finish(opt.output, std::move(m), to_text(report, net), to_json(report, net));
}

CommandResult cmd_estimate(const EstimateOptions& opt) {
  RunManifest m;
  m.command = "estimate";
  m.seed = opt.seed;
  m.options = {{"edges", opt.edges},
               {"worker_instruments", opt.worker_instruments},
               {"firm_instruments", opt.firm_instruments},
               {"truth", opt.truth},
               {"labeling", opt.labeling},
               {"gamma", opt.gamma},
               {"seed", opt.seed},
               {"largest_component", opt.largest_component},
               {"include_cycles", opt.include_cycles},
               {"output", output_options(opt.output)}};
  const LabelRule rule = parse_label_rule(opt.labeling);
  if (!(opt.gamma > 0.0 && opt.gamma < 1.0)) throw Error(ErrorCode::kInvalidArgument, "--gamma must lie in (0, 1)");
  if (rule == LabelRule::kRank && (opt.worker_instruments.empty() || opt.firm_instruments.empty())) {
    throw Error(ErrorCode::kInstrumentCoverage,
                "rank labeling needs --worker-instruments and --firm-instruments");
  }
  if (rule == LabelRule::kOracle && opt.truth.empty()) {
    throw Error(ErrorCode::kIncompleteAssignment, "oracle labeling needs --truth with true productivities");
  }
  m.inputs.push_back(digest("edges", opt.edges));
  InstrumentSet instruments;
  if (!opt.worker_instruments.empty()) {
    m.inputs.push_back(digest("worker_instruments", opt.worker_instruments));
    instruments.worker = read_id_value_file(opt.worker_instruments);
  }
  if (!opt.firm_instruments.empty()) {
    m.inputs.push_back(digest("firm_instruments", opt.firm_instruments));
    instruments.firm = read_id_value_file(opt.firm_instruments);
  }
  const MatchingNetwork net = load_edges(opt.edges, opt.largest_component);
  std::optional<ResolvedProductivity> truth;
  if (!opt.truth.empty()) {
    m.inputs.push_back(digest("truth", opt.truth));
    truth = resolve(read_productivity_file(opt.truth), net);
  }
  const NetworkEstimate est = estimate_beta(net, rule, opt.seed, opt.gamma,
                                            rule == LabelRule::kRank ? &instruments : nullptr,
                                            truth ? &*truth : nullptr);
  return finish(opt.output, std::move(m), to_text(est, net), to_json(est, net, opt.include_cycles));
}

CommandResult cmd_simulate(const SimulateOptions& opt) {
  RunManifest m;
  m.command = "simulate";
  m.seed = opt.seed;
  m.options = {{"grid", opt.grid},
               {"reps", opt.reps},
               {"seed", opt.seed},
               {"threads", opt.threads},
               {"output", output_options(opt.output)}};
  if (opt.reps < 1) throw Error(ErrorCode::kInvalidArgument, "--reps must be at least 1");
  std::vector<SimConfig> cells;
  if (opt.grid.empty()) {
    cells = default_sim_grid();
  } else {
    m.inputs.push_back(digest("grid", opt.grid));
    std::istringstream in(read_file(opt.grid));
    cells = read_sim_grid(in, opt.grid);
  }
  for (SimConfig& c : cells) {
    c.reps = opt.reps;
    c.seed = opt.seed;
    validate(c);
  }
  std::vector<SimReport> reports;
  reports.reserve(cells.size());
  json arr = json::array();
  for (const SimConfig& c : cells) {
    reports.push_back(run_simulation(c, opt.threads));
    json cell = to_json(c);
    cell["report"] = to_json(reports.back());
    arr.push_back(cell);
  }
  std::ostringstream text;
  write_sim_tables(text, cells, reports);
  json doc;
  doc["cells"] = arr;
  return finish(opt.output, std::move(m), text.str(), doc);
}

CommandResult cmd_productivity(const ProductivityOptions& opt) {
  RunManifest m;
  m.command = "productivity";
  m.options = {{"edges", opt.edges},
               {"mode", opt.mode},
               {"beta", opt.beta ? json(*opt.beta) : json(nullptr)},
               {"reference_worker", opt.reference_worker},
               {"largest_component", opt.largest_component},
               {"tol", opt.tol},
               {"max_iter", opt.max_iter},
               {"output", output_options(opt.output)}};
  if (opt.mode != "twfe" && opt.mode != "als") {
    throw Error(ErrorCode::kInvalidArgument, "--mode must be twfe or als");
  }
  if (opt.mode == "als") {
    if (!opt.beta) throw Error(ErrorCode::kInvalidArgument, "--mode als needs --beta (e.g. the estimate's beta_hat)");
    if (*opt.beta == 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "--mode als with beta = 0 is the additive model; use --mode twfe");
    }
  }
  m.inputs.push_back(digest("edges", opt.edges));
  const MatchingNetwork net = load_edges(opt.edges, opt.largest_component);
  if (net.num_workers() == 0) throw Error(ErrorCode::kEmptyNetwork, "network has no workers");
  std::size_t ref = net.workers_by_key().front();
  if (!opt.reference_worker.empty()) ref = net.require_worker(opt.reference_worker);

  std::vector<double> alpha, psi;
  json meta;
  meta["mode"] = opt.mode;
  std::ostringstream head;
  if (opt.mode == "twfe") {
    const TwfeProjection p = twfe_project(net, net.outcomes(), ref);
    alpha = p.alpha;
    psi = p.psi;
    meta["normalization"] = "alpha[" + net.worker_key(ref) + "] = 0";
    meta["beta"] = 0.0;
    meta["residual_norm"] = p.residual_norm;
    meta["iterations"] = 0;
    meta["solver"] = p.sparse_solver ? "sparse-ldlt" : "dense-ldlt";
  } else {
    AlsOptions ao;
    ao.tol = opt.tol;
    ao.max_iter = opt.max_iter;
    if (!opt.reference_worker.empty()) {
      ao.pinned_worker = ref;
      ao.pinned_alpha = 0.0;
    }
    const AlsFit fit = als_fit(net, *opt.beta, ao);
    alpha = fit.alpha;
    psi = fit.psi;
    double ss = 0.0;
    for (const Match& mt : net.matches()) {
      const double theta = tukey_outcome(alpha[mt.worker], psi[mt.firm], *opt.beta);
      ss += (theta - mt.outcome) * (theta - mt.outcome);
    }
    meta["normalization"] = fit.scale_pinned ? "alpha[" + net.worker_key(ref) + "] = 0"
                                             : std::string("unit-norm psi' (scale not pinned)");
    meta["beta"] = *opt.beta;
    meta["residual_norm"] = std::sqrt(ss);
    meta["objective"] = fit.objective_trace.empty() ? 0.0 : fit.objective_trace.back();
    meta["iterations"] = fit.iterations;
    meta["converged"] = fit.converged;
  }

  std::ostringstream text;
  for (const auto& [k, v] : meta.items()) {
    text << "# " << k << ": "
         << (v.is_string() ? v.get<std::string>() : v.is_number_float() ? format_real(v.get<double>()) : v.dump())
         << "\n";
  }
  text << "id,side,value\n";
  json workers = json::object(), firms = json::object();
  for (std::size_t w : net.workers_by_key()) {
    text << net.worker_key(w) << ",worker," << format_real(alpha[w]) << "\n";
    workers[net.worker_key(w)] = alpha[w];
  }
  for (std::size_t f : net.firms_by_key()) {
    text << net.firm_key(f) << ",firm," << format_real(psi[f]) << "\n";
    firms[net.firm_key(f)] = psi[f];
  }
  json doc;
  doc["metadata"] = meta;
  doc["workers"] = workers;
  doc["firms"] = firms;
  return finish(opt.output, std::move(m), text.str(), doc);
}

CommandResult cmd_rerun(const std::string& manifest_path, const std::string& out_override) {
  json j;
  try {
    j = json::parse(read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, manifest_path + ": " + e.what());
  }
  if (j.contains("manifest")) j = j["manifest"];
  const RunManifest m = manifest_from_json(j);
  verify_inputs(m);
  const json& o = m.options;
  auto output = [&]() {
    OutputOptions out;
    out.format = parse_format(o.at("output").at("format").get<std::string>());
    out.out = out_override.empty() ? o.at("output").at("out").get<std::string>() : out_override;
    return out;
  };
  try {
    if (m.command == "diagnose") {
      DiagnoseOptions d;
      d.edges = o.at("edges");
      d.largest_component = o.at("largest_component");
      d.output = output();
      return cmd_diagnose(d);
    }
    if (m.command == "estimate") {
      EstimateOptions e;
      e.edges = o.at("edges");
      e.worker_instruments = o.at("worker_instruments");
      e.firm_instruments = o.at("firm_instruments");
      e.truth = o.at("truth");
      e.labeling = o.at("labeling");
      e.gamma = o.at("gamma");
      e.seed = o.at("seed");
      e.largest_component = o.at("largest_component");
      e.include_cycles = o.at("include_cycles");
      e.output = output();
      return cmd_estimate(e);
    }
    if (m.command == "simulate") {
      SimulateOptions s;
      s.grid = o.at("grid");
      s.reps = o.at("reps");
      s.seed = o.at("seed");
      s.threads = o.at("threads");
      s.output = output();
      return cmd_simulate(s);
    }
    if (m.command == "productivity") {
      ProductivityOptions p;
      p.edges = o.at("edges");
      p.mode = o.at("mode");
      if (!o.at("beta").is_null()) p.beta = o.at("beta").get<double>();
      p.reference_worker = o.at("reference_worker");
      p.largest_component = o.at("largest_component");
      p.tol = o.at("tol");
      p.max_iter = o.at("max_iter");
      p.output = output();
      return cmd_productivity(p);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("manifest options incomplete: ") + e.what());
  }
  throw Error(ErrorCode::kParse, "manifest names unknown command `" + m.command + "`");
}

int exit_code(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kIo: return 3;
    case ErrorCode::kParse: return 4;
    case ErrorCode::kEmptyNetwork: return 5;
    case ErrorCode::kNoCycles: return 10;
    case ErrorCode::kUninformativeCycles: return 11;
    case ErrorCode::kDegenerateStatistic: return 12;
    case ErrorCode::kFullyUninformative: return 13;
    case ErrorCode::kNotIdentified: return 20;
    case ErrorCode::kMonotonicityViolation: return 21;
    case ErrorCode::kDegenerateUpdate: return 22;
    case ErrorCode::kUndefinedCorrelation: return 23;
    case ErrorCode::kInstrumentCoverage: return 30;
    case ErrorCode::kIncompleteAssignment: return 31;
    case ErrorCode::kInconsistentCycle: return 32;
    case ErrorCode::kInvalidArgument: return 40;
    case ErrorCode::kNumeric: return 41;
    case ErrorCode::kAbortedRun: return 42;
  }
  return 1;
}

const char* remediation(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kIo: return "check that the file exists and is readable";
    case ErrorCode::kParse: return "fix the reported line; edge lists need the header worker,firm,outcome";
    case ErrorCode::kEmptyNetwork: return "the input has no data rows";
    case ErrorCode::kNoCycles:
      return "beta needs at least one 4-cycle (two workers both matched with two firms); run `bimatch diagnose`";
    case ErrorCode::kUninformativeCycles:
      return "the cycles carry no information on beta (mean Delta2 is zero); check labels and heterogeneity";
    case ErrorCode::kDegenerateStatistic: return "all cycle residuals are zero; the test statistic is undefined";
    case ErrorCode::kFullyUninformative: return "the cycle's outcomes do not restrict beta";
    case ErrorCode::kNotIdentified:
      return "restrict the analysis to one connected component, e.g. with --largest-component";
    case ErrorCode::kMonotonicityViolation: return "outcomes are not monotone in productivities through shared partners";
    case ErrorCode::kDegenerateUpdate: return "an ALS update divided by zero; try another starting vector";
    case ErrorCode::kUndefinedCorrelation: return "one side has no variation across matches";
    case ErrorCode::kInstrumentCoverage:
      return "supply --worker-instruments and --firm-instruments covering every cycle node, or use --labeling random";
    case ErrorCode::kIncompleteAssignment: return "provide a value for every worker and firm";
    case ErrorCode::kInconsistentCycle: return "the cycle references a match that is not in the network";
    case ErrorCode::kInvalidArgument: return "see `bimatch --help`";
    case ErrorCode::kNumeric: return "the linear system could not be solved reliably";
    case ErrorCode::kAbortedRun: return "every replication was degenerate; increase L or change p";
  }
  return "";
}

}  // namespace bimatch::cli
