#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <unordered_map>
#include <vector>

#include "bimatch/diagnostics.hpp"
#include "bimatch/error.hpp"
#include "bimatch/estimator.hpp"
#include "bimatch/montecarlo.hpp"
#include "bimatch/network.hpp"
#include "bimatch/productivity.hpp"
#include "bimatch/report.hpp"

namespace py = pybind11;
using namespace bimatch;

namespace {

using KeyValues = std::unordered_map<std::string, double>;

KeyValues by_key(const MatchingNetwork& net, const std::vector<double>& values, Side side) {
  KeyValues out;
  for (std::size_t k = 0; k < values.size(); ++k)
    out[side == Side::kWorker ? net.worker_key(k) : net.firm_key(k)] = values[k];
  return out;
}

std::size_t reference_index(const MatchingNetwork& net, const std::string& key) {
  return key.empty() ? net.workers_by_key().front() : net.require_worker(key);
}

MatchingNetwork from_rows(const std::vector<std::string>& workers, const std::vector<std::string>& firms,
                          const std::vector<double>& outcomes) {
  if (workers.size() != firms.size() || workers.size() != outcomes.size()) {
    throw Error(ErrorCode::kInvalidArgument, "workers, firms and outcomes must have equal length");
  }
  std::vector<EdgeRow> rows;
  rows.reserve(workers.size());
  for (std::size_t k = 0; k < workers.size(); ++k) rows.push_back({workers[k], firms[k], outcomes[k]});
  return load_network(rows);
}

py::list edges(const MatchingNetwork& net) {
  py::list out;
  for (const Match& m : net.matches()) out.append(py::make_tuple(net.worker_key(m.worker), net.firm_key(m.firm), m.outcome));
  return out;
}

std::string estimate_json(const MatchingNetwork& net, const std::string& labeling, std::uint64_t seed, double gamma,
                          const KeyValues& worker_instruments, const KeyValues& firm_instruments,
                          const KeyValues& true_alpha, const KeyValues& true_psi, bool include_cycles) {
  const LabelRule rule = parse_label_rule(labeling);
  InstrumentSet z{worker_instruments, firm_instruments};
  ResolvedProductivity truth;
  const bool have_truth = !true_alpha.empty() || !true_psi.empty();
  if (have_truth) {
    ProductivityAssignment p;
    p.alpha = true_alpha;
    p.psi = true_psi;
    truth = resolve(p, net);
  }
  const bool have_z = !worker_instruments.empty() || !firm_instruments.empty();
  const NetworkEstimate est =
      estimate_beta(net, rule, seed, gamma, have_z ? &z : nullptr, have_truth ? &truth : nullptr);
  return to_json(est, net, include_cycles).dump();
}

py::dict twfe(const MatchingNetwork& net, const std::string& reference_worker) {
  const std::size_t ref = reference_index(net, reference_worker);
  const TwfeProjection p = twfe_project(net, net.outcomes(), ref);
  py::dict d;
  d["alpha"] = by_key(net, p.alpha, Side::kWorker);
  d["psi"] = by_key(net, p.psi, Side::kFirm);
  d["reference_worker"] = net.worker_key(ref);
  d["residual_norm"] = p.residual_norm;
  return d;
}

py::dict als(const MatchingNetwork& net, double beta, const std::string& reference_worker, double tol,
             std::size_t max_iter) {
  AlsOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  if (!reference_worker.empty()) o.pinned_worker = net.require_worker(reference_worker);
  const AlsFit fit = als_fit(net, beta, o);
  py::dict d;
  d["alpha"] = by_key(net, fit.alpha, Side::kWorker);
  d["psi"] = by_key(net, fit.psi, Side::kFirm);
  d["objective_trace"] = fit.objective_trace;
  d["iterations"] = fit.iterations;
  d["converged"] = fit.converged;
  d["scale_pinned"] = fit.scale_pinned;
  return d;
}

py::dict seriation(const MatchingNetwork& net) {
  const SeriationResult r = seriation_ranks(net, net.outcomes());
  std::vector<std::string> w, f;
  for (std::size_t k : r.workers.order) w.push_back(net.worker_key(k));
  for (std::size_t k : r.firms.order) f.push_back(net.firm_key(k));
  py::dict d;
  d["workers"] = w;
  d["firms"] = f;
  return d;
}

std::string simulate_json(double sigma, std::size_t cycles, double p, double beta0, double gamma, std::size_t reps,
                          std::uint64_t seed, std::size_t threads) {
  SimConfig c;
  c.sigma = sigma;
  c.cycles = cycles;
  c.p = p;
  c.beta0 = beta0;
  c.gamma = gamma;
  c.reps = reps;
  c.seed = seed;
  SimReport r;
  {
    py::gil_scoped_release release;
    r = run_simulation(c, threads);
  }
  return to_json(r).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the bimatch package";
  m.attr("__version__") = BIMATCH_VERSION;

  static py::exception<Error> error(m, "BimatchError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      exc.attr("code") = to_string(e.code());
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::class_<MatchingNetwork>(m, "Network")
      .def_static("read", [](const std::string& path) { return read_edge_list(path); }, py::arg("path"))
      .def_static("from_rows", &from_rows, py::arg("workers"), py::arg("firms"), py::arg("outcomes"))
      .def_property_readonly("num_workers", &MatchingNetwork::num_workers)
      .def_property_readonly("num_firms", &MatchingNetwork::num_firms)
      .def_property_readonly("num_matches", &MatchingNetwork::num_matches)
      .def("edges", &edges)
      .def("largest_component",
           [](const MatchingNetwork& net) {
             const auto comps = connected_components(net);
             const Component& c = comps.at(largest_component(comps));
             return net.subnetwork(c.workers, c.firms);
           })
      .def("__len__", &MatchingNetwork::num_matches)
      .def("__repr__", [](const MatchingNetwork& net) {
        return "<Network workers=" + std::to_string(net.num_workers()) + " firms=" + std::to_string(net.num_firms()) +
               " matches=" + std::to_string(net.num_matches()) + ">";
      });

  m.def("_diagnose", [](const MatchingNetwork& net) { return to_json(diagnose(net), net).dump(); });
  m.def("_estimate", &estimate_json, py::arg("net"), py::arg("labeling"), py::arg("seed"), py::arg("gamma"),
        py::arg("worker_instruments"), py::arg("firm_instruments"), py::arg("true_alpha"), py::arg("true_psi"),
        py::arg("include_cycles"));
  m.def("_simulate", &simulate_json, py::arg("sigma"), py::arg("cycles"), py::arg("p"), py::arg("beta0"),
        py::arg("gamma"), py::arg("reps"), py::arg("seed"), py::arg("threads"));

  m.def("count_four_cycles", &count_four_cycles_total, py::arg("net"));
  m.def("closed_form_beta", &closed_form_beta, py::arg("t11"), py::arg("t12"), py::arg("t21"), py::arg("t22"));
  m.def(
      "identification_set",
      [](const std::vector<double>& traversal) { return identification_set(traversal).roots; },
      py::arg("traversal"), "Real candidate interaction parameters for a 2K-cycle listed in traversal order.");
  m.def("twfe", &twfe, py::arg("net"), py::arg("reference_worker") = "");
  m.def("als", &als, py::arg("net"), py::arg("beta"), py::arg("reference_worker") = "", py::arg("tol") = 1e-10,
        py::arg("max_iter") = 500);
  m.def("seriation", &seriation, py::arg("net"));
  m.def("er_generate", &er_generate, py::arg("workers"), py::arg("firms"), py::arg("p_link"), py::arg("seed"));
}
