#include "bimatch/report.hpp"

#include <cmath>
#include <sstream>

namespace bimatch {

const char* const kOutcomeLabelingWarning =
    "outcome-based labeling uses the noisy outcomes to assign labels; the estimator is not consistent "
    "under this rule and the estimate may be biased in either direction. Use instrument (rank) labels.";

namespace {

json real(double x) {
  if (std::isnan(x)) return nullptr;
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

json diameter(const std::optional<std::size_t>& d) {
  if (d) return *d;
  return "inf";
}

std::string diameter_text(const std::optional<std::size_t>& d) { return d ? std::to_string(*d) : "inf"; }

json keys(const MatchingNetwork& net, const std::vector<std::size_t>& v, Side side) {
  json arr = json::array();
  for (std::size_t k : v) arr.push_back(side == Side::kWorker ? net.worker_key(k) : net.firm_key(k));
  return arr;
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

}  // namespace

json to_json(const DiagnosticsReport& r, const MatchingNetwork& net) {
  json j;
  j["workers"] = r.num_workers;
  j["firms"] = r.num_firms;
  j["matches"] = r.num_matches;
  j["connected"] = r.connected;
  j["component_count"] = r.component_count;
  j["largest_component_share"] = {{"workers", r.largest_component_worker_share},
                                  {"firms", r.largest_component_firm_share}};
  j["disjoint_cycle_count"] = r.disjoint_cycle_count;
  j["total_four_cycles"] = r.total_four_cycles;
  j["overlapping_cycles_present"] = r.overlapping_cycles_present;
  j["overlapping_cycles_aggregated"] = false;
  j["cycle_node_coverage"] = {{"workers", r.cycle_worker_coverage}, {"firms", r.cycle_firm_coverage}};
  json snow;
  snow["satisfied"] = r.seed_and_snowballs.satisfied;
  snow["seed"] = r.seed_and_snowballs.seed ? json(net.firm_key(*r.seed_and_snowballs.seed)) : json(nullptr);
  if (!r.seed_and_snowballs.trace.empty()) {
    const SnowballStep& last = r.seed_and_snowballs.trace.back();
    snow["reached_workers"] = keys(net, last.workers, Side::kWorker);
    snow["reached_firms"] = keys(net, last.firms, Side::kFirm);
  } else {
    snow["reached_workers"] = json::array();
    snow["reached_firms"] = json::array();
  }
  snow["steps"] = r.seed_and_snowballs.trace.size();
  j["seed_and_snowballs"] = snow;
  j["leave_one_out"] = r.leave_one_out;
  j["within_side_diameters"] = {{"workers", diameter(r.diameters.workers)}, {"firms", diameter(r.diameters.firms)}};
  j["supports"] = {{"twfe", r.supports.twfe},
                   {"tukey", r.supports.tukey},
                   {"blm", r.supports.blm},
                   {"seriation", r.supports.seriation}};
  return j;
}

std::string to_text(const DiagnosticsReport& r, const MatchingNetwork& net) {
  std::ostringstream os;
  os << "network: " << r.num_workers << " workers, " << r.num_firms << " firms, " << r.num_matches << " matches\n";
  os << "connected: " << yes_no(r.connected) << " (" << r.component_count << " component"
     << (r.component_count == 1 ? "" : "s") << ")\n";
  os << "largest component share: workers " << format_real(r.largest_component_worker_share) << ", firms "
     << format_real(r.largest_component_firm_share) << "\n";
  os << "edge-disjoint 4-cycles: " << r.disjoint_cycle_count << " (all 4-cycles: " << r.total_four_cycles << ")\n";
  os << "cycle node coverage: workers " << format_real(r.cycle_worker_coverage) << ", firms "
     << format_real(r.cycle_firm_coverage) << "\n";
  if (r.overlapping_cycles_present) os << "note: overlapping cycles exist and are not aggregated\n";
  os << "seed-and-snowballs: " << yes_no(r.seed_and_snowballs.satisfied);
  if (r.seed_and_snowballs.seed) os << " (seed " << net.firm_key(*r.seed_and_snowballs.seed) << ")";
  os << "\n";
  os << "leave-one-out connected: " << yes_no(r.leave_one_out) << "\n";
  os << "within-side diameters: workers " << diameter_text(r.diameters.workers) << ", firms "
     << diameter_text(r.diameters.firms) << "\n";
  os << "identification:\n";
  os << "  TWFE effects: " << (r.supports.twfe ? "identified" : "not identified (network not connected)") << "\n";
  os << "  Tukey beta: " << (r.supports.tukey ? "identified" : "not identified") << "\n";
  os << "  BLM: " << (r.supports.blm ? "identified" : "not identified") << "\n";
  os << "  seriation ranks: " << (r.supports.seriation ? "identified" : "not identified") << "\n";
  return os.str();
}

json to_json(const BetaEstimate& e) {
  json j;
  j["beta_hat"] = real(e.beta_hat);
  j["se"] = real(e.scale);
  j["ci_low"] = real(e.ci_low);
  j["ci_high"] = real(e.ci_high);
  j["gamma"] = e.gamma;
  j["t_stat"] = real(e.t_stat);
  j["p_value"] = real(e.p_value);
  j["n_cycles"] = e.n_cycles;
  j["mean_delta1"] = real(e.mean_delta1);
  j["mean_delta2"] = real(e.mean_delta2);
  j["sigma_u_hat"] = real(e.sigma_u_hat);
  return j;
}

json to_json(const NetworkEstimate& est, const MatchingNetwork& net, bool include_cycles) {
  json j = to_json(est.estimate);
  j["labeling_rule"] = to_string(est.labeling.rule);
  j["seed"] = est.labeling.seed;
  if (est.estimate.statistic_defined()) {
    const ModularityTest t = modularity_test(est.estimate, est.estimate.gamma);
    j["reject_no_complementarities"] = t.reject;
    j["critical_value"] = t.critical_value;
  } else {
    j["reject_no_complementarities"] = nullptr;
    j["critical_value"] = normal_critical_value(est.estimate.gamma);
  }
  if (est.labeling.rule == LabelRule::kOutcome) j["warning"] = kOutcomeLabelingWarning;
  if (include_cycles) {
    json arr = json::array();
    for (const CycleStats& c : est.cycles) {
      const bool wa = c.signs.alpha > 0, fa = c.signs.psi > 0;
      arr.push_back({{"worker", net.worker_key(wa ? c.cycle.worker_a : c.cycle.worker_b)},
                     {"worker_other", net.worker_key(wa ? c.cycle.worker_b : c.cycle.worker_a)},
                     {"firm", net.firm_key(fa ? c.cycle.firm_a : c.cycle.firm_b)},
                     {"firm_other", net.firm_key(fa ? c.cycle.firm_b : c.cycle.firm_a)},
                     {"delta1", c.delta1},
                     {"delta2", c.delta2}});
    }
    j["cycles"] = arr;
  }
  return j;
}

std::string to_text(const NetworkEstimate& est, const MatchingNetwork& net) {
  (void)net;
  const BetaEstimate& e = est.estimate;
  std::ostringstream os;
  os << "beta_hat      " << format_real(e.beta_hat) << "\n";
  os << "se            " << format_real(e.scale) << "\n";
  os << "ci            [" << format_real(e.ci_low) << ", " << format_real(e.ci_high) << "] at gamma = "
     << format_real(e.gamma) << "\n";
  os << "t_stat        " << format_real(e.t_stat) << "\n";
  os << "p_value       " << format_real(e.p_value) << "\n";
  os << "n_cycles      " << e.n_cycles << "\n";
  os << "labeling_rule " << to_string(est.labeling.rule) << "\n";
  os << "seed          " << est.labeling.seed << "\n";
  if (e.statistic_defined()) {
    const ModularityTest t = modularity_test(e, e.gamma);
    os << "no-complementarities test: " << (t.reject ? "rejected" : "not rejected") << " (|t| vs " << format_real(t.critical_value)
       << ")\n";
  } else {
    os << "no-complementarities test: undefined (0/0 statistic)\n";
  }
  if (est.labeling.rule == LabelRule::kOutcome) os << "warning: " << kOutcomeLabelingWarning << "\n";
  return os.str();
}

json to_json(const SimConfig& c) {
  return {{"sigma", c.sigma}, {"L", c.cycles}, {"p", c.p},   {"beta0", c.beta0},
          {"gamma", c.gamma}, {"reps", c.reps}, {"seed", c.seed}};
}

json to_json(const SimReport& r) {
  return {{"mse", real(r.mse)},
          {"mse_including_degenerate", real(r.mse_including_degenerate)},
          {"avg_ci_width", real(r.avg_ci_width)},
          {"rejection_rate", real(r.rejection_rate)},
          {"mean_beta_hat", real(r.mean_beta_hat)},
          {"rep_failures", r.rep_failures},
          {"reps_used", r.reps_used},
          {"reps", r.reps}};
}

json to_json(const IdentificationSet& s) {
  return {{"cycle_length", s.cycle_length}, {"poly_coeffs", s.poly_coeffs}, {"roots", s.roots}};
}

}  // namespace bimatch
