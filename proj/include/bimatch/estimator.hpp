#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bimatch/diagnostics.hpp"
#include "bimatch/network.hpp"

namespace bimatch {

enum class LabelRule { kRank, kRandom, kOutcome, kOracle };

const char* to_string(LabelRule rule) noexcept;
/// Accepts "rank", "random", "outcome", "oracle".
LabelRule parse_label_rule(std::string_view name);

/// Signs relative to the canonical cycle orientation: alpha = +1 makes
/// worker_a the primary worker i, psi = +1 makes firm_a the primary firm j.
struct LabelSigns {
  int alpha = 1;
  int psi = 1;

  int product() const noexcept { return alpha * psi; }
  friend bool operator==(const LabelSigns&, const LabelSigns&) = default;
};

struct InstrumentSet {
  std::unordered_map<std::string, double> worker;
  std::unordered_map<std::string, double> firm;
};

struct Labeling {
  LabelRule rule = LabelRule::kRank;
  std::uint64_t seed = 0;
  std::vector<LabelSigns> signs;
};

struct CycleStats {
  FourCycle cycle;
  double delta1 = 0.0;
  double delta2 = 0.0;
  LabelSigns signs;
};

struct BetaEstimate {
  double beta_hat = 0.0;
  double mean_delta1 = 0.0;
  double mean_delta2 = 0.0;
  double sigma_u_hat = 0.0;
  /// sigma_u_hat / (sqrt(L) * |mean_delta2|)
  double scale = 0.0;
  double gamma = 0.10;
  double ci_low = 0.0;
  double ci_high = 0.0;
  /// NaN when both the numerator and every residual vanish.
  double t_stat = 0.0;
  double p_value = 1.0;
  std::size_t n_cycles = 0;

  bool statistic_defined() const noexcept;
};

struct ModularityTest {
  bool reject = false;
  double t_stat = 0.0;
  double p_value = 1.0;
  double critical_value = 0.0;
};

struct IdentificationSet {
  std::size_t cycle_length = 0;
  /// Delta_1 .. Delta_K
  std::vector<double> poly_coeffs;
  /// Distinct real roots in increasing order.
  std::vector<double> roots;
};

/// Two-sided standard normal critical value z_{1 - gamma/2}.
double normal_critical_value(double gamma);
/// Two-sided p-value 2 * (1 - Phi(|t|)).
double two_sided_p_value(double t);

CycleStats cycle_stats(const MatchingNetwork& net, const FourCycle& cycle, LabelSigns signs);

/// Rank needs `instruments`; Oracle needs `truth`. Ties are broken by a coin
/// drawn from (seed, cycle index).
Labeling assign_labels(const MatchingNetwork& net, std::span<const FourCycle> cycles, LabelRule rule,
                       std::uint64_t seed, const InstrumentSet* instruments = nullptr,
                       const ResolvedProductivity* truth = nullptr);

BetaEstimate estimate_from_deltas(std::span<const double> delta1, std::span<const double> delta2,
                                  double gamma = 0.10);
BetaEstimate estimate_beta(std::span<const CycleStats> stats, double gamma = 0.10);

struct NetworkEstimate {
  Labeling labeling;
  std::vector<CycleStats> cycles;
  BetaEstimate estimate;
};

/// Packs disjoint 4-cycles, labels them and estimates beta.
NetworkEstimate estimate_beta(const MatchingNetwork& net, LabelRule rule, std::uint64_t seed, double gamma = 0.10,
                              const InstrumentSet* instruments = nullptr, const ResolvedProductivity* truth = nullptr);

ModularityTest modularity_test(const BetaEstimate& est, double gamma = 0.10);

/// -(t11 + t22 - t12 - t21) / (t11*t22 - t12*t21)
double closed_form_beta(double t11, double t12, double t21, double t22);

/// Candidate interaction parameters from a 2K-cycle of noiseless outcomes
/// listed in traversal order (worker-firm, next worker-same firm, ...).
IdentificationSet identification_set(std::span<const double> traversal);

}  // namespace bimatch
