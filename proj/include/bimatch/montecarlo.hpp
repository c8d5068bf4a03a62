#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "bimatch/diagnostics.hpp"
#include "bimatch/network.hpp"

namespace bimatch {

struct SimConfig {
  std::size_t cycles = 100;  // L
  double sigma = 1.0;
  double p = 1.0;  // probability that the worker label is correct
  double beta0 = 0.0;
  double gamma = 0.10;
  std::size_t reps = 10000;
  std::uint64_t seed = 20240601;
  /// Test hook: replace the N(0, sigma^2) errors by zeros.
  bool noiseless = false;
};

/// Throws kInvalidArgument describing the first violated constraint.
void validate(const SimConfig& cfg);

/// Per-cycle productivities in true order (hi >= lo on each side) and the
/// worker-label sign; the firm-label sign is always +1.
struct CyclePopulation {
  std::vector<double> alpha_hi;
  std::vector<double> alpha_lo;
  std::vector<double> psi_hi;
  std::vector<double> psi_lo;
  std::vector<int> pi_alpha;

  std::size_t size() const noexcept { return pi_alpha.size(); }
};

/// Mean (1, 3, 1, 3) for (alpha_i, alpha_i', psi_j, psi_j').
std::vector<double> population_mean();
/// Unit variances, 0.5 between any worker and any firm entry, 0 within side.
std::vector<std::vector<double>> population_covariance();

/// Raw (unsorted) draws of (alpha_i, alpha_i', psi_j, psi_j') for cycle `index`.
std::vector<double> draw_productivity_vector(std::uint64_t seed, std::uint64_t index);

CyclePopulation draw_cycle_population(std::size_t cycles, double p, std::uint64_t seed);

struct SimReport {
  double mse = 0.0;                        // non-degenerate replications
  double mse_including_degenerate = 0.0;   // every replication with a finite beta_hat
  double avg_ci_width = 0.0;
  double rejection_rate = 0.0;
  double mean_beta_hat = 0.0;
  std::size_t rep_failures = 0;
  std::size_t reps_used = 0;
  std::size_t reps = 0;
};

/// Runs cfg.reps replications over a population fixed by cfg.seed. Results
/// do not depend on `threads`.
SimReport run_simulation(const SimConfig& cfg, std::size_t threads = 1);
SimReport run_simulation(const SimConfig& cfg, const CyclePopulation& population, std::size_t threads = 1);

/// Grid file: header `sigma,L,p,beta0` with an optional `gamma` column.
std::vector<SimConfig> read_sim_grid(std::istream& in, std::string_view source = "<grid>");
/// sigma in {0.5,1,2} x L in {100,500,1000,5000} x p in {1,0.85,0.65,0.5} x beta0 in {0,1}.
std::vector<SimConfig> default_sim_grid();

/// Tables with rows sigma x L and columns p, one block per metric and beta0,
/// followed by a long-format block of every cell.
void write_sim_tables(std::ostream& out, const std::vector<SimConfig>& cells, const std::vector<SimReport>& reports,
                      char delimiter = ',');

/// Independent Bernoulli(p_link) links between workers w0.. and firms f0..;
/// all I + J nodes are declared, outcomes are zero.
MatchingNetwork er_generate(std::size_t workers, std::size_t firms, double p_link, std::uint64_t seed);

/// I(I-1)J(J-1)p^4/4
double expected_four_cycles(std::size_t workers, std::size_t firms, double p_link);

enum class BiasLabeling { kOutcome, kOracle };

/// How the outcome rule's signs are formed in the bias experiment:
/// kNoiseOnly compares the error terms alone, dropping the unit productivity
/// gaps; kRealizedOutcome applies the rule to the realized outcomes.
enum class OutcomeSignRule { kNoiseOnly, kRealizedOutcome };

struct BiasExperimentResult {
  double mean_beta_hat = 0.0;
  double sd_beta_hat = 0.0;
  std::vector<double> beta_hats;
};

/// beta0 = 0, unit productivity gaps (outcomes 4, 3, 3, 2), errors only on
/// the primary worker's two matches, drawn from distribution 1 or 2.
BiasExperimentResult outcome_labeling_bias_experiment(int dist_id, std::size_t cycles, std::size_t reps,
                                                      std::uint64_t seed,
                                                      BiasLabeling labeling = BiasLabeling::kOutcome,
                                                      OutcomeSignRule rule = OutcomeSignRule::kNoiseOnly);

}  // namespace bimatch
