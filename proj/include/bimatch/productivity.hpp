#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bimatch/network.hpp"

namespace bimatch {

/// Least-squares fit of per-match targets on worker and firm effects, with
/// the reference worker's effect pinned to zero. Vectors use the network's
/// dense indices.
struct TwfeProjection {
  std::vector<double> alpha;
  std::vector<double> psi;
  std::size_t reference_worker = 0;
  double residual_norm = 0.0;
  bool sparse_solver = false;
};

/// Throws kNotIdentified (naming the component count) on a disconnected
/// network.
TwfeProjection twfe_project(const MatchingNetwork& net, std::span<const double> targets, std::size_t reference_worker);

/// Dense inverse of the normal-equation matrix (the signless Laplacian with
/// the reference worker's row and column removed). Row order: workers other
/// than the reference in index order, then firms.
std::vector<std::vector<double>> inverse_signless_laplacian(const MatchingNetwork& net, std::size_t reference_worker);

/// Bias of the TWFE projection of noiseless Tukey outcomes, relative to the
/// truth written in the pinned normalization (alpha - alpha_ref, psi + alpha_ref).
struct BiasTerms {
  std::vector<double> alpha;
  std::vector<double> psi;
};

BiasTerms misspecification_bias(const MatchingNetwork& net, const ResolvedProductivity& prod,
                                std::size_t reference_worker);

struct AlsOptions {
  double tol = 1e-10;
  std::size_t max_iter = 500;
  /// Starting firm vector (indexed like the firms); uniform when empty.
  std::vector<double> init_psi;
  /// Worker whose alpha is pinned after convergence, and its value.
  std::optional<std::size_t> pinned_worker;
  double pinned_alpha = 0.0;
};

struct AlsFit {
  std::vector<double> alpha_prime;
  std::vector<double> psi_prime;
  std::vector<double> alpha;
  std::vector<double> psi;
  double beta_input = 0.0;
  std::vector<double> objective_trace;
  std::size_t iterations = 0;
  bool converged = false;
  /// Scalar c applied after convergence (alpha' * c, psi' / c).
  double scale = 1.0;
  bool scale_pinned = false;
};

/// Rank-one alternating least squares for (1 + beta*y) = alpha' * psi'.
AlsFit als_fit(const MatchingNetwork& net, double beta_hat, const AlsOptions& options = {});

/// Dense tie-aware ranking: rank[k] is 0 for the lowest level.
struct Ranking {
  std::vector<std::size_t> order;  // lowest first; ties keep key order
  std::vector<std::size_t> rank;
};

struct SeriationResult {
  Ranking workers;
  Ranking firms;
};

SeriationResult seriation_ranks(const MatchingNetwork& net, std::span<const double> targets,
                                double tie_tol = 1e-12);

/// Pearson correlation of (alpha_worker, psi_firm) over matches.
double sorting_correlation(const MatchingNetwork& net, std::span<const double> alpha, std::span<const double> psi);

struct SortingReport {
  double rho_true = 0.0;
  double rho_projected = 0.0;
  TwfeProjection projection;
  BiasTerms bias;
};

/// Projects noiseless Tukey outcomes with TWFE and compares the sorting
/// correlation with the truth.
SortingReport sorting_report(const MatchingNetwork& net, const ResolvedProductivity& prod,
                             std::size_t reference_worker);

}  // namespace bimatch
