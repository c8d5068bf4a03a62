#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bimatch/network.hpp"

namespace bimatch {

struct Component {
  std::vector<std::size_t> workers;
  std::vector<std::size_t> firms;

  std::size_t size() const noexcept { return workers.size() + firms.size(); }
};

/// Connected components ordered by the smallest key they contain (worker keys
/// before firm keys when comparing). Members are listed in key order.
std::vector<Component> connected_components(const MatchingNetwork& net);

bool is_connected(const MatchingNetwork& net);

/// Index of the largest component; ties go to the earlier component.
std::size_t largest_component(const std::vector<Component>& components);

/// A 4-cycle worker_a-firm_a-worker_b-firm_b in canonical form: worker_a has
/// the smaller key and firm_a the smaller key. `edges` holds the match indices
/// of (a,fa), (b,fa), (a,fb), (b,fb).
struct FourCycle {
  std::size_t worker_a = 0;
  std::size_t worker_b = 0;
  std::size_t firm_a = 0;
  std::size_t firm_b = 0;
  std::array<std::size_t, 4> edges{};

  friend bool operator==(const FourCycle&, const FourCycle&) = default;
};

/// Builds the canonical cycle on four nodes; throws kInconsistentCycle when a
/// node repeats or an edge is missing.
FourCycle make_four_cycle(const MatchingNetwork& net, std::size_t w1, std::size_t w2, std::size_t f1,
                          std::size_t f2);

/// Greedy maximal edge-disjoint packing: firm pairs in key order, common
/// workers in key order, consecutive available workers paired.
std::vector<FourCycle> enumerate_disjoint_four_cycles(const MatchingNetwork& net);

struct SnowballStep {
  std::vector<std::size_t> workers;  // S_n^I
  std::vector<std::size_t> firms;    // S_n^J
};

struct SnowballResult {
  bool satisfied = false;
  /// The seed whose run is traced: the given seed, the first succeeding
  /// one, or (on failure of a search) the one covering the most nodes.
  std::optional<std::size_t> seed;
  std::vector<SnowballStep> trace;
};

/// Runs the seed-and-snowballs iteration from `seed`, or tries every firm in
/// key order when no seed is given.
SnowballResult seed_and_snowballs(const MatchingNetwork& net, std::optional<std::size_t> seed = std::nullopt);

/// True iff the network is connected and stays connected after deleting any
/// single worker together with its matches.
bool leave_one_out_connected(const MatchingNetwork& net);

/// nullopt encodes an infinite diameter.
struct SideDiameters {
  std::optional<std::size_t> workers;
  std::optional<std::size_t> firms;
};

enum class DiameterMode {
  kExact,
  /// Exact whenever both sides have diameter <= 2; otherwise stops early
  /// and reports any value > 2 (or infinity) found so far.
  kCheckOnly,
};

SideDiameters within_side_diameters(const MatchingNetwork& net, DiameterMode mode = DiameterMode::kExact);

/// Number of all 4-cycles, overlapping ones included: the sum over firm
/// pairs of C(common workers, 2).
std::uint64_t count_four_cycles_total(const MatchingNetwork& net);

/// Whether some 4-cycle (not only packed ones) has distinct worker and
/// distinct firm productivities.
bool informative_cycle_exists(const MatchingNetwork& net, const ProductivityAssignment& prod);
bool informative_cycle_exists(const MatchingNetwork& net, const ResolvedProductivity& prod);

struct ModelSupport {
  bool twfe = false;       // connected
  bool tukey = false;      // connected and contains a 4-cycle
  bool blm = false;        // seed-and-snowballs
  bool seriation = false;  // both within-side diameters at most two
};

struct DiagnosticsReport {
  std::size_t num_workers = 0;
  std::size_t num_firms = 0;
  std::size_t num_matches = 0;
  bool connected = false;
  std::size_t component_count = 0;
  double largest_component_worker_share = 0.0;
  double largest_component_firm_share = 0.0;
  std::size_t disjoint_cycle_count = 0;
  double cycle_worker_coverage = 0.0;
  double cycle_firm_coverage = 0.0;
  SnowballResult seed_and_snowballs;
  bool leave_one_out = false;
  SideDiameters diameters;
  ModelSupport supports;
  /// Overlapping cycles are not aggregated; this flags whether any 4-cycle
  /// exists beyond the packed ones.
  bool overlapping_cycles_present = false;
  std::size_t total_four_cycles = 0;
};

DiagnosticsReport diagnose(const MatchingNetwork& net);

}  // namespace bimatch
