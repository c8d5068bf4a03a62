#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bimatch {

enum class Side { kWorker, kFirm };

struct NodeId {
  Side side = Side::kWorker;
  std::string key;

  friend bool operator==(const NodeId&, const NodeId&) = default;
};

/// One raw observation before duplicate collapsing.
struct EdgeRow {
  std::string worker;
  std::string firm;
  double outcome = 0.0;
};

/// A collapsed worker-firm match. Node fields are dense indices into the
/// owning network.
struct Match {
  std::size_t worker = 0;
  std::size_t firm = 0;
  double outcome = 0.0;
  std::size_t multiplicity = 1;
};

/// Neighbor entry of an adjacency list: the other endpoint and the match index.
struct Incidence {
  std::size_t node = 0;
  std::size_t match = 0;
};

class NetworkBuilder;

/// Immutable bipartite graph with one outcome per (worker, firm) pair.
/// Nodes are kept in first-appearance order; `*_by_key` give key order.
class MatchingNetwork {
 public:
  MatchingNetwork() = default;

  std::size_t num_workers() const noexcept { return worker_keys_.size(); }
  std::size_t num_firms() const noexcept { return firm_keys_.size(); }
  std::size_t num_matches() const noexcept { return matches_.size(); }
  bool empty() const noexcept { return matches_.empty() && worker_keys_.empty() && firm_keys_.empty(); }

  const std::string& worker_key(std::size_t w) const { return worker_keys_.at(w); }
  const std::string& firm_key(std::size_t f) const { return firm_keys_.at(f); }
  NodeId worker_id(std::size_t w) const { return {Side::kWorker, worker_key(w)}; }
  NodeId firm_id(std::size_t f) const { return {Side::kFirm, firm_key(f)}; }

  std::optional<std::size_t> find_worker(std::string_view key) const;
  std::optional<std::size_t> find_firm(std::string_view key) const;
  std::size_t require_worker(std::string_view key) const;
  std::size_t require_firm(std::string_view key) const;

  std::span<const Match> matches() const noexcept { return matches_; }
  const Match& match(std::size_t e) const { return matches_.at(e); }
  std::optional<std::size_t> find_match(std::size_t worker, std::size_t firm) const;
  /// Outcome of an existing match; throws kInconsistentCycle if absent.
  double outcome(std::size_t worker, std::size_t firm) const;

  /// Adjacency lists, sorted by the neighbor's key.
  std::span<const Incidence> worker_neighbors(std::size_t w) const { return worker_adj_.at(w); }
  std::span<const Incidence> firm_neighbors(std::size_t f) const { return firm_adj_.at(f); }

  std::span<const std::size_t> workers_by_key() const noexcept { return workers_sorted_; }
  std::span<const std::size_t> firms_by_key() const noexcept { return firms_sorted_; }
  /// Position of a node in key order.
  std::size_t worker_rank(std::size_t w) const { return worker_rank_.at(w); }
  std::size_t firm_rank(std::size_t f) const { return firm_rank_.at(f); }

  /// Same structure with new per-match outcomes (indexed like matches()).
  MatchingNetwork with_outcomes(std::span<const double> outcomes) const;

  /// Induced subnetwork on the given nodes; matches with an endpoint outside
  /// are dropped. Node order follows this network's order.
  MatchingNetwork subnetwork(std::span<const std::size_t> workers,
                             std::span<const std::size_t> firms) const;

  std::vector<double> outcomes() const;

 private:
  friend class NetworkBuilder;
  void finalize();

  std::vector<std::string> worker_keys_;
  std::vector<std::string> firm_keys_;
  std::unordered_map<std::string, std::size_t> worker_index_;
  std::unordered_map<std::string, std::size_t> firm_index_;
  std::vector<Match> matches_;
  std::vector<std::vector<Incidence>> worker_adj_;
  std::vector<std::vector<Incidence>> firm_adj_;
  std::vector<std::size_t> workers_sorted_;
  std::vector<std::size_t> firms_sorted_;
  std::vector<std::size_t> worker_rank_;
  std::vector<std::size_t> firm_rank_;
};

/// Content equality: same node keys, same matches and outcomes. Node order
/// and multiplicities are ignored.
bool same_content(const MatchingNetwork& a, const MatchingNetwork& b);

class NetworkBuilder {
 public:
  /// Adds a raw row; repeated (worker, firm) pairs are averaged on build().
  void add(std::string_view worker, std::string_view firm, double outcome);
  /// Declares a node that may have no matches.
  std::size_t declare_worker(std::string_view key);
  std::size_t declare_firm(std::string_view key);

  MatchingNetwork build();

 private:
  struct Accum {
    double sum = 0.0;
    std::size_t count = 0;
  };
  MatchingNetwork net_;
  std::vector<Accum> accum_;
  std::unordered_map<std::uint64_t, std::size_t> pair_index_;
};

/// Collapses duplicate rows to their mean. Throws kEmptyNetwork on no rows and
/// kParse (with the row index) on empty keys or non-finite outcomes.
MatchingNetwork load_network(std::span<const EdgeRow> rows);

/// Parses an edge-list text stream with header `worker,firm,outcome`.
std::vector<EdgeRow> read_edge_rows(std::istream& in, std::string_view source = "<stream>",
                                    char delimiter = ',');
MatchingNetwork read_edge_list(const std::filesystem::path& path, char delimiter = ',');

/// Canonical export, sorted by (worker key, firm key), shortest round-trip reals.
void write_edge_list(std::ostream& out, const MatchingNetwork& net, char delimiter = ',');

/// Two-column `id,value` table, used for instrument files.
std::unordered_map<std::string, double> read_id_values(std::istream& in,
                                                       std::string_view source = "<stream>",
                                                       char delimiter = ',');
std::unordered_map<std::string, double> read_id_value_file(const std::filesystem::path& path,
                                                           char delimiter = ',');

/// Shortest decimal string that parses back to the same double.
std::string format_real(double x);

struct ProductivityAssignment {
  std::unordered_map<std::string, double> alpha;
  std::unordered_map<std::string, double> psi;
  double beta = 0.0;
};

/// Productivities laid out by the network's dense indices.
struct ResolvedProductivity {
  std::vector<double> alpha;
  std::vector<double> psi;
  double beta = 0.0;
};

/// Throws kIncompleteAssignment naming the first missing node.
ResolvedProductivity resolve(const ProductivityAssignment& prod, const MatchingNetwork& net);
ProductivityAssignment to_assignment(const ResolvedProductivity& prod, const MatchingNetwork& net);

inline double tukey_outcome(double alpha, double psi, double beta) noexcept {
  return alpha + psi + beta * alpha * psi;
}

/// Sets each outcome to alpha + psi + beta*alpha*psi + noise. `noise` is
/// indexed like matches() or empty for zero noise.
MatchingNetwork synthesize_outcomes(const MatchingNetwork& net, const ProductivityAssignment& prod,
                                    std::span<const double> noise = {});
MatchingNetwork synthesize_outcomes(const MatchingNetwork& net, const ResolvedProductivity& prod,
                                    std::span<const double> noise = {});

}  // namespace bimatch
