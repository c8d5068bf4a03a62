#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "bimatch/diagnostics.hpp"
#include "bimatch/network.hpp"
#include "bimatch/random.hpp"

namespace bimatch::testing {

inline std::string fixture(const std::string& name) { return std::string(BIMATCH_FIXTURES) + "/" + name; }

inline std::string worker_name(std::size_t i) { return "w" + std::to_string(i); }
inline std::string firm_name(std::size_t j) { return "f" + std::to_string(j); }

/// Bernoulli(p) bipartite graph on the given node counts. Isolated nodes are
/// dropped; returns an empty network when no link was drawn.
inline MatchingNetwork random_bipartite(std::uint64_t seed, std::size_t workers, std::size_t firms, double p) {
  const CounterRng rng(seed);
  NetworkBuilder b;
  bool any = false;
  for (std::size_t i = 0; i < workers; ++i) {
    for (std::size_t j = 0; j < firms; ++j) {
      if (rng.uniform(make_stream(StreamTag::kUser, 0), i * firms + j) < p) {
        b.add(worker_name(i), firm_name(j), 0.0);
        any = true;
      }
    }
  }
  if (!any) return {};
  return b.build();
}

/// Random connected graph: a spanning path through alternating sides plus
/// Bernoulli(p) extra links.
inline MatchingNetwork random_connected(std::uint64_t seed, std::size_t workers, std::size_t firms, double p) {
  const CounterRng rng(seed);
  NetworkBuilder b;
  const std::size_t n = std::max(workers, firms);
  for (std::size_t k = 0; k < n; ++k) {
    b.add(worker_name(k % workers), firm_name(k % firms), 0.0);
    if (k + 1 < n) b.add(worker_name((k + 1) % workers), firm_name(k % firms), 0.0);
  }
  for (std::size_t i = 0; i < workers; ++i) {
    for (std::size_t j = 0; j < firms; ++j) {
      if (rng.uniform(make_stream(StreamTag::kUser, 1), i * firms + j) < p) b.add(worker_name(i), firm_name(j), 0.0);
    }
  }
  return b.build();
}

/// Uniform draws in (lo, hi) from a dedicated stream.
inline std::vector<double> uniform_vector(std::uint64_t seed, std::uint64_t stream, std::size_t n, double lo,
                                          double hi) {
  const CounterRng rng(seed);
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = lo + (hi - lo) * rng.uniform(make_stream(StreamTag::kUser, stream), k);
  return v;
}

}  // namespace bimatch::testing
