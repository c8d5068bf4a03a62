#include "bimatch/diagnostics.hpp"

#include <algorithm>
#include <deque>
#include <limits>

#include "bimatch/error.hpp"

namespace bimatch {

namespace {

constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();

// Unified node numbering: workers first, then firms.
struct Graph {
  const MatchingNetwork& net;
  std::size_t nw;
  std::size_t n;

  explicit Graph(const MatchingNetwork& m) : net(m), nw(m.num_workers()), n(m.num_workers() + m.num_firms()) {}

  template <typename F>
  void for_each_neighbor(std::size_t v, F&& f) const {
    if (v < nw) {
      for (const Incidence& inc : net.worker_neighbors(v)) f(nw + inc.node);
    } else {
      for (const Incidence& inc : net.firm_neighbors(v - nw)) f(inc.node);
    }
  }
};

// Sorted list of workers adjacent to both firms (by worker key rank).
void common_workers(const MatchingNetwork& net, std::size_t fa, std::size_t fb,
                    std::vector<std::pair<std::size_t, std::size_t>>& ea,
                    std::vector<std::size_t>& out_workers) {
  out_workers.clear();
  ea.clear();
  auto a = net.firm_neighbors(fa);
  auto b = net.firm_neighbors(fb);
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const std::size_t ra = net.worker_rank(a[i].node);
    const std::size_t rb = net.worker_rank(b[j].node);
    if (ra < rb) {
      ++i;
    } else if (rb < ra) {
      ++j;
    } else {
      out_workers.push_back(a[i].node);
      ea.emplace_back(a[i].match, b[j].match);
      ++i;
      ++j;
    }
  }
}

// Calls f(fa, fb, common_count) for every firm pair fa < fb (key order) that
// shares at least one worker, in key-lexicographic order.
template <typename F>
void for_each_linked_firm_pair(const MatchingNetwork& net, F&& f) {
  const std::size_t nf = net.num_firms();
  std::vector<std::size_t> count(nf, 0);
  std::vector<std::size_t> touched;
  for (std::size_t fa : net.firms_by_key()) {
    const std::size_t ra = net.firm_rank(fa);
    touched.clear();
    for (const Incidence& wi : net.firm_neighbors(fa)) {
      for (const Incidence& fi : net.worker_neighbors(wi.node)) {
        if (net.firm_rank(fi.node) <= ra) continue;
        if (count[fi.node]++ == 0) touched.push_back(fi.node);
      }
    }
    std::sort(touched.begin(), touched.end(),
              [&](std::size_t x, std::size_t y) { return net.firm_rank(x) < net.firm_rank(y); });
    for (std::size_t fb : touched) {
      f(fa, fb, count[fb]);
      count[fb] = 0;
    }
  }
}

std::vector<std::size_t> sorted_by_rank(std::vector<std::size_t> v, const MatchingNetwork& net, Side side) {
  std::sort(v.begin(), v.end(), [&](std::size_t a, std::size_t b) {
    return side == Side::kWorker ? net.worker_rank(a) < net.worker_rank(b) : net.firm_rank(a) < net.firm_rank(b);
  });
  return v;
}

SnowballResult run_snowball(const MatchingNetwork& net, std::size_t seed) {
  const std::size_t nw = net.num_workers();
  const std::size_t nf = net.num_firms();
  std::vector<char> in_i(nw, 0), in_j(nf, 0);
  std::vector<std::size_t> links(nf, 0);  // links from each firm into S^I
  std::vector<std::size_t> set_i, set_j;

  SnowballResult result;
  result.seed = seed;
  std::vector<std::size_t> new_firms{seed};
  while (!new_firms.empty()) {
    for (std::size_t f : new_firms) {
      in_j[f] = 1;
      set_j.push_back(f);
    }
    for (std::size_t f : new_firms) {
      for (const Incidence& wi : net.firm_neighbors(f)) {
        if (in_i[wi.node]) continue;
        in_i[wi.node] = 1;
        set_i.push_back(wi.node);
        for (const Incidence& fi : net.worker_neighbors(wi.node)) ++links[fi.node];
      }
    }
    result.trace.push_back({sorted_by_rank(set_i, net, Side::kWorker), sorted_by_rank(set_j, net, Side::kFirm)});
    new_firms.clear();
    for (std::size_t f : net.firms_by_key()) {
      if (!in_j[f] && links[f] >= 2) new_firms.push_back(f);
    }
  }
  result.satisfied = set_i.size() == nw && set_j.size() == nf;
  return result;
}

// Distances from `source` to every node (kUnset when unreachable), optionally
// truncated at `max_depth`.
void bfs(const Graph& g, std::size_t source, std::size_t max_depth, std::vector<std::size_t>& dist,
         std::vector<std::size_t>& queue) {
  dist.assign(g.n, kUnset);
  queue.clear();
  dist[source] = 0;
  queue.push_back(source);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const std::size_t v = queue[head];
    if (dist[v] >= max_depth) continue;
    g.for_each_neighbor(v, [&](std::size_t u) {
      if (dist[u] == kUnset) {
        dist[u] = dist[v] + 1;
        queue.push_back(u);
      }
    });
  }
}

std::optional<std::size_t> side_diameter(const Graph& g, std::size_t begin, std::size_t end, DiameterMode mode) {
  std::vector<std::size_t> dist, queue;
  std::size_t diameter = 0;
  for (std::size_t s = begin; s < end; ++s) {
    const std::size_t depth = mode == DiameterMode::kCheckOnly ? 2 : kUnset;
    bfs(g, s, depth, dist, queue);
    bool all_reached = true;
    for (std::size_t t = begin; t < end; ++t) {
      if (dist[t] == kUnset) {
        all_reached = false;
      } else {
        diameter = std::max(diameter, dist[t]);
      }
    }
    if (all_reached) continue;
    if (mode == DiameterMode::kExact) return std::nullopt;
    // Check-only: some same-side node is beyond depth 2. Report this
    // source's true eccentricity and stop.
    bfs(g, s, kUnset, dist, queue);
    std::size_t ecc = 0;
    for (std::size_t t = begin; t < end; ++t) {
      if (dist[t] == kUnset) return std::nullopt;
      ecc = std::max(ecc, dist[t]);
    }
    return ecc;
  }
  return diameter;
}

}  // namespace

std::vector<Component> connected_components(const MatchingNetwork& net) {
  const Graph g(net);
  std::vector<std::size_t> label(g.n, kUnset);
  std::vector<Component> comps;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < g.n; ++s) {
    if (label[s] != kUnset) continue;
    const std::size_t id = comps.size();
    comps.emplace_back();
    label[s] = id;
    stack.assign(1, s);
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      if (v < g.nw) {
        comps[id].workers.push_back(v);
      } else {
        comps[id].firms.push_back(v - g.nw);
      }
      g.for_each_neighbor(v, [&](std::size_t u) {
        if (label[u] == kUnset) {
          label[u] = id;
          stack.push_back(u);
        }
      });
    }
  }
  for (Component& c : comps) {
    c.workers = sorted_by_rank(std::move(c.workers), net, Side::kWorker);
    c.firms = sorted_by_rank(std::move(c.firms), net, Side::kFirm);
  }
  auto smallest_key = [&](const Component& c) -> std::pair<const std::string*, int> {
    const std::string* w = c.workers.empty() ? nullptr : &net.worker_key(c.workers.front());
    const std::string* f = c.firms.empty() ? nullptr : &net.firm_key(c.firms.front());
    if (w && (!f || *w <= *f)) return {w, 0};
    return {f, 1};
  };
  std::stable_sort(comps.begin(), comps.end(), [&](const Component& a, const Component& b) {
    const auto ka = smallest_key(a);
    const auto kb = smallest_key(b);
    if (*ka.first != *kb.first) return *ka.first < *kb.first;
    return ka.second < kb.second;
  });
  return comps;
}

bool is_connected(const MatchingNetwork& net) {
  return connected_components(net).size() <= 1;
}

std::size_t largest_component(const std::vector<Component>& components) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < components.size(); ++k) {
    if (components[k].size() > components[best].size()) best = k;
  }
  return best;
}

FourCycle make_four_cycle(const MatchingNetwork& net, std::size_t w1, std::size_t w2, std::size_t f1,
                          std::size_t f2) {
  if (w1 == w2 || f1 == f2) throw Error(ErrorCode::kInconsistentCycle, "a 4-cycle needs two distinct workers and firms");
  if (net.worker_rank(w2) < net.worker_rank(w1)) std::swap(w1, w2);
  if (net.firm_rank(f2) < net.firm_rank(f1)) std::swap(f1, f2);
  FourCycle c{w1, w2, f1, f2, {}};
  const std::size_t pairs[4][2] = {{w1, f1}, {w2, f1}, {w1, f2}, {w2, f2}};
  for (int k = 0; k < 4; ++k) {
    auto e = net.find_match(pairs[k][0], pairs[k][1]);
    if (!e) {
      throw Error(ErrorCode::kInconsistentCycle, "missing match (" + net.worker_key(pairs[k][0]) + ", " +
                                                     net.firm_key(pairs[k][1]) + ")");
    }
    c.edges[k] = *e;
  }
  return c;
}

std::vector<FourCycle> enumerate_disjoint_four_cycles(const MatchingNetwork& net) {
  std::vector<FourCycle> cycles;
  std::vector<char> used(net.num_matches(), 0);
  std::vector<std::pair<std::size_t, std::size_t>> edge_pairs;
  std::vector<std::size_t> workers;
  std::vector<std::size_t> avail;
  for_each_linked_firm_pair(net, [&](std::size_t fa, std::size_t fb, std::size_t common) {
    if (common < 2) return;
    common_workers(net, fa, fb, edge_pairs, workers);
    avail.clear();
    for (std::size_t k = 0; k < workers.size(); ++k) {
      if (!used[edge_pairs[k].first] && !used[edge_pairs[k].second]) avail.push_back(k);
    }
    for (std::size_t k = 0; k + 1 < avail.size(); k += 2) {
      const auto [ea, eb] = edge_pairs[avail[k]];
      const auto [ec, ed] = edge_pairs[avail[k + 1]];
      used[ea] = used[eb] = used[ec] = used[ed] = 1;
      cycles.push_back({workers[avail[k]], workers[avail[k + 1]], fa, fb, {ea, ec, eb, ed}});
    }
  });
  return cycles;
}

SnowballResult seed_and_snowballs(const MatchingNetwork& net, std::optional<std::size_t> seed) {
  if (seed) {
    if (*seed >= net.num_firms()) throw Error(ErrorCode::kInvalidArgument, "seed firm index out of range");
    return run_snowball(net, *seed);
  }
  SnowballResult best;
  std::size_t best_cover = 0;
  for (std::size_t f : net.firms_by_key()) {
    SnowballResult r = run_snowball(net, f);
    if (r.satisfied) return r;
    const std::size_t cover = r.trace.back().workers.size() + r.trace.back().firms.size();
    if (!best.seed || cover > best_cover) {
      best = std::move(r);
      best_cover = cover;
    }
  }
  return best;
}

bool leave_one_out_connected(const MatchingNetwork& net) {
  const Graph g(net);
  if (g.n == 0) return true;
  // Iterative Tarjan articulation points; a worker is a cut vertex iff its
  // removal disconnects the remaining graph.
  std::vector<std::size_t> disc(g.n, kUnset), low(g.n, 0), parent(g.n, kUnset), child_count(g.n, 0);
  std::vector<std::size_t> next_edge(g.n, 0);
  std::vector<std::size_t> stack;
  std::size_t timer = 0;

  auto neighbor = [&](std::size_t v, std::size_t k) -> std::optional<std::size_t> {
    if (v < g.nw) {
      auto adj = net.worker_neighbors(v);
      if (k < adj.size()) return g.nw + adj[k].node;
    } else {
      auto adj = net.firm_neighbors(v - g.nw);
      if (k < adj.size()) return adj[k].node;
    }
    return std::nullopt;
  };

  disc[0] = low[0] = timer++;
  stack.push_back(0);
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    if (auto u = neighbor(v, next_edge[v]++)) {
      if (disc[*u] == kUnset) {
        parent[*u] = v;
        ++child_count[v];
        disc[*u] = low[*u] = timer++;
        stack.push_back(*u);
      } else if (*u != parent[v]) {
        low[v] = std::min(low[v], disc[*u]);
      }
      continue;
    }
    stack.pop_back();
    if (parent[v] != kUnset) {
      const std::size_t p = parent[v];
      low[p] = std::min(low[p], low[v]);
      if (p < g.nw && parent[p] != kUnset && low[v] >= disc[p]) return false;
    }
  }
  if (timer != g.n) return false;  // not connected
  // The DFS root is a cut vertex iff it has two or more tree children.
  return !(0 < g.nw && child_count[0] >= 2);
}

SideDiameters within_side_diameters(const MatchingNetwork& net, DiameterMode mode) {
  const Graph g(net);
  SideDiameters d;
  d.workers = side_diameter(g, 0, g.nw, mode);
  d.firms = side_diameter(g, g.nw, g.n, mode);
  return d;
}

std::uint64_t count_four_cycles_total(const MatchingNetwork& net) {
  std::uint64_t total = 0;
  for_each_linked_firm_pair(net, [&](std::size_t, std::size_t, std::size_t common) {
    total += static_cast<std::uint64_t>(common) * (common - 1) / 2;
  });
  return total;
}

bool informative_cycle_exists(const MatchingNetwork& net, const ResolvedProductivity& prod) {
  if (prod.alpha.size() != net.num_workers() || prod.psi.size() != net.num_firms()) {
    throw Error(ErrorCode::kIncompleteAssignment, "productivity vectors do not cover the network");
  }
  bool found = false;
  std::vector<std::pair<std::size_t, std::size_t>> edge_pairs;
  std::vector<std::size_t> workers;
  for_each_linked_firm_pair(net, [&](std::size_t fa, std::size_t fb, std::size_t common) {
    if (found || common < 2 || prod.psi[fa] == prod.psi[fb]) return;
    common_workers(net, fa, fb, edge_pairs, workers);
    for (std::size_t k = 1; k < workers.size(); ++k) {
      if (prod.alpha[workers[k]] != prod.alpha[workers[0]]) {
        found = true;
        return;
      }
    }
  });
  return found;
}

bool informative_cycle_exists(const MatchingNetwork& net, const ProductivityAssignment& prod) {
  return informative_cycle_exists(net, resolve(prod, net));
}

DiagnosticsReport diagnose(const MatchingNetwork& net) {
  DiagnosticsReport r;
  r.num_workers = net.num_workers();
  r.num_firms = net.num_firms();
  r.num_matches = net.num_matches();

  const auto comps = connected_components(net);
  r.component_count = comps.size();
  r.connected = comps.size() <= 1;
  if (!comps.empty()) {
    const Component& big = comps[largest_component(comps)];
    r.largest_component_worker_share =
        net.num_workers() ? static_cast<double>(big.workers.size()) / static_cast<double>(net.num_workers()) : 0.0;
    r.largest_component_firm_share =
        net.num_firms() ? static_cast<double>(big.firms.size()) / static_cast<double>(net.num_firms()) : 0.0;
  }

  const auto cycles = enumerate_disjoint_four_cycles(net);
  r.disjoint_cycle_count = cycles.size();
  std::vector<char> wcov(net.num_workers(), 0), fcov(net.num_firms(), 0);
  for (const FourCycle& c : cycles) {
    wcov[c.worker_a] = wcov[c.worker_b] = 1;
    fcov[c.firm_a] = fcov[c.firm_b] = 1;
  }
  const auto covered = [](const std::vector<char>& v) {
    return v.empty() ? 0.0 : static_cast<double>(std::count(v.begin(), v.end(), 1)) / static_cast<double>(v.size());
  };
  r.cycle_worker_coverage = covered(wcov);
  r.cycle_firm_coverage = covered(fcov);
  r.total_four_cycles = count_four_cycles_total(net);
  r.overlapping_cycles_present = r.total_four_cycles > cycles.size();

  if (net.num_firms() > 0) r.seed_and_snowballs = seed_and_snowballs(net);
  r.leave_one_out = leave_one_out_connected(net);
  r.diameters = within_side_diameters(net);

  r.supports.twfe = r.connected && net.num_matches() > 0;
  r.supports.tukey = r.supports.twfe && !cycles.empty();
  r.supports.blm = r.seed_and_snowballs.satisfied;
  r.supports.seriation = r.diameters.workers && r.diameters.firms && *r.diameters.workers <= 2 &&
                         *r.diameters.firms <= 2 && net.num_matches() > 0;
  return r;
}

}  // namespace bimatch
