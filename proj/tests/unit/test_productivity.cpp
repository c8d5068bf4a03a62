#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "bimatch/diagnostics.hpp"
#include "bimatch/error.hpp"
#include "bimatch/productivity.hpp"
#include "support.hpp"

namespace {

using namespace bimatch;
using bimatch::testing::fixture;
using bimatch::testing::random_connected;
using bimatch::testing::uniform_vector;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected bimatch::Error";
  return ErrorCode::kNumeric;
}

ResolvedProductivity staircase_truth(const MatchingNetwork& net, double beta) {
  ProductivityAssignment p;
  p.alpha = {{"i1", 4}, {"i2", 5}, {"i3", 2}};
  p.psi = {{"j1", 10}, {"j2", 8}, {"j3", 1}};
  p.beta = beta;
  return resolve(p, net);
}

double theta_rmse(const MatchingNetwork& net, const std::vector<double>& a, const std::vector<double>& p, double beta) {
  double ss = 0.0;
  for (const Match& m : net.matches()) {
    const double d = tukey_outcome(a[m.worker], p[m.firm], beta) - m.outcome;
    ss += d * d;
  }
  return std::sqrt(ss / net.num_matches());
}

TEST(Twfe, NoiselessAdditiveIsExact) {
  const MatchingNetwork net = read_edge_list(fixture("staircase_additive.csv"));
  const std::size_t ref = net.require_worker("i1");
  const TwfeProjection p = twfe_project(net, net.outcomes(), ref);
  EXPECT_EQ(p.alpha[ref], 0.0);
  EXPECT_NEAR(p.alpha[net.require_worker("i2")], 1.0, 1e-12);
  EXPECT_NEAR(p.alpha[net.require_worker("i3")], -2.0, 1e-12);
  EXPECT_NEAR(p.psi[net.require_firm("j1")], 14.0, 1e-12);
  EXPECT_NEAR(p.psi[net.require_firm("j2")], 12.0, 1e-12);
  EXPECT_NEAR(p.psi[net.require_firm("j3")], 5.0, 1e-12);
  EXPECT_LT(p.residual_norm, 1e-9);
}

TEST(Twfe, DisconnectedNamesComponentCount) {
  const MatchingNetwork net = read_edge_list(fixture("multi_component.csv"));
  try {
    twfe_project(net, net.outcomes(), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotIdentified);
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
}

TEST(TwfeProperty, NoiselessExactnessOnRandomGraphs) {
  for (std::uint64_t seed = 1; seed <= 500; ++seed) {
    const MatchingNetwork g = random_connected(seed, 3 + seed % 9, 2 + seed % 7, seed % 2 ? 0.02 : 0.4);
    const ResolvedProductivity truth{uniform_vector(seed, 1, g.num_workers(), -5, 5),
                                     uniform_vector(seed, 2, g.num_firms(), -5, 5), 0.0};
    const MatchingNetwork net = synthesize_outcomes(g, truth);
    const std::size_t ref = seed % net.num_workers();
    const TwfeProjection p = twfe_project(net, net.outcomes(), ref);
    const double shift = truth.alpha[ref];
    for (std::size_t w = 0; w < net.num_workers(); ++w) EXPECT_NEAR(p.alpha[w], truth.alpha[w] - shift, 1e-9);
    for (std::size_t f = 0; f < net.num_firms(); ++f) EXPECT_NEAR(p.psi[f], truth.psi[f] + shift, 1e-9);
    EXPECT_LT(p.residual_norm, 1e-9);
  }
}

TEST(Twfe, SparseAndDenseSolversAgree) {
  const MatchingNetwork big = random_connected(17, 120, 90, 0.01);
  const auto y = uniform_vector(17, 5, big.num_matches(), -1, 1);
  const TwfeProjection p = twfe_project(big, y, 0);
  EXPECT_TRUE(p.sparse_solver);
  const MatchingNetwork dense = random_connected(18, 10, 8, 0.5);
  EXPECT_FALSE(twfe_project(dense, uniform_vector(18, 5, dense.num_matches(), -1, 1), 0).sparse_solver);
  // Normal equations hold: residuals are orthogonal to every indicator.
  std::vector<double> wsum(big.num_workers(), 0.0), fsum(big.num_firms(), 0.0);
  for (std::size_t e = 0; e < big.num_matches(); ++e) {
    const Match& m = big.match(e);
    const double r = y[e] - p.alpha[m.worker] - p.psi[m.firm];
    wsum[m.worker] += r;
    fsum[m.firm] += r;
  }
  for (std::size_t w = 1; w < wsum.size(); ++w) EXPECT_NEAR(wsum[w], 0.0, 1e-9);
  for (double v : fsum) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(Sorting, StaircaseCorrelations) {
  const MatchingNetwork g = read_edge_list(fixture("staircase_tukey.csv"));
  const std::size_t ref = g.require_worker("i1");
  const SortingReport r3 = sorting_report(g, staircase_truth(g, 3.0), ref);
  EXPECT_NEAR(r3.rho_true, 0.3, 0.005);
  EXPECT_NEAR(r3.rho_projected, 0.02, 0.01);
  const SortingReport r0 = sorting_report(g, staircase_truth(g, 0.0), ref);
  EXPECT_NEAR(r0.rho_projected, 0.3, 0.005);
  EXPECT_NEAR(r0.rho_true, r0.rho_projected, 1e-12);
}

TEST(Sorting, FixtureOutcomesAreTheTukeyValues) {
  const MatchingNetwork g = read_edge_list(fixture("staircase_tukey.csv"));
  const MatchingNetwork synth = synthesize_outcomes(g, staircase_truth(g, 3.0));
  EXPECT_EQ(g.outcomes(), synth.outcomes());
}

TEST(Sorting, Errors) {
  const MatchingNetwork g = read_edge_list(fixture("staircase_tukey.csv"));
  const std::vector<double> a{1, 2, 3}, flat{1, 1, 1};
  EXPECT_EQ(code_of([&] { sorting_correlation(g, a, flat); }), ErrorCode::kUndefinedCorrelation);
  NetworkBuilder b;
  for (int k = 0; k < 4; ++k) b.add("w" + std::to_string(k), "f" + std::to_string(k), 0.0);
  const MatchingNetwork pm = b.build();
  const std::vector<double> v{1, 2.5, -1, 4};
  EXPECT_NEAR(sorting_correlation(pm, v, v), 1.0, 1e-15);
}

TEST(Bias, ZeroAtBetaZeroAndLinearInBeta) {
  const MatchingNetwork g = read_edge_list(fixture("staircase_tukey.csv"));
  const BiasTerms b0 = misspecification_bias(g, staircase_truth(g, 0.0), 0);
  for (double v : b0.alpha) EXPECT_EQ(v, 0.0);
  for (double v : b0.psi) EXPECT_EQ(v, 0.0);
  const BiasTerms b1 = misspecification_bias(g, staircase_truth(g, 1.5), 0);
  const BiasTerms b2 = misspecification_bias(g, staircase_truth(g, 3.0), 0);
  for (std::size_t k = 0; k < b1.alpha.size(); ++k) EXPECT_NEAR(b2.alpha[k], 2.0 * b1.alpha[k], 1e-12);
  for (std::size_t k = 0; k < b1.psi.size(); ++k) EXPECT_NEAR(b2.psi[k], 2.0 * b1.psi[k], 1e-12);
}

TEST(Bias, StaircaseMatchesProjection) {
  const MatchingNetwork g = read_edge_list(fixture("staircase_tukey.csv"));
  const ResolvedProductivity t = staircase_truth(g, 3.0);
  const TwfeProjection p = twfe_project(g, g.outcomes(), 0);
  const BiasTerms b = misspecification_bias(g, t, 0);
  for (std::size_t w = 0; w < g.num_workers(); ++w)
    EXPECT_NEAR(b.alpha[w], p.alpha[w] - (t.alpha[w] - t.alpha[0]), 1e-8);
  for (std::size_t f = 0; f < g.num_firms(); ++f) EXPECT_NEAR(b.psi[f], p.psi[f] - (t.psi[f] + t.alpha[0]), 1e-8);
}

TEST(Bias, InverseSignlessLaplacianIsAnInverse) {
  const MatchingNetwork g = random_connected(4, 6, 5, 0.4);
  const auto inv = inverse_signless_laplacian(g, 0);
  const std::size_t nw = g.num_workers(), n = nw - 1 + g.num_firms();
  ASSERT_EQ(inv.size(), n);
  // Rebuild the reduced signless Laplacian and multiply.
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  auto row = [&](std::size_t w) { return w - 1; };
  for (const Match& e : g.matches()) {
    const std::size_t f = nw - 1 + e.firm;
    m[f][f] += 1;
    if (e.worker == 0) continue;
    const std::size_t w = row(e.worker);
    m[w][w] += 1;
    m[w][f] += 1;
    m[f][w] += 1;
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += m[a][k] * inv[k][b];
      EXPECT_NEAR(s, a == b ? 1.0 : 0.0, 1e-10);
    }
}

TEST(Als, KTwoTwoTukeyReconstruction) {
  const MatchingNetwork net = read_edge_list(fixture("tukey_k22.csv"));
  const AlsFit fit = als_fit(net, 0.5);
  EXPECT_TRUE(fit.converged);
  EXPECT_LT(theta_rmse(net, fit.alpha, fit.psi, 0.5), 1e-8);
  AlsOptions pinned;
  pinned.pinned_worker = net.require_worker("i1");
  pinned.pinned_alpha = 1.0;
  const AlsFit p = als_fit(net, 0.5, pinned);
  EXPECT_TRUE(p.scale_pinned);
  EXPECT_NEAR(p.alpha[net.require_worker("i1")], 1.0, 1e-10);
  EXPECT_NEAR(p.alpha[net.require_worker("i2")], 2.0, 1e-8);
  EXPECT_NEAR(p.psi[net.require_firm("j1")], 1.0, 1e-8);
  EXPECT_NEAR(p.psi[net.require_firm("j2")], 3.0, 1e-8);
}

TEST(Als, RankOneCompleteThreeByThree) {
  const double a[3] = {1.5, 2.0, 0.5}, p[3] = {2.0, 1.0, 2.0};
  NetworkBuilder b;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b.add("w" + std::to_string(i), "f" + std::to_string(j), (a[i] * p[j] - 1.0) / 2.0);
  const MatchingNetwork net = b.build();
  const AlsFit fit = als_fit(net, 2.0);
  EXPECT_LT(fit.objective_trace.back(), 1e-16);
  double norm = 0.0;
  for (double v : fit.psi_prime) norm += v * v;
  EXPECT_NEAR(norm, 1.0, 1e-12);
  const double pn = std::sqrt(9.0);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(fit.psi_prime[net.require_firm("f" + std::to_string(j))], p[j] / pn, 1e-10);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double prod = fit.alpha_prime[net.require_worker("w" + std::to_string(i))] *
                          fit.psi_prime[net.require_firm("f" + std::to_string(j))];
      EXPECT_NEAR(prod, a[i] * p[j], 1e-10);
    }
}

TEST(Als, Guards) {
  const MatchingNetwork net = read_edge_list(fixture("tukey_k22.csv"));
  EXPECT_EQ(code_of([&] { als_fit(net, 0.0); }), ErrorCode::kInvalidArgument);
  AlsOptions zero;
  zero.init_psi = {0.0, 0.0};
  EXPECT_EQ(code_of([&] { als_fit(net, 0.5, zero); }), ErrorCode::kInvalidArgument);
  // y' = 1 + beta*y vanishes on every match of firm j1's partners.
  NetworkBuilder b;
  b.add("a", "x", -2.0);
  b.add("b", "x", -2.0);
  b.add("a", "y", 1.0);
  b.add("b", "y", 3.0);
  AlsOptions init;
  init.init_psi = {0.0, 1.0};
  const MatchingNetwork z = b.build();
  init.init_psi[z.require_firm("x")] = 1.0;
  init.init_psi[z.require_firm("y")] = 0.0;
  EXPECT_EQ(code_of([&] { als_fit(z, 0.5, init); }), ErrorCode::kDegenerateUpdate);
}

TEST(AlsProperty, MonotoneDescentAndRankOneFloor) {
  for (std::uint64_t seed = 1; seed <= 500; ++seed) {
    const MatchingNetwork g = random_connected(seed, 4 + seed % 6, 3 + seed % 5, 0.5);
    const double beta = 0.25 + (seed % 4) * 0.25;
    const ResolvedProductivity truth{uniform_vector(seed, 1, g.num_workers(), 0.5, 3),
                                     uniform_vector(seed, 2, g.num_firms(), 0.5, 3), beta};
    const auto noise = uniform_vector(seed, 3, g.num_matches(), -0.3, 0.3);
    const bool noisy = seed % 2 == 0;
    const MatchingNetwork net =
        synthesize_outcomes(g, truth, noisy ? std::span<const double>(noise) : std::span<const double>());
    const AlsFit fit = als_fit(net, beta);
    for (std::size_t k = 1; k < fit.objective_trace.size(); ++k) {
      EXPECT_LE(fit.objective_trace[k], fit.objective_trace[k - 1]) << "seed " << seed;
    }
    if (!noisy) {
      EXPECT_LT(fit.objective_trace.back(), 1e-16) << "seed " << seed;
      EXPECT_LT(theta_rmse(net, fit.alpha, fit.psi, beta), 1e-7) << "seed " << seed;
    }
  }
}

// narrow_diameter fixture with alpha order i5 < i3 < i4 < i2 < i1 and an increasing f.
struct SeriationCase {
  MatchingNetwork net;
  std::vector<double> theta;
};

SeriationCase narrow_diameter_case(const std::function<double(double, double)>& f) {
  const MatchingNetwork g = read_edge_list(fixture("narrow_diameter.csv"));
  ProductivityAssignment p;
  p.alpha = {{"i1", 5}, {"i2", 4}, {"i4", 3}, {"i3", 2}, {"i5", 1}};
  p.psi = {{"j1", 0.5}, {"j2", 2.0}, {"j3", 1.2}};
  const ResolvedProductivity r = resolve(p, g);
  std::vector<double> th(g.num_matches());
  for (std::size_t e = 0; e < th.size(); ++e) th[e] = f(r.alpha[g.match(e).worker], r.psi[g.match(e).firm]);
  return {g, th};
}

std::vector<std::string> order_keys(const MatchingNetwork& net, const Ranking& r, bool workers) {
  std::vector<std::string> out;
  for (std::size_t k : r.order) out.push_back(workers ? net.worker_key(k) : net.firm_key(k));
  return out;
}

TEST(Seriation, NarrowDiameterRecoversOrder) {
  const SeriationCase c = narrow_diameter_case([](double a, double p) { return a + p + 0.3 * a * p; });
  const SeriationResult r = seriation_ranks(c.net, c.theta);
  EXPECT_EQ(order_keys(c.net, r.workers, true), (std::vector<std::string>{"i5", "i3", "i4", "i2", "i1"}));
  EXPECT_EQ(order_keys(c.net, r.firms, false), (std::vector<std::string>{"j1", "j3", "j2"}));
}

TEST(Seriation, TieIsNotAnError) {
  NetworkBuilder b;
  b.add("a", "x", 2.0);
  b.add("b", "x", 2.0);
  const MatchingNetwork net = b.build();
  const SeriationResult r = seriation_ranks(net, net.outcomes());
  EXPECT_EQ(r.workers.rank[0], r.workers.rank[1]);
}

TEST(Seriation, WideDiameterNotIdentifiedAndViolations) {
  const MatchingNetwork a = read_edge_list(fixture("wide_diameter.csv"));
  EXPECT_EQ(code_of([&] { seriation_ranks(a, a.outcomes()); }), ErrorCode::kNotIdentified);
  // a > b through x but a < b through y.
  NetworkBuilder b;
  b.add("a", "x", 3.0);
  b.add("b", "x", 1.0);
  b.add("a", "y", 1.0);
  b.add("b", "y", 3.0);
  const MatchingNetwork v = b.build();
  EXPECT_EQ(code_of([&] { seriation_ranks(v, v.outcomes()); }), ErrorCode::kMonotonicityViolation);
}

TEST(SeriationProperty, InvariantUnderIncreasingTransforms) {
  const std::function<double(double)> transforms[] = {
      [](double t) { return t * t * t; }, [](double t) { return std::exp(t / 4.0); },
      [](double t) { return std::atan(t) + 2 * t; }, [](double t) { return 7.0 * t - 3.0; }};
  std::size_t cases = 0;
  for (std::uint64_t seed = 1; cases < 500; ++seed) {
    const MatchingNetwork g = bimatch::testing::random_bipartite(seed, 3 + seed % 5, 3 + seed % 4, 0.85);
    if (g.num_matches() == 0) continue;
    const auto d = within_side_diameters(g);
    if (!(d.workers && *d.workers <= 2 && d.firms && *d.firms <= 2)) continue;
    ++cases;
    const auto a = uniform_vector(seed, 1, g.num_workers(), 0, 4);
    const auto p = uniform_vector(seed, 2, g.num_firms(), 0, 4);
    std::vector<double> th(g.num_matches());
    for (std::size_t e = 0; e < th.size(); ++e) th[e] = a[g.match(e).worker] + p[g.match(e).firm] + 0.5 * a[g.match(e).worker] * p[g.match(e).firm];
    const SeriationResult base = seriation_ranks(g, th);
    for (std::size_t w = 0; w < g.num_workers(); ++w)
      for (std::size_t v = 0; v < g.num_workers(); ++v)
        if (a[w] < a[v]) EXPECT_LT(base.workers.rank[w], base.workers.rank[v]);
    for (const auto& tf : transforms) {
      std::vector<double> t2(th.size());
      for (std::size_t e = 0; e < th.size(); ++e) t2[e] = tf(th[e]);
      const SeriationResult r = seriation_ranks(g, t2);
      EXPECT_EQ(r.workers.rank, base.workers.rank) << "seed " << seed;
      EXPECT_EQ(r.firms.rank, base.firms.rank) << "seed " << seed;
    }
  }
}

}  // namespace
