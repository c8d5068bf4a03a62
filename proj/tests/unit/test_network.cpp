#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "bimatch/error.hpp"
#include "bimatch/network.hpp"
#include "support.hpp"

namespace {

using namespace bimatch;
using bimatch::testing::fixture;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected bimatch::Error";
  return ErrorCode::kNumeric;
}

TEST(LoadNetwork, AliceBobCanonDell) {
  const std::vector<EdgeRow> rows{{"A", "C", 120}, {"A", "D", 100}, {"B", "C", 100}, {"B", "D", 90}};
  const MatchingNetwork net = load_network(rows);
  EXPECT_EQ(net.num_workers(), 2u);
  EXPECT_EQ(net.num_firms(), 2u);
  EXPECT_EQ(net.num_matches(), 4u);
  EXPECT_EQ(net.outcome(net.require_worker("A"), net.require_firm("C")), 120.0);
  EXPECT_EQ(net.outcome(net.require_worker("B"), net.require_firm("D")), 90.0);
}

TEST(LoadNetwork, DuplicatesAreAveraged) {
  const std::vector<EdgeRow> rows{{"A", "C", 10}, {"A", "C", 20}};
  const MatchingNetwork net = load_network(rows);
  ASSERT_EQ(net.num_matches(), 1u);
  EXPECT_EQ(net.match(0).outcome, 15.0);
  EXPECT_EQ(net.match(0).multiplicity, 2u);
}

TEST(LoadNetwork, FirstAppearanceOrder) {
  const std::vector<EdgeRow> rows{{"z", "y", 1}, {"a", "b", 1}, {"z", "b", 1}};
  const MatchingNetwork net = load_network(rows);
  EXPECT_EQ(net.worker_key(0), "z");
  EXPECT_EQ(net.worker_key(1), "a");
  EXPECT_EQ(net.firm_key(0), "y");
  EXPECT_EQ(net.workers_by_key()[0], 1u);
}

TEST(LoadNetwork, EmptyInputIsAnError) {
  EXPECT_EQ(code_of([] { load_network(std::vector<EdgeRow>{}); }), ErrorCode::kEmptyNetwork);
  EXPECT_EQ(code_of([] { read_edge_list(fixture("empty.csv")); }), ErrorCode::kEmptyNetwork);
}

TEST(LoadNetwork, NonFiniteOutcomeNamesRow) {
  const std::vector<EdgeRow> rows{{"A", "C", 1}, {"A", "D", std::nan("")}};
  try {
    load_network(rows);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
}

TEST(ReadEdgeRows, MalformedRowReportsLineAndRow) {
  try {
    read_edge_list(fixture("malformed.csv"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    const std::string msg = e.what();
    EXPECT_NE(msg.find(":4:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
  }
}

TEST(ReadEdgeRows, NonNumericOutcome) {
  std::istringstream in("worker,firm,outcome\nA,C,abc\n");
  EXPECT_EQ(code_of([&] { read_edge_rows(in); }), ErrorCode::kParse);
}

TEST(ReadEdgeRows, MissingHeader) {
  std::istringstream in("A,C,1\n");
  EXPECT_EQ(code_of([&] { read_edge_rows(in); }), ErrorCode::kParse);
}

TEST(ReadEdgeRows, BomCrlfQuotesAndBlankLines) {
  std::istringstream in("\xEF\xBB\xBFWorker,Firm,Outcome\r\n\"Smith, J\",\"General Motors\",1.5\r\n\r\nB,C,-2e3\r\n");
  const auto rows = read_edge_rows(in);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].worker, "Smith, J");
  EXPECT_EQ(rows[0].firm, "General Motors");
  EXPECT_EQ(rows[0].outcome, 1.5);
  EXPECT_EQ(rows[1].outcome, -2000.0);
}

TEST(ReadIdValues, DuplicateIdRejected) {
  std::istringstream in("id,value\na,1\na,2\n");
  EXPECT_EQ(code_of([&] { read_id_values(in); }), ErrorCode::kParse);
}

TEST(ReadIdValues, InstrumentFixture) {
  const auto z = read_id_value_file(fixture("two_cycles_firms.csv"));
  EXPECT_EQ(z.at("General Motors"), 160000.0);
  EXPECT_EQ(z.size(), 4u);
}

TEST(NetworkBuilder, DeclaredIsolatedNodesKept) {
  NetworkBuilder b;
  b.add("A", "C", 1.0);
  b.declare_worker("lonely");
  const MatchingNetwork net = b.build();
  EXPECT_EQ(net.num_workers(), 2u);
  EXPECT_TRUE(net.find_worker("lonely").has_value());
  EXPECT_TRUE(net.worker_neighbors(*net.find_worker("lonely")).empty());
}

TEST(FormatReal, ShortestRoundTrip) {
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(15.0), "15");
  const double x = 1.0 / 3.0;
  EXPECT_EQ(std::stod(format_real(x)), x);
}

TEST(Synthesize, TukeyOnCompleteTwoByTwo) {
  const MatchingNetwork net = read_edge_list(fixture("single_cycle.csv"));
  ProductivityAssignment prod;
  prod.alpha = {{"Alice", 1.0}, {"Bob", 2.0}};
  prod.psi = {{"Canon", 1.0}, {"Dell", 3.0}};
  prod.beta = 0.5;
  const MatchingNetwork y = synthesize_outcomes(net, prod);
  auto at = [&](const char* w, const char* f) { return y.outcome(y.require_worker(w), y.require_firm(f)); };
  EXPECT_EQ(at("Alice", "Canon"), 2.5);
  EXPECT_EQ(at("Alice", "Dell"), 5.5);
  EXPECT_EQ(at("Bob", "Canon"), 4.0);
  EXPECT_EQ(at("Bob", "Dell"), 8.0);
}

TEST(Synthesize, ZeroProductivitiesGiveZeroOutcomes) {
  const MatchingNetwork net = read_edge_list(fixture("narrow_diameter.csv"));
  ResolvedProductivity prod{std::vector<double>(net.num_workers(), 0.0), std::vector<double>(net.num_firms(), 0.0), 7.0};
  for (double y : synthesize_outcomes(net, prod).outcomes()) EXPECT_EQ(y, 0.0);
}

TEST(Synthesize, MissingNodeIsIncompleteAssignment) {
  const MatchingNetwork net = read_edge_list(fixture("single_cycle.csv"));
  ProductivityAssignment prod;
  prod.alpha = {{"Alice", 1.0}};
  prod.psi = {{"Canon", 1.0}, {"Dell", 3.0}};
  EXPECT_EQ(code_of([&] { synthesize_outcomes(net, prod); }), ErrorCode::kIncompleteAssignment);
}

TEST(Synthesize, AdditiveCaseIsExactWithNoise) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const MatchingNetwork net = bimatch::testing::random_connected(seed, 7, 5, 0.4);
    const auto a = bimatch::testing::uniform_vector(seed, 1, net.num_workers(), -3, 3);
    const auto p = bimatch::testing::uniform_vector(seed, 2, net.num_firms(), -3, 3);
    const auto eta = bimatch::testing::uniform_vector(seed, 3, net.num_matches(), -1, 1);
    const MatchingNetwork y = synthesize_outcomes(net, ResolvedProductivity{a, p, 0.0}, eta);
    for (std::size_t e = 0; e < y.num_matches(); ++e) {
      const Match& m = y.match(e);
      EXPECT_EQ(m.outcome, (a[m.worker] + p[m.firm]) + eta[e]);
      EXPECT_NEAR(m.outcome - a[m.worker] - p[m.firm] - eta[e], 0.0, 1e-14);
    }
  }
}

// Property: exporting and reloading reproduces the same network, and the
// multiplicity-weighted mean equals the raw sum.
TEST(NetworkProperties, CanonicalRoundTripAndDuplicateSums) {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const CounterRng rng(seed);
    std::vector<EdgeRow> rows;
    std::map<std::pair<std::string, std::string>, double> sums;
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform(make_stream(StreamTag::kUser, 9), 0) * 60);
    for (std::size_t r = 0; r < n; ++r) {
      const auto u = rng.uniforms(make_stream(StreamTag::kUser, 10), r);
      const std::string w = "w" + std::to_string(static_cast<int>(u[0] * 6));
      const std::string f = "f" + std::to_string(static_cast<int>(u[1] * 4));
      const double y = rng.normals(make_stream(StreamTag::kUser, 11), r)[0] * 100.0;
      rows.push_back({w, f, y});
      sums[{w, f}] += y;
    }
    const MatchingNetwork net = load_network(rows);
    for (const Match& m : net.matches()) {
      const double raw = sums.at({net.worker_key(m.worker), net.firm_key(m.firm)});
      EXPECT_LE(std::abs(m.outcome * static_cast<double>(m.multiplicity) - raw), 1e-12 * (1.0 + std::abs(raw)));
    }
    std::stringstream ss;
    write_edge_list(ss, net);
    const MatchingNetwork again = load_network(read_edge_rows(ss));
    EXPECT_TRUE(same_content(net, again)) << "seed " << seed;
    std::stringstream ss2;
    write_edge_list(ss2, again);
    EXPECT_EQ(ss.str(), ss2.str());
  }
}

}  // namespace
