#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "bimatch/report.hpp"
#include "commands.hpp"
#include "support.hpp"

namespace {

namespace fs = std::filesystem;
using namespace bimatch;
using namespace bimatch::cli;
using bimatch::testing::fixture;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("bimatch_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliRun run(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string(BIMATCH_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  json run_json(const std::string& args) const {
    const CliRun r = run(args + " --format json");
    EXPECT_EQ(r.code, 0) << r.err;
    return json::parse(r.out);
  }

  fs::path dir_;
};

std::string fx(const std::string& name) { return "'" + fixture(name) + "'"; }

TEST_F(CliTest, DiagnoseSnowballFixture) {
  const json j = run_json("diagnose --edges " + fx("snowball_spans.csv"));
  EXPECT_TRUE(j["seed_and_snowballs"]["satisfied"].get<bool>());
  EXPECT_TRUE(j["leave_one_out"].get<bool>());
  EXPECT_TRUE(j.contains("manifest"));
}

TEST_F(CliTest, DiagnoseTreeReportsTukeyNotIdentified) {
  const CliRun r = run("diagnose --edges " + fx("tree.csv"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("edge-disjoint 4-cycles: 0"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("Tukey beta: not identified"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("# manifest: "), std::string::npos);
}

TEST_F(CliTest, DiagnoseSharesMatchIndependentRecount) {
  // Recount components of the fixture with a union-find over raw rows.
  std::ifstream in(fixture("multi_component.csv"));
  std::string line;
  std::getline(in, line);
  std::map<std::string, std::string> parent;
  std::function<std::string(const std::string&)> find = [&](const std::string& x) -> std::string {
    if (!parent.count(x)) parent[x] = x;
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  std::set<std::string> workers, firms;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string w, f;
    std::getline(ss, w, ',');
    std::getline(ss, f, ',');
    workers.insert("W" + w);
    firms.insert("F" + f);
    parent[find("W" + w)] = find("F" + f);
  }
  std::map<std::string, std::pair<double, double>> sizes;
  for (const auto& w : workers) sizes[find(w)].first += 1;
  for (const auto& f : firms) sizes[find(f)].second += 1;
  std::pair<double, double> best{0, 0};
  for (const auto& [root, s] : sizes)
    if (s.first + s.second > best.first + best.second) best = s;

  const json j = run_json("diagnose --edges " + fx("multi_component.csv"));
  EXPECT_EQ(j["component_count"].get<std::size_t>(), sizes.size());
  EXPECT_DOUBLE_EQ(j["largest_component_share"]["workers"].get<double>(), best.first / workers.size());
  EXPECT_DOUBLE_EQ(j["largest_component_share"]["firms"].get<double>(), best.second / firms.size());
  const double cw = j["cycle_node_coverage"]["workers"].get<double>();
  EXPECT_GT(cw, 0.0);
  EXPECT_LE(cw, 1.0);
}

TEST_F(CliTest, EstimateTwoCycles) {
  const json j = run_json("estimate --edges " + fx("two_cycles.csv") + " --worker-instruments " +
                          fx("two_cycles_workers.csv") + " --firm-instruments " + fx("two_cycles_firms.csv"));
  EXPECT_NEAR(j["beta_hat"].get<double>(), -0.01765, 1e-5);
  EXPECT_EQ(j["n_cycles"].get<int>(), 2);
  EXPECT_EQ(j["labeling_rule"].get<std::string>(), "rank");
  for (const char* k : {"se", "ci_low", "ci_high", "t_stat", "p_value", "seed"}) EXPECT_TRUE(j.contains(k)) << k;
}

TEST_F(CliTest, TextAndJsonCarryIdenticalNumbers) {
  const std::string args = "estimate --edges " + fx("two_cycles.csv") + " --worker-instruments " +
                           fx("two_cycles_workers.csv") + " --firm-instruments " + fx("two_cycles_firms.csv");
  const CliRun t = run(args);
  const json j = run_json(args);
  EXPECT_NE(t.out.find("beta_hat      " + format_real(j["beta_hat"].get<double>())), std::string::npos) << t.out;
  EXPECT_NE(t.out.find("se            " + format_real(j["se"].get<double>())), std::string::npos);
}

TEST_F(CliTest, RandomLabelingSeeds) {
  const MatchingNetwork g = bimatch::testing::random_connected(5, 30, 30, 0.3);
  const auto y = bimatch::testing::uniform_vector(5, 4, g.num_matches(), 0, 10);
  const fs::path edges = dir_ / "edges.csv";
  {
    std::ofstream out(edges);
    write_edge_list(out, g.with_outcomes(y));
  }
  auto beta = [&](int seed) {
    return run_json("estimate --labeling random --seed " + std::to_string(seed) + " --edges " + edges.string())["beta_hat"]
        .get<double>();
  };
  EXPECT_EQ(beta(1), beta(1));
  EXPECT_NE(beta(1), beta(2));
}

TEST_F(CliTest, OutcomeLabelingWarns) {
  const json j = run_json("estimate --labeling outcome --edges " + fx("two_cycles.csv"));
  ASSERT_TRUE(j.contains("warning"));
  EXPECT_NE(j["warning"].get<std::string>().find("not consistent"), std::string::npos);
  const CliRun t = run("estimate --labeling outcome --edges " + fx("two_cycles.csv"));
  EXPECT_NE(t.out.find("warning:"), std::string::npos);
}

TEST_F(CliTest, OracleLabelingUsesTruthFile) {
  const json j = run_json("estimate --labeling oracle --truth " + fx("staircase_truth.csv") + " --edges " +
                          fx("staircase_tukey.csv"));
  EXPECT_NEAR(j["beta_hat"].get<double>(), 3.0, 1e-10);
}

TEST_F(CliTest, ExitCodesDistinguishFailures) {
  const CliRun none = run("estimate --labeling random --edges " + fx("tree.csv"));
  EXPECT_EQ(none.code, 10);
  EXPECT_NE(none.err.find("no-cycles"), std::string::npos);
  EXPECT_NE(none.err.find("hint:"), std::string::npos);
  const fs::path flat = dir_ / "flat.csv";
  std::ofstream(flat) << "worker,firm,outcome\na,x,1\na,y,1\nb,x,1\nb,y,1\n";
  EXPECT_EQ(run("estimate --labeling random --edges " + flat.string()).code, 11);
  EXPECT_EQ(run("estimate --edges " + fx("two_cycles.csv")).code, 30);
  EXPECT_EQ(run("estimate --edges /nonexistent/file.csv --labeling random").code, 3);
  EXPECT_EQ(run("estimate --bogus").code, 2);
  EXPECT_EQ(run("productivity --edges " + fx("tukey_k22.csv") + " --mode als --beta 0").code, 40);
}

TEST_F(CliTest, ParseErrorLeavesNoOutputFile) {
  const fs::path out = dir_ / "out.txt";
  const CliRun r = run("diagnose --edges " + fx("malformed.csv") + " --out " + out.string());
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("malformed.csv:4"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(out));
  EXPECT_FALSE(fs::exists(out.string() + ".tmp"));
  EXPECT_FALSE(fs::exists(out.string() + ".manifest.json"));
}

TEST_F(CliTest, ProductivityTwfeExactRecovery) {
  const CliRun r = run("productivity --edges " + fx("staircase_additive.csv") + " --reference-worker i1");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("# normalization: alpha[i1] = 0"), std::string::npos);
  std::istringstream table(r.out.substr(r.out.find("id,side,value\n") + 14));
  const std::map<std::string, double> expected{{"i1", 0}, {"i2", 1}, {"i3", -2}, {"j1", 14}, {"j2", 12}, {"j3", 5}};
  std::string row;
  std::size_t rows = 0;
  while (std::getline(table, row) && row[0] != '#') {
    const std::string id = row.substr(0, row.find(','));
    const double value = std::stod(row.substr(row.rfind(',') + 1));
    ASSERT_TRUE(expected.count(id)) << row;
    EXPECT_NEAR(value, expected.at(id), 1e-12) << row;
    ++rows;
  }
  EXPECT_EQ(rows, expected.size());
  EXPECT_NE(r.out.find("# beta: 0\n"), std::string::npos);
}

TEST_F(CliTest, ProductivityAlsReconstructsTheta) {
  const json j = run_json("productivity --edges " + fx("tukey_k22.csv") + " --mode als --beta 0.5");
  const MatchingNetwork net = read_edge_list(fixture("tukey_k22.csv"));
  double worst = 0.0;
  for (const Match& m : net.matches()) {
    const double a = j["workers"][net.worker_key(m.worker)].get<double>();
    const double p = j["firms"][net.firm_key(m.firm)].get<double>();
    worst = std::max(worst, std::abs(tukey_outcome(a, p, 0.5) - m.outcome));
  }
  EXPECT_LT(worst, 1e-8);
  EXPECT_TRUE(j["metadata"]["converged"].get<bool>());
}

TEST_F(CliTest, ProductivityDisconnected) {
  const CliRun r = run("productivity --edges " + fx("multi_component.csv"));
  EXPECT_EQ(r.code, 20);
  EXPECT_NE(r.err.find("3 connected components"), std::string::npos) << r.err;
  const CliRun ok = run("productivity --largest-component --edges " + fx("multi_component.csv"));
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(ok.out.find("w7,"), std::string::npos);
}

TEST_F(CliTest, SimulateQuickGridWithHalfP) {
  const fs::path grid = dir_ / "grid.csv";
  std::ofstream(grid) << "sigma,L,p,beta0\n1,100,0.5,0\n1,100,1,0\n0.5,100,0.85,1\n";
  const CliRun r = run("simulate --reps 100 --grid " + grid.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("rep_failures"), std::string::npos);
  EXPECT_NE(r.out.find("# table: rejection_rate"), std::string::npos) << r.out;
  const fs::path bad = dir_ / "bad.csv";
  std::ofstream(bad) << "sigma,L,p,beta0\n1,100,0.5,0\n-1,100,1,0\n";
  EXPECT_EQ(run("simulate --reps 100 --grid " + bad.string()).code, 40);
}

TEST_F(CliTest, ManifestRerunIsBitForBit) {
  const fs::path out = dir_ / "est.json";
  const CliRun first = run("estimate --labeling random --seed 9 --format json --edges " + fx("two_cycles.csv") +
                        " --out " + out.string());
  ASSERT_EQ(first.code, 0) << first.err;
  EXPECT_TRUE(first.out.empty());
  const std::string before = slurp(out);
  const std::string manifest = out.string() + ".manifest.json";
  ASSERT_TRUE(fs::exists(manifest));
  fs::remove(out);
  const CliRun again = run("rerun " + manifest);
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(slurp(out), before);
  const CliRun via_output = run("rerun " + out.string());
  EXPECT_EQ(via_output.code, 0) << via_output.err;
  EXPECT_EQ(slurp(out), before);
}

TEST_F(CliTest, RerunDetectsChangedInput) {
  const fs::path edges = dir_ / "e.csv";
  fs::copy_file(fixture("two_cycles.csv"), edges);
  const fs::path out = dir_ / "d.txt";
  ASSERT_EQ(run("diagnose --edges " + edges.string() + " --out " + out.string()).code, 0);
  std::ofstream(edges, std::ios::app) << "Zed,Canon,1\n";
  const CliRun r = run("rerun " + out.string() + ".manifest.json");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("changed"), std::string::npos);
}

TEST(Commands, ManifestRoundTrip) {
  DiagnoseOptions d;
  d.edges = fixture("narrow_diameter.csv");
  d.output.format = Format::kJson;
  const CommandResult r = cmd_diagnose(d);
  const json doc = json::parse(r.stdout_text);
  const RunManifest m = manifest_from_json(doc["manifest"]);
  EXPECT_EQ(m.command, "diagnose");
  EXPECT_EQ(m.inputs.size(), 1u);
  EXPECT_EQ(m.inputs[0].sha256.size(), 64u);
  EXPECT_EQ(to_json(m), doc["manifest"]);
}

TEST(Commands, ExitCodesAreDistinct) {
  std::set<int> seen;
  for (int c = 0; c <= static_cast<int>(ErrorCode::kInvalidArgument); ++c) {
    const int code = exit_code(static_cast<ErrorCode>(c));
    EXPECT_GT(code, 2);
    EXPECT_TRUE(seen.insert(code).second) << to_string(static_cast<ErrorCode>(c));
    EXPECT_STRNE(remediation(static_cast<ErrorCode>(c)), "");
  }
}

}  // namespace
