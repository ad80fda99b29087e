#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "bsepace/report.hpp"
#include "bsepace/scenario.hpp"

namespace fs = std::filesystem;
using namespace bsepace;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("bsepace-test-" + std::to_string(::getpid())) / name;
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(BSEPACE_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string scenario_path(const std::string& name) { return std::string(BSEPACE_SCENARIO_DIR) + "/" + name; }

}  // namespace

TEST(Scenario, BundledFilesRoundTrip) {
  int seen = 0;
  for (const auto& e : fs::directory_iterator(BSEPACE_SCENARIO_DIR)) {
    if (e.path().extension() != ".yaml") continue;
    ++seen;
    const auto s = load_scenario(e.path().string());
    const auto text = emit_scenario(s);
    const auto back = parse_scenario(text);
    EXPECT_TRUE(back == s) << e.path() << "\n" << text;
    EXPECT_EQ(emit_scenario(back), text);
  }
  EXPECT_GE(seen, 5);
}

TEST(Scenario, FractionsAndBudgetRule) {
  const auto s = load_scenario(scenario_path("appendixE.yaml"));
  EXPECT_NEAR(s.rho_L, 0.5, 0.0);
  EXPECT_NEAR(s.rho_O, 0.01 / (8.0 * 1.01), 1e-15);
  const auto g = load_scenario(scenario_path("finite-example.yaml"));
  ASSERT_TRUE(g.game.has_value());
  EXPECT_EQ(g.game->rho[0], 0.5);
  const auto c = build_sim_config(s);
  EXPECT_EQ(c.T, s.sim.T);
  EXPECT_NEAR(c.eta, std::pow(double(c.T), -2.0 / 3.0), 1e-15);
}

TEST(Scenario, BadInputIsAConfigError) {
  const char* bad[] = {
      "name: x\nbogus: 1\n",
      "name: x\ndistribution: {kind: nope}\n",
      "name: x\ndistribution: {kind: independent-uniform}\nbudgets: {rho_L: abc, rho_O: 1}\n",
      "name: x\ndistribution: {kind: independent-uniform}\nbudgets: {rho_L: 1/0, rho_O: 1}\n",
      "name: x\ndistribution: {kind: independent-uniform}\nsimulation: {T: -5}\n",
      "name: [unclosed\n",
  };
  for (const char* text : bad) {
    try {
      parse_scenario(text);
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::ConfigError) << text;
    }
  }
  EXPECT_THROW(load_scenario("/nonexistent/scenario.yaml"), Error);
}

TEST(Report, AtomicWriteLeavesNoTempFiles) {
  const auto dir = scratch("atomic");
  const auto p = dir / "t.csv";
  CsvTable t({"a", "b"});
  t.comment("k=v");
  t.row({std::string("x,y"), 1.5});
  t.row({std::string("plain"), std::int64_t{7}});
  t.write(p);
  EXPECT_EQ(slurp(p), "# k=v\na,b\n\"x,y\",1.5\nplain,7\n");
  CsvTable u({"a"});
  u.row({2.0});
  u.write(p);
  EXPECT_EQ(slurp(p), "a\n2\n");
  int files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  EXPECT_EQ(files, 1);
  EXPECT_THROW(t.row({1.0}), Error);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  const auto log = dir / "log.txt";
  EXPECT_EQ(cli("", log), 2);
  EXPECT_EQ(cli("frobnicate", log), 2);
  EXPECT_EQ(cli("solve --scenario does-not-exist", log), 2);
  EXPECT_EQ(cli("reproduce no-such-figure --out " + dir.string(), log), 2);
  EXPECT_NE(slurp(log).find("fig-SE-BSE"), std::string::npos);

  EXPECT_EQ(cli("solve --scenario " + scenario_path("finite-example.yaml") + " --out " + dir.string(), log), 0);
  const auto solved = slurp(dir / "finite-example-solve.csv");
  EXPECT_NE(solved.find("scenario,kind,weight"), std::string::npos);

  const auto bad = dir / "infeasible.yaml";
  std::ofstream(bad) << "name: infeasible\ngame:\n  U_O: [[1, 0], [0, 1]]\n  U_L: [[1, 0], [0, 1]]\n"
                        "  P:\n    - [[1, 1], [1, 1]]\n  rho: [1/2]\n";
  EXPECT_EQ(cli("solve --scenario " + bad.string() + " --out " + dir.string(), log), 3);

  const auto broken = dir / "broken.yaml";
  std::ofstream(broken) << "name: broken\nunknown_key: 1\n";
  EXPECT_EQ(cli("solve --scenario " + broken.string(), log), 2);
}

TEST(Cli, SimulateWritesCsv) {
  const auto dir = scratch("sim");
  const auto log = dir / "log.txt";
  ASSERT_EQ(cli("simulate --scenario " + scenario_path("appendixE.yaml") + " --T 5000 --reps 2 --out " +
                    dir.string(),
                log),
            0)
      << slurp(log);
  const auto text = slurp(dir / "appendixE-simulate-2.csv");
  EXPECT_NE(text.find("scenario,strategy,seed,T,eta,optimizer_value"), std::string::npos);
  int rows = 0;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line[0] != '#') ++rows;
  }
  EXPECT_EQ(rows, 3);
}

TEST(Cli, DualVerdicts) {
  const auto dir = scratch("dual");
  const auto log = dir / "log.txt";
  EXPECT_EQ(cli("dual --scenario " + scenario_path("appendixE.yaml") + " --out " + dir.string(), log), 0);
  EXPECT_NE(slurp(log).find("unbounded potential"), std::string::npos);
  EXPECT_EQ(cli("dual --scenario " + scenario_path("separated-discrete.yaml") + " --tau-max 200 --out " +
                    dir.string(),
                log),
            0)
      << slurp(log);
  EXPECT_NE(slurp(log).find("certified"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "separated-discrete-dual.csv"));
}

TEST(Cli, ReproduceWritesFigureData) {
  const auto dir = scratch("repro");
  const auto log = dir / "log.txt";
  ASSERT_EQ(cli("reproduce fig-SE-BSE --out " + dir.string(), log), 0) << slurp(log);
  const auto text = slurp(dir / "fig-SE-BSE.csv");
  EXPECT_NE(text.find("# bsepace reproduce fig-SE-BSE"), std::string::npos);
}
