#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "teleport/harness.hpp"

using namespace teleport;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("teleport_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

ExperimentConfig small_config(Algorithm algorithm) {
  ExperimentConfig c;
  c.algorithm = algorithm;
  c.n = 12;
  c.d = 4;
  c.T = 60;
  c.k = 4;
  c.sigma2 = 1.0;
  c.zeta2 = 2.0;
  c.etas = {0.005};
  c.seed = 11;
  c.target_error = 0.5;
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TELEPORT_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, FileAndOverrides) {
  const auto dir = fresh_dir("config");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "exp.cfg");
    f << "# sweep\nalgorithm = client-sampling\nn = 30\nk=5\n\neta = grid\ntopology = torus\ntarget_error = 1e-3\n";
  }
  auto pairs = read_config_file((dir / "exp.cfg").string());
  pairs["n"] = "36";
  const auto c = apply_config({}, pairs);
  EXPECT_EQ(c.algorithm, Algorithm::client_sampling);
  EXPECT_EQ(c.n, 36);
  EXPECT_EQ(c.k, 5);
  EXPECT_EQ(c.topology, Family::torus);
  EXPECT_EQ(c.etas, eta_grid());
  EXPECT_EQ(c.etas.size(), 13u);
  EXPECT_DOUBLE_EQ(*c.target_error, 1e-3);
  EXPECT_NO_THROW(c.validate());

  EXPECT_THROW(apply_config({}, {{"colour", "red"}}), Error);
  EXPECT_THROW(apply_config({}, {{"n", "ten"}}), Error);
  EXPECT_THROW(apply_config({}, {{"seed", "-3"}}), Error);
  EXPECT_THROW(read_config_file((dir / "missing.cfg").string()), Error);
}

TEST(Config, Validation) {
  auto c = small_config(Algorithm::teleport);
  c.k.reset();
  EXPECT_THROW(c.validate(), Error);
  c.algorithm = Algorithm::dsgd;
  EXPECT_NO_THROW(c.validate());
  c.algorithm = Algorithm::teleport;
  c.k = 13;
  EXPECT_THROW(c.validate(), Error);
  c.k = 3;
  c.etas.clear();
  EXPECT_THROW(c.validate(), Error);
  c.etas = {-0.1};
  EXPECT_THROW(c.validate(), Error);
}

TEST(Harness, NoiselessDsgdErrorIsMonotone) {
  auto c = small_config(Algorithm::dsgd);
  c.sigma2 = 0.0;
  c.zeta2 = 0.0;
  c.etas = {1.0 / c.n};
  c.T = 200;
  const auto dir = fresh_dir("monotone");
  c.out_dir = dir.string();
  ASSERT_EQ(run_experiment(c, std::cerr), exit_ok);
  const auto rows = read_csv(dir / "trace_dsgd_eta0.0833333_k12_seed11.csv");
  ASSERT_EQ(rows.size(), 202u);
  for (std::size_t r = 2; r < rows.size(); ++r) EXPECT_LE(std::stod(rows[r][1]), std::stod(rows[r - 1][1]));
}

TEST(Harness, TeleportAndOverlapWriteIdenticalTraces) {
  auto a = small_config(Algorithm::teleport);
  auto b = small_config(Algorithm::teleport_overlap);
  a.out_dir = fresh_dir("alg1").string();
  b.out_dir = fresh_dir("alg3").string();
  ASSERT_EQ(run_experiment(a, std::cerr), exit_ok);
  ASSERT_EQ(run_experiment(b, std::cerr), exit_ok);
  const auto ta = slurp(fs::path(a.out_dir) / "trace_teleport_eta0.005_k4_seed11.csv");
  const auto tb = slurp(fs::path(b.out_dir) / "trace_teleport-overlap_eta0.005_k4_seed11.csv");
  EXPECT_FALSE(ta.empty());
  EXPECT_EQ(ta, tb);
}

TEST(Harness, SameConfigSameBytes) {
  for (auto algorithm : {Algorithm::dsgd, Algorithm::teleport, Algorithm::client_sampling, Algorithm::search_k}) {
    auto c = small_config(algorithm);
    c.etas = {0.01, 0.005};
    c.seeds = 2;
    c.out_dir = fresh_dir("bytes_a").string();
    ASSERT_EQ(run_experiment(c, std::cerr), exit_ok);
    auto c2 = c;
    c2.out_dir = fresh_dir("bytes_b").string();
    ASSERT_EQ(run_experiment(c2, std::cerr), exit_ok);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(c.out_dir)) {
      ++files;
      EXPECT_EQ(slurp(entry.path()), slurp(fs::path(c2.out_dir) / entry.path().filename()))
          << to_string(algorithm) << " " << entry.path().filename();
    }
    EXPECT_GE(files, 6u);
  }
}

TEST(Harness, TraceFilesHaveOneRowPerIteration) {
  auto c = small_config(Algorithm::dsgd);
  c.etas = {0.5, 0.001};  // the first diverges quickly
  c.out_dir = fresh_dir("rows").string();
  ASSERT_EQ(run_experiment(c, std::cerr), exit_ok);
  for (const auto& entry : fs::directory_iterator(c.out_dir)) {
    if (entry.path().filename().string().rfind("trace_", 0) != 0) continue;
    const auto rows = read_csv(entry.path());
    EXPECT_EQ(rows.size(), static_cast<std::size_t>(c.T) + 2) << entry.path();
    EXPECT_EQ(rows.back()[0], std::to_string(c.T));
  }
  const auto diverged = read_csv(fs::path(c.out_dir) / "trace_dsgd_eta0.5_k12_seed11.csv");
  EXPECT_EQ(diverged.back()[1], "inf");
}

TEST(GridSearch, SingleEtaIsReturned) {
  auto c = small_config(Algorithm::teleport);
  const auto g = grid_search_eta(c);
  ASSERT_TRUE(g.best.has_value());
  EXPECT_EQ(g.results[*g.best].eta, 0.005);
}

TEST(GridSearch, UnstableStepRankedLast) {
  auto c = small_config(Algorithm::dsgd);
  c.sigma2 = 0.0;
  c.zeta2 = 0.0;
  c.target_error = 1e-3;
  c.T = 300;
  c.topology = Family::complete;
  const double L = c.n;
  c.etas = {10.0 / L, 0.5 / L, 1.0 / L, 0.1 / L};
  const auto g = grid_search_eta(c);
  EXPECT_TRUE(g.results[0].per_seed[0].diverged);
  ASSERT_TRUE(g.best.has_value());
  EXPECT_NE(*g.best, 0u);
  EXPECT_EQ(g.results[*g.best].eta, 1.0 / L);
  EXPECT_GT(g.results[3].per_seed[0].iters_to_target.value_or(c.T + 1),
            *g.results[*g.best].per_seed[0].iters_to_target);

  const auto again = grid_search_eta(c);
  EXPECT_EQ(*again.best, *g.best);
}

TEST(GridSearch, TiesGoToSmallerEta) {
  auto c = small_config(Algorithm::dsgd);
  c.target_error = 1e6;  // reached at iteration 0 by every eta
  c.etas = {0.01, 0.001, 0.005};
  const auto g = grid_search_eta(c);
  EXPECT_EQ(g.results[*g.best].eta, 0.001);
}

TEST(GridSearch, AllDivergedIsNoFeasibleEta) {
  auto c = small_config(Algorithm::dsgd);
  c.etas = {0.5, 1.0};
  c.out_dir = fresh_dir("diverged").string();
  EXPECT_FALSE(grid_search_eta(c).best.has_value());
  EXPECT_EQ(run_experiment(c, std::cerr), exit_no_feasible_eta);
}

TEST(GridSearch, SelectedKIsACandidate) {
  auto c = small_config(Algorithm::search_k);
  c.n = 40;
  c.etas = eta_grid();
  c.seeds = 3;
  c.T = 40;
  c.out_dir = fresh_dir("search").string();
  run_experiment(c, std::cerr);
  const auto ks = candidate_ks(c.n);
  const auto rows = read_csv(fs::path(c.out_dir) / "summary.csv");
  ASSERT_EQ(rows.size(), 1 + eta_grid().size() * 3);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    EXPECT_NE(std::find(ks.begin(), ks.end(), std::stoi(rows[r][3])), ks.end()) << rows[r][3];
  }
}

TEST(GridSearch, SeedsProduceMeanRow) {
  auto c = small_config(Algorithm::teleport);
  c.seeds = 3;
  c.out_dir = fresh_dir("seeds").string();
  ASSERT_EQ(run_experiment(c, std::cerr), exit_ok);
  const auto rows = read_csv(fs::path(c.out_dir) / "best.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[1][5], "11");
  EXPECT_EQ(rows[3][5], "13");
  EXPECT_EQ(rows[4][5], "mean");
}

TEST(Rates, CsvHasOneRowPerValidK) {
  auto c = small_config(Algorithm::teleport);
  c.n = 20;
  std::stringstream out;
  write_rates(c, out);
  std::string line;
  int lines = 0;
  while (std::getline(out, line)) ++lines;
  EXPECT_EQ(lines, 1 + 1 + 20);

  c.topology = Family::torus;
  c.n = 16;
  std::stringstream torus;
  write_rates(c, torus);
  lines = 0;
  while (std::getline(torus, line)) ++lines;
  EXPECT_EQ(lines, 1 + 1 + 4);  // k = 1, 4, 9, 16
}

TEST(Cli, ExitCodes) {
  const auto dir = fresh_dir("cli").string();
  EXPECT_EQ(run_cli("run --algorithm dsgd --n 8 --d 2 --eta 0.01 --T 10 --out-dir " + dir), 0);
  EXPECT_EQ(run_cli("run --algorithm teleport --n 8 --d 2 --eta 0.01 --T 10 --out-dir " + dir), 1);
  EXPECT_EQ(run_cli("run --algorithm dsgd --n 8 --d 2 --eta 0.01 --T 10 --topology hexagon --out-dir " + dir), 1);
  EXPECT_EQ(run_cli("run --algorithm dsgd --n 8 --d 2 --eta 5 --T 50 --out-dir " + dir), 2);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("rates --n 8 --T 100"), 0);
}
