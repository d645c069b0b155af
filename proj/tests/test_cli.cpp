#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "cavi/harness/csv.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CAVI_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cavi_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Cli, InvalidConfigExitsWithTwo) {
  const fs::path dir = scratch("bad");
  EXPECT_EQ(run_cli("run-example --pi 1.5 --out " + dir.string()), 2);
  EXPECT_EQ(run_cli("run-example --s 80 --out " + dir.string()), 2);
  EXPECT_EQ(run_cli("run-example --scheme gauss --out " + dir.string()), 2);
  EXPECT_EQ(run_cli("no-such-command"), 2);
  EXPECT_EQ(run_cli(""), 2);
}

TEST(Cli, GenDataFromConfigFileWithOverride) {
  const fs::path dir = scratch("gen");
  const fs::path cfg = dir / "study.ini";
  {
    std::ofstream out(cfg);
    out << "n = 12\np = 3\ns = 1\nseed = 5\nout = " << (dir / "from_file").string() << "\n";
  }
  ASSERT_EQ(run_cli("gen-data --config " + cfg.string()), 0);
  auto X = cavi::harness::read_numeric_csv(dir / "from_file" / "X.csv", true);
  EXPECT_EQ(X.size(), 12u);
  EXPECT_EQ(X.front().size(), 3u);

  ASSERT_EQ(run_cli("gen-data --config " + cfg.string() + " --n 7 --out " + (dir / "override").string()), 0);
  X = cavi::harness::read_numeric_csv(dir / "override" / "X.csv", true);
  EXPECT_EQ(X.size(), 7u);
}

TEST(Cli, RunExampleParallel) {
  const fs::path dir = scratch("par");
  ASSERT_EQ(run_cli("run-example --scheme par --init zero --max-iter 50 --out " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "trace.csv"));
  EXPECT_TRUE(fs::exists(dir / "means.svg"));
}

TEST(Cli, SpectralAndWigner) {
  const fs::path dir = scratch("studies");
  ASSERT_EQ(run_cli("spectral-study --reps 2 --panel left --left-p 10 20 --out " + dir.string()), 0);
  std::ifstream in(dir / "rho.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header,
            "panel,n,p,s,replicate,seed,rho_seq,log_rho_seq,rho_par,log_rho_par,seq_converged,"
            "assumption1_satisfied");
  ASSERT_EQ(run_cli("wigner-check --reps 2 --wigner-n 100 --wigner-p 4 --out " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "wigner.csv"));
}

TEST(Cli, VerifyPasses) {
  const fs::path dir = scratch("verify");
  EXPECT_EQ(run_cli("verify --mc-draws 100000 --out " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "verify.csv"));
}
