#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "cavi/harness/verify.hpp"

using namespace cavi;
using namespace cavi::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cavi_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

StudyConfig small_spectral(const fs::path& out) {
  StudyConfig cfg;
  cfg.out = out;
  cfg.reps = 3;
  cfg.left_p = {10, 20};
  cfg.right_s = {5, 25};
  return cfg;
}

}  // namespace

TEST(Csv, DoubleFormatting) {
  EXPECT_EQ(fmt_double(0.1), "0.10000000000000001");
  EXPECT_EQ(fmt_double(std::stod(fmt_double(1.0 / 3.0))), fmt_double(1.0 / 3.0));
  EXPECT_EQ(std::stod(fmt_double(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_EQ(fmt_double(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(fmt_double(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(Csv, WidthMismatchRejected) {
  const fs::path dir = scratch("csv");
  CsvWriter w(dir / "a.csv", {"x", "y"});
  EXPECT_THROW(w.row({"1"}), std::logic_error);
}

TEST(Dataset, WriteReadRoundTrip) {
  const fs::path dir = scratch("data");
  StudyConfig cfg;
  cfg.n = 15;
  cfg.p = 4;
  cfg.s = 2;
  cfg.out = dir;
  const Dataset d = cmd_gen_data(cfg);
  const Dataset back = read_dataset(dir);
  EXPECT_EQ(back.X, d.X);
  EXPECT_EQ(back.y, d.y);
  ASSERT_TRUE(back.beta_true.has_value());
  EXPECT_EQ(*back.beta_true, *d.beta_true);
  EXPECT_EQ(line_count(dir / "X.csv"), 16u);
}

TEST(RunExample, WritesOutputs) {
  const fs::path dir = scratch("example") / "nested";
  StudyConfig cfg;
  cfg.out = dir;
  const RunTrace tr = cmd_run_example(cfg);
  EXPECT_TRUE(tr.converged());
  for (const char* f : {"trace.csv", "means.csv", "elbo.svg", "means.svg"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(line_count(dir / "trace.csv"), tr.records.size() + 2);
  EXPECT_EQ(line_count(dir / "means.csv"), 51u);

  // ELBO column nondecreasing.
  std::ifstream in(dir / "trace.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iter,elbo,step_sup_norm,status");
  double prev = -std::numeric_limits<double>::infinity();
  std::string last_status;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string it, e, step, status;
    std::getline(ss, it, ',');
    std::getline(ss, e, ',');
    std::getline(ss, step, ',');
    std::getline(ss, status, ',');
    EXPECT_GE(std::stod(e), prev - 1e-9);
    prev = std::stod(e);
    last_status = status;
  }
  EXPECT_EQ(last_status, "converged");
}

TEST(RunExample, ByteIdenticalRerun) {
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  StudyConfig cfg;
  cfg.scheme = Variant::Parallel;
  cfg.out = a;
  cmd_run_example(cfg);
  cfg.out = b;
  cmd_run_example(cfg);
  for (const char* f : {"trace.csv", "means.csv", "elbo.svg", "means.svg"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(SpectralStudy, RowCountAndDeterminismAcrossThreads) {
  const fs::path a = scratch("spec_a"), b = scratch("spec_b");
  StudyConfig cfg = small_spectral(a);
  cfg.threads = 1;
  const auto rows = cmd_spectral_study(cfg);
  EXPECT_EQ(rows.size(), 3u * 4u);
  EXPECT_EQ(line_count(a / "rho.csv"), 13u);
  EXPECT_TRUE(fs::exists(a / "rho_boxplot.svg"));
  cfg = small_spectral(b);
  cfg.threads = 4;
  cmd_spectral_study(cfg);
  EXPECT_EQ(slurp(a / "rho.csv"), slurp(b / "rho.csv"));
  EXPECT_EQ(slurp(a / "rho_boxplot.svg"), slurp(b / "rho_boxplot.svg"));
}

TEST(SpectralStudy, NonConvergedReplicatesRecorded) {
  const fs::path dir = scratch("spec_nc");
  StudyConfig cfg = small_spectral(dir);
  cfg.run.max_iter = 1;
  const auto rows = cmd_spectral_study(cfg);
  EXPECT_EQ(rows.size(), 12u);
  for (const auto& r : rows) {
    EXPECT_FALSE(r.seq_converged);
    EXPECT_TRUE(std::isnan(r.rho_seq));
  }
  EXPECT_NE(slurp(dir / "rho.csv").find(",nan,nan,nan,nan,false,false"), std::string::npos);
}

TEST(SpectralStudy, ReplicateMatchesDirectComputation) {
  StudyConfig cfg;
  const auto row = spectral_replicate("left", 100, 20, 20, 4, cfg);
  synth::GenSpec g;
  g.n = 100;
  g.p = 20;
  g.s = 20;
  g.seed = synth::replicate_seed(cfg.seed, 4);
  const Dataset d = synth::make_dataset(g);
  const auto pre = precompute(d, cfg.hyper);
  const auto fp = fixed_point(d, cfg.hyper, cfg.run, pre);
  EXPECT_DOUBLE_EQ(row.rho_par, stability::spectral_radius(stability::jacobian_par(fp.mu, pre, cfg.hyper)));
  EXPECT_EQ(row.seed, g.seed);
}

TEST(WignerCheck, OrthogonalizeDebugFlag) {
  const fs::path dir = scratch("wigner");
  StudyConfig cfg;
  cfg.out = dir;
  cfg.reps = 3;
  cfg.wigner_n = {100};
  cfg.wigner_p = {4};
  auto rows = cmd_wigner_check(cfg);
  for (const auto& r : rows) {
    EXPECT_GT(r.ratio, 0.0);
    EXPECT_TRUE(std::isfinite(r.ratio));
  }
  cfg.orthogonalize = true;
  rows = cmd_wigner_check(cfg);
  for (const auto& r : rows) EXPECT_LT(r.norm, 0.05);  // only the -tau/(|X_j|^2+tau) diagonal remains
  EXPECT_EQ(line_count(dir / "wigner.csv"), 4u);
  EXPECT_EQ(line_count(dir / "wigner_summary.csv"), 2u);
}

TEST(Config, Validation) {
  StudyConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.reps = 0;
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg = StudyConfig{};
  cfg.left_p = {};
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg = StudyConfig{};
  cfg.wigner_p = {2000, 4};
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg = StudyConfig{};
  cfg.hyper.pi = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidInput);
}

TEST(Verify, AllChecksPass) {
  const fs::path dir = scratch("verify");
  StudyConfig cfg;
  cfg.out = dir;
  cfg.mc_draws = 200000;
  std::vector<CheckRow> rows;
  const bool ok = cmd_verify(cfg, &rows);
  for (const auto& r : rows) EXPECT_TRUE(r.pass) << r.name << " metric " << r.metric;
  EXPECT_TRUE(ok);
  EXPECT_EQ(line_count(dir / "verify.csv"), rows.size() + 1);
}
