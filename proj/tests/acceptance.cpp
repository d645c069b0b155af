// Acceptance suite: one line per criterion, nonzero exit if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cavi/harness/verify.hpp"

using namespace cavi;
using namespace cavi::harness;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kMasterSeed = 2024;

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Dataset running_example(int replicate) {
  synth::GenSpec g;
  g.n = 200;
  g.p = 50;
  g.s = 25;
  g.seed = synth::replicate_seed(kMasterSeed, static_cast<std::uint64_t>(replicate));
  return synth::make_dataset(g);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criteria_running_example() {
  const Hyperparams h{0.5, 1.0, 1.0};
  RunConfig rc;
  rc.max_iter = 500;
  rc.tol = 1e-8;
  int seq_ok = 0, separated = 0, par_unstable = 0, par_diverged = 0;
  for (int r = 0; r < 50; ++r) {
    const Dataset d = running_example(r);
    const Precomputed pre = precompute(d, h);
    const RunTrace seq = run(d, h, Scheme{}, rc, pre);
    if (seq.converged() && seq.elbo_monotone(1e-9)) ++seq_ok;
    if (seq.converged() &&
        seq.final_state.alpha.head(25).minCoeff() > seq.final_state.alpha.tail(25).maxCoeff())
      ++separated;

    Scheme par;
    par.variant = Variant::Parallel;
    const RunTrace pt = run(d, h, par, rc, pre);
    if (pt.diverged() || !pt.elbo_monotone(1e-9)) ++par_unstable;
    if (pt.diverged()) ++par_diverged;
  }
  report(1, seq_ok >= 49 && separated >= 45,
         fmt("sequential running example: converged+monotone %d/50 (need >= 49), separated %d/50 "
             "(need >= 45)",
             seq_ok, separated));
  report(2, par_unstable >= 40,
         fmt("parallel running example: diverged or non-monotone %d/50 (need >= 40; %d diverged)",
             par_unstable, par_diverged));
}

void criteria_spectral() {
  StudyConfig cfg;
  cfg.seed = kMasterSeed;
  cfg.reps = 50;
  cfg.left_n = 100;
  cfg.left_p = {10, 20, 30, 40, 50};
  cfg.right_n = 200;
  cfg.right_p = 50;
  cfg.right_s = {5, 15, 25, 35, 45};
  const auto rows = spectral_rows(cfg);

  // Criterion 3.
  int conv50 = 0, seq_below = 0, par_above50 = 0, par_above10 = 0, reps10 = 0;
  for (const auto& r : rows) {
    if (r.panel != "left") continue;
    if (r.p == 50) {
      if (r.seq_converged) {
        ++conv50;
        seq_below += r.rho_seq < 1.0;
      }
      par_above50 += r.seq_converged && r.rho_par > 1.0;
    }
    if (r.p == 10) {
      ++reps10;
      par_above10 += r.seq_converged && r.rho_par > 1.0;
    }
  }
  report(3, conv50 > 0 && seq_below == conv50 && par_above50 >= 45 && par_above10 <= 10,
         fmt("(n,p,s)=(100,50,50): rho_seq<1 in %d/%d converged, rho_par>1 in %d/50 (need >= 45); "
             "(100,10,10): rho_par>1 in %d/%d (need <= 10)",
             seq_below, conv50, par_above50, par_above10, reps10));

  // Criterion 4.
  std::vector<double> medians;
  for (int s : cfg.right_s) {
    std::vector<double> logs;
    for (const auto& r : rows)
      if (r.panel == "right" && r.s == s && r.seq_converged) logs.push_back(std::log(r.rho_par));
    medians.push_back(logs.empty() ? std::nan("") : median(logs));
  }
  bool monotone = true;
  for (std::size_t i = 1; i < medians.size(); ++i) monotone = monotone && medians[i] >= medians[i - 1];
  std::string ms;
  for (double m : medians) ms += fmt("%.4f ", m);
  report(4, monotone, "median log rho_par over s = 5,15,25,35,45 at (200,50): " + ms);

  // Criterion 8.
  int satisfied = 0, exceptions = 0;
  for (const auto& r : rows) {
    if (!r.seq_converged || !r.assumption1_satisfied) continue;
    ++satisfied;
    exceptions += !(r.rho_seq < 1.0);
  }
  report(8, exceptions == 0,
         fmt("assumption satisfied in %d/%zu replicates; rho_seq >= 1 among them: %d", satisfied,
             rows.size(), exceptions));
}

void criterion_jacobian() {
  const Hyperparams h{0.5, 1.0, 1.0};
  const auto insts = jacobian_instances(kMasterSeed, h, 10);
  const auto r = jacobian_oracle(insts, h, 1e-6);
  report(5, r.seq < 1e-5 && r.par < 1e-5,
         fmt("10 instances (40x8): max rel err J_seq %.2e, J_par %.2e (need < 1e-5)", r.seq, r.par));
}

void criterion_degeneracy() {
  const Hyperparams h{0.5, 1.0, 1.0};
  double direct = 0.0, gs = 0.0, jac = 0.0;
  for (int i = 0; i < 5; ++i) {
    synth::GenSpec g;
    g.n = 60;
    g.p = 10;
    g.s = 5;
    g.seed = synth::replicate_seed(kMasterSeed + 6, static_cast<std::uint64_t>(i));
    const Dataset d = synth::make_dataset(g);
    const Precomputed pre = precompute(d, h);
    const Matrix A = oracle::ridge_matrix(d, h);
    const Vector f = d.X.transpose() * d.y;

    Vector mu = Vector::Zero(g.p);
    for (int t = 0; t < 25; ++t) {
      const Vector next = seq_sweep(mu, pre, h, false, AlphaMode::PinnedOne);
      gs = std::max(gs, (next - oracle::gauss_seidel_sweep(A, f, mu)).lpNorm<Eigen::Infinity>());
      jac = std::max(jac, (par_sweep(mu, pre, h, AlphaMode::PinnedOne) - oracle::jacobi_sweep(A, f, mu))
                              .lpNorm<Eigen::Infinity>());
      mu = next;
    }
    Scheme pinned;
    pinned.alpha_mode = AlphaMode::PinnedOne;
    RunConfig rc;
    rc.tol = 1e-12;
    rc.max_iter = 10000;
    const RunTrace tr = run(d, h, pinned, rc, pre);
    direct = std::max(direct, tr.converged() ? (tr.final_state.mu - oracle::direct_ridge_solve(d, h))
                                                   .lpNorm<Eigen::Infinity>()
                                             : std::numeric_limits<double>::infinity());
  }
  report(6, direct < 1e-6 && gs < 1e-12 && jac < 1e-12,
         fmt("alpha pinned to 1, 5 instances (60x10): |mu - ridge solve| %.2e (need < 1e-6), "
             "GS sweep %.2e, Jacobi sweep %.2e (need < 1e-12)",
             direct, gs, jac));
}

void criterion_elbo() {
  const Hyperparams h{0.5, 1.0, 1.0};
  synth::GenSpec g;
  g.n = 20;
  g.p = 4;
  g.s = 2;
  g.seed = 11;
  const Dataset d = synth::make_dataset(g);
  const Precomputed pre = precompute(d, h);
  const std::vector<Vector> states{Vector::Zero(4), fixed_point(d, h, RunConfig{}, pre).mu,
                                   synth::gen_design(4, 1, kMasterSeed).col(0)};
  double worst = 0.0;
  std::string zs;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const VariationalState st = make_state(states[k], pre, h);
    const auto mc = oracle::mc_expected_log_likelihood(d, h, st.mu, st.alpha, 1000000, kMasterSeed + k);
    const double z = std::abs(expected_log_likelihood(st, d, pre) - mc.mean) / mc.std_error;
    worst = std::max(worst, z);
    zs += fmt("%.2f ", z);
  }
  report(7, worst <= 3.0, "expected log-likelihood vs 1e6-draw Monte Carlo, |z| = " + zs + "(need <= 3)");
}

void criterion_wigner() {
  StudyConfig cfg;
  cfg.seed = kMasterSeed;
  cfg.reps = 20;
  cfg.wigner_n = {1000};
  cfg.wigner_p = {200};
  cfg.hyper.tau = 1.0;
  cfg.out = fs::temp_directory_path() / "cavi_acceptance_wigner";
  const auto rows = cmd_wigner_check(cfg);
  double lo = 1e300, hi = -1e300;
  for (const auto& r : rows) lo = std::min(lo, r.ratio), hi = std::max(hi, r.ratio);
  report(9, lo >= 1.8 && hi <= 2.6,
         fmt("(1000,200), 20 seeds: ratio in [%.4f, %.4f] (need within [1.8, 2.6])", lo, hi));
}

void criterion_determinism() {
  const fs::path root = fs::temp_directory_path() / "cavi_acceptance_determinism";
  fs::remove_all(root);
  auto study = [&](const std::string& tag, unsigned threads) {
    StudyConfig cfg;
    cfg.seed = kMasterSeed;
    cfg.threads = threads;
    cfg.out = root / tag / "example";
    cmd_run_example(cfg);
    cfg.scheme = Variant::Parallel;
    cfg.out = root / tag / "example_par";
    cmd_run_example(cfg);
    cfg.reps = 4;
    cfg.out = root / tag / "spectral";
    cmd_spectral_study(cfg);
    cfg.out = root / tag / "wigner";
    cmd_wigner_check(cfg);
    cfg.out = root / tag / "data";
    cmd_gen_data(cfg);
    cfg.out = root / tag / "verify";
    cfg.mc_draws = 20000;
    cmd_verify(cfg);
  };
  study("a", 1);
  study("b", 3);
  int files = 0, identical = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    ++files;
    const fs::path other = root / "b" / fs::relative(entry.path(), root / "a");
    identical += fs::exists(other) && slurp(entry.path()) == slurp(other);
  }
  report(10, files > 0 && identical == files,
         fmt("rerun with same master seed (1 vs 3 threads): %d/%d CSV files byte-identical", identical, files));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  criteria_running_example();
  criteria_spectral();
  criterion_jacobian();
  criterion_degeneracy();
  criterion_elbo();
  criterion_wigner();
  criterion_determinism();
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d criterion(s) failed; %.1f s\n", failures, secs);
  return failures == 0 ? 0 : 1;
}
