// Command-line front end for the experiment harness.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cavi/harness/verify.hpp"

namespace {

using cavi::harness::StudyConfig;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInvalidConfig = 2;

void add_common_options(CLI::App& app, StudyConfig& cfg, std::string& scheme, std::string& init) {
  app.add_option("--n", cfg.n, "Observations")->capture_default_str();
  app.add_option("--p", cfg.p, "Covariates")->capture_default_str();
  app.add_option("--s", cfg.s, "Active coefficients")->capture_default_str();
  app.add_option("--amplitude", cfg.amplitude, "Value of each active coefficient")->capture_default_str();
  app.add_option("--pi", cfg.hyper.pi, "Prior inclusion probability")->capture_default_str();
  app.add_option("--tau", cfg.hyper.tau, "Slab precision")->capture_default_str();
  app.add_option("--sigma2", cfg.hyper.sigma2, "Noise variance (known)")->capture_default_str();
  app.add_option("--scheme", scheme, "Update scheme")
      ->check(CLI::IsMember({"seq", "par"}))
      ->capture_default_str();
  app.add_flag("--refresh-alpha", cfg.refresh_alpha,
               "Sequential only: refresh alpha within the sweep");
  app.add_option("--init", init, "Initial means")
      ->check(CLI::IsMember({"zero", "diagls"}))
      ->capture_default_str();
  app.add_option("--max-iter", cfg.run.max_iter, "Maximum sweeps")->capture_default_str();
  app.add_option("--tol", cfg.run.tol, "Sup-norm step tolerance")->capture_default_str();
  app.add_option("--divergence-threshold", cfg.run.divergence_threshold,
                 "Sup-norm of mu treated as divergence")
      ->capture_default_str();
  app.add_option("--reps", cfg.reps, "Replications")->capture_default_str();
  app.add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
  app.add_option("--threads", cfg.threads, "Worker threads (0 = all cores)")->capture_default_str();
  app.add_option("--out", cfg.out, "Output directory")->capture_default_str();

  app.add_option("--left-n", cfg.left_n, "Spectral study, left panel: n")->capture_default_str();
  app.add_option("--left-p", cfg.left_p, "Spectral study, left panel: p grid (s = p)")
      ->capture_default_str();
  app.add_option("--right-n", cfg.right_n, "Spectral study, right panel: n")->capture_default_str();
  app.add_option("--right-p", cfg.right_p, "Spectral study, right panel: p")->capture_default_str();
  app.add_option("--right-s", cfg.right_s, "Spectral study, right panel: s grid")
      ->capture_default_str();

  app.add_option("--wigner-n", cfg.wigner_n, "Random-matrix check: n per grid point")
      ->capture_default_str();
  app.add_option("--wigner-p", cfg.wigner_p, "Random-matrix check: p per grid point")
      ->capture_default_str();
  app.add_flag("--orthogonalize", cfg.orthogonalize,
               "Random-matrix check: orthogonalize the design columns (debug)");
  app.add_option("--mc-draws", cfg.mc_draws, "Verify: Monte-Carlo draws for the ELBO oracle")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential and parallel CAVI for spike-and-slab regression"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value configuration file (flags override it)");

  StudyConfig cfg;
  std::string scheme = "seq";
  std::string init = "diagls";
  std::string panel = "both";
  add_common_options(app, cfg, scheme, init);
  app.add_option("--panel", panel, "Spectral study panels")
      ->check(CLI::IsMember({"left", "right", "both"}))
      ->capture_default_str();

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV");
  auto* example = app.add_subcommand("run-example", "Single run with ELBO trace and plots");
  auto* spectral = app.add_subcommand("spectral-study", "Spectral radii at the fixed point over replicates");
  auto* verify = app.add_subcommand("verify", "Run the oracle suite");
  auto* wigner = app.add_subcommand("wigner-check", "Normalized off-diagonal Gram statistic");
  for (auto* sub : {gen, example, spectral, verify, wigner}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalidConfig;
  }

  cfg.scheme = scheme == "par" ? cavi::Variant::Parallel : cavi::Variant::Sequential;
  cfg.run.init.kind = init == "zero" ? cavi::InitKind::Zero : cavi::InitKind::DiagLS;
  cfg.left_panel = panel != "right";
  cfg.right_panel = panel != "left";

  try {
    cfg.validate();
  } catch (const cavi::InvalidInput& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kExitInvalidConfig;
  }

  try {
    if (*gen) {
      const auto data = cavi::harness::cmd_gen_data(cfg);
      std::cout << "wrote " << data.n() << "x" << data.p() << " dataset to " << cfg.out.string() << '\n';
    } else if (*example) {
      const auto trace = cavi::harness::cmd_run_example(cfg);
      std::cout << "status " << cavi::to_string(trace.status) << " after " << trace.status_iteration
                << " iterations; ELBO monotone: " << (trace.elbo_monotone() ? "yes" : "no") << '\n';
    } else if (*spectral) {
      const auto rows = cavi::harness::cmd_spectral_study(cfg);
      int converged = 0;
      for (const auto& r : rows) converged += r.seq_converged;
      std::cout << rows.size() << " replicates, " << converged << " converged; wrote "
                << (cfg.out / "rho.csv").string() << '\n';
    } else if (*verify) {
      std::vector<cavi::harness::CheckRow> rows;
      const bool ok = cavi::harness::cmd_verify(cfg, &rows);
      for (const auto& r : rows)
        std::printf("%-36s %-5s metric=%.3e threshold=%.3e\n", r.name.c_str(), r.pass ? "PASS" : "FAIL",
                    r.metric, r.threshold);
      return ok ? kExitOk : kExitCheckFailed;
    } else if (*wigner) {
      const auto rows = cavi::harness::cmd_wigner_check(cfg);
      std::cout << rows.size() << " replicates; wrote " << (cfg.out / "wigner.csv").string() << '\n';
    }
  } catch (const cavi::InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitInvalidConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  return kExitOk;
}
