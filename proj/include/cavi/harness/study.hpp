#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "cavi/engines.hpp"
#include "cavi/harness/csv.hpp"
#include "cavi/harness/parallel.hpp"
#include "cavi/harness/svg.hpp"
#include "cavi/oracles.hpp"
#include "cavi/stability.hpp"
#include "cavi/synth.hpp"

namespace cavi::harness {

enum class Mode { GenData, RunExample, SpectralStudy, Verify, WignerCheck };

/// Everything a harness command needs. All outputs are deterministic
/// functions of this struct (the thread count only affects wall time).
struct StudyConfig {
  Hyperparams hyper;
  RunConfig run;
  Variant scheme = Variant::Sequential;
  bool refresh_alpha = false;

  // Single-dataset commands (gen-data, run-example).
  int n = 200;
  int p = 50;
  int s = 25;
  double amplitude = 1.0;

  std::uint64_t seed = 2024;
  int reps = 50;
  unsigned threads = 0;  // 0 = hardware concurrency
  std::filesystem::path out = "out";

  // Spectral study grids.
  bool left_panel = true;
  int left_n = 100;
  std::vector<int> left_p{10, 20, 30, 40, 50};
  bool right_panel = true;
  int right_n = 200;
  int right_p = 50;
  std::vector<int> right_s{5, 15, 25, 35, 45};

  // Random-matrix check.
  std::vector<int> wigner_n{1000, 100};
  std::vector<int> wigner_p{200, 4};
  bool orthogonalize = false;

  long mc_draws = 1000000;

  void validate() const {
    hyper.validate();
    run.validate();
    if (n < 1 || p < 1) throw InvalidInput("config: n and p must be positive");
    if (s < 0 || s > p) throw InvalidInput("config: s must lie in [0, p]");
    if (reps < 1) throw InvalidInput("config: reps must be at least 1");
    if (left_panel && (left_p.empty() || left_n < 1))
      throw InvalidInput("config: left panel grid is empty");
    for (int v : left_p)
      if (v < 1 || v > left_n) throw InvalidInput("config: left panel p must lie in [1, n]");
    if (right_panel && (right_s.empty() || right_n < 1 || right_p < 1))
      throw InvalidInput("config: right panel grid is empty");
    for (int v : right_s)
      if (v < 0 || v > right_p) throw InvalidInput("config: right panel s must lie in [0, p]");
    if (wigner_n.empty() || wigner_n.size() != wigner_p.size())
      throw InvalidInput("config: wigner n and p lists must be nonempty and of equal length");
    for (std::size_t i = 0; i < wigner_n.size(); ++i)
      if (wigner_p[i] < 2 || wigner_n[i] < wigner_p[i])
        throw InvalidInput("config: wigner grid needs n >= p >= 2");
    if (mc_draws < 2) throw InvalidInput("config: mc_draws must be at least 2");
  }

  synth::GenSpec gen_spec() const {
    synth::GenSpec g;
    g.n = n;
    g.p = p;
    g.s = s;
    g.amplitude = amplitude;
    g.sigma2 = hyper.sigma2;
    g.seed = seed;
    return g;
  }
};

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

/// Writes X.csv (one row per observation), y.csv and beta.csv.
inline void write_dataset(const Dataset& data, const std::filesystem::path& dir) {
  {
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < data.p(); ++j) names.push_back("x" + std::to_string(j + 1));
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "X.csv", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + (dir / "X.csv").string() + " for writing");
    for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
    out << '\n';
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      for (Eigen::Index j = 0; j < data.p(); ++j) out << (j ? "," : "") << fmt_double(data.X(i, j));
      out << '\n';
    }
    if (!out) throw IoError("write failed for " + (dir / "X.csv").string());
  }
  CsvWriter y(dir / "y.csv", {"y"});
  for (Eigen::Index i = 0; i < data.n(); ++i) y.row({fmt_double(data.y[i])});
  y.close();
  if (data.beta_true) {
    CsvWriter b(dir / "beta.csv", {"beta"});
    for (Eigen::Index j = 0; j < data.p(); ++j) b.row({fmt_double((*data.beta_true)[j])});
    b.close();
  }
}

/// Reads a dataset written by write_dataset (beta.csv optional).
inline Dataset read_dataset(const std::filesystem::path& dir, double sigma2_gen = 1.0) {
  const auto xr = read_numeric_csv(dir / "X.csv", true);
  const auto yr = read_numeric_csv(dir / "y.csv", true);
  if (xr.empty()) throw InvalidInput("dataset: X.csv has no rows");
  const auto p = static_cast<Eigen::Index>(xr.front().size());
  Dataset data;
  data.X.resize(static_cast<Eigen::Index>(xr.size()), p);
  for (std::size_t i = 0; i < xr.size(); ++i) {
    if (static_cast<Eigen::Index>(xr[i].size()) != p) throw InvalidInput("dataset: ragged X.csv");
    for (Eigen::Index j = 0; j < p; ++j) data.X(static_cast<Eigen::Index>(i), j) = xr[i][j];
  }
  data.y.resize(static_cast<Eigen::Index>(yr.size()));
  for (std::size_t i = 0; i < yr.size(); ++i) {
    if (yr[i].size() != 1) throw InvalidInput("dataset: y.csv must have a single column");
    data.y[static_cast<Eigen::Index>(i)] = yr[i][0];
  }
  if (std::filesystem::exists(dir / "beta.csv")) {
    const auto br = read_numeric_csv(dir / "beta.csv", true);
    Vector b(static_cast<Eigen::Index>(br.size()));
    for (std::size_t j = 0; j < br.size(); ++j) b[static_cast<Eigen::Index>(j)] = br[j].at(0);
    data.beta_true = b;
  }
  data.sigma2_gen = sigma2_gen;
  data.validate();
  return data;
}

inline Dataset cmd_gen_data(const StudyConfig& cfg) {
  cfg.validate();
  Dataset data = synth::make_dataset(cfg.gen_spec());
  write_dataset(data, cfg.out);
  return data;
}

// ---------------------------------------------------------------------------
// run-example
// ---------------------------------------------------------------------------

inline RunTrace run_on(const Dataset& data, const StudyConfig& cfg) {
  Scheme scheme;
  scheme.variant = cfg.scheme;
  scheme.alpha_refresh_within_sweep = cfg.refresh_alpha;
  return run(data, cfg.hyper, scheme, cfg.run);
}

/// Writes trace.csv, means.csv, elbo.svg and means.svg for one run.
inline RunTrace write_run_outputs(const Dataset& data, const RunTrace& trace,
                                  const StudyConfig& cfg) {
  const auto& dir = cfg.out;
  CsvWriter t(dir / "trace.csv", {"iter", "elbo", "step_sup_norm", "status"});
  t.row({"0", fmt_double(trace.initial_elbo), "0", "init"});
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& r = trace.records[i];
    const bool last = i + 1 == trace.records.size();
    t.row({std::to_string(r.iteration), fmt_double(r.elbo), fmt_double(r.step_sup_norm),
           last ? to_string(trace.status) : "running"});
  }
  t.close();

  CsvWriter m(dir / "means.csv", {"j", "beta_true", "mu", "alpha"});
  const auto& st = trace.final_state;
  for (Eigen::Index j = 0; j < data.p(); ++j)
    m.row({std::to_string(j + 1),
           data.beta_true ? fmt_double((*data.beta_true)[j]) : "nan", fmt_double(st.mu[j]),
           fmt_double(st.alpha[j])});
  m.close();

  const std::string name = cfg.scheme == Variant::Sequential ? "sequential" : "parallel";
  svg::Series e{"ELBO", "#1f4e9c", {}, {}, true};
  e.x.push_back(0);
  e.y.push_back(trace.initial_elbo);
  for (const auto& r : trace.records) {
    e.x.push_back(r.iteration);
    e.y.push_back(r.elbo);
  }
  svg::xy_plot(dir / "elbo.svg", "ELBO per iteration (" + name + ", " + to_string(trace.status) + ")",
               "iteration", "ELBO", {e});

  svg::Series mu{"mu_j", "#c0392b", {}, {}, false};
  svg::Series beta{"beta_j", "black", {}, {}, false};
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    mu.x.push_back(static_cast<double>(j + 1));
    mu.y.push_back(st.mu[j]);
    if (data.beta_true) {
      beta.x.push_back(static_cast<double>(j + 1));
      beta.y.push_back((*data.beta_true)[j]);
    }
  }
  svg::xy_plot(dir / "means.svg", "Variational means vs true coefficients (" + name + ")", "j",
               "coefficient", {beta, mu});
  return trace;
}

inline RunTrace cmd_run_example(const StudyConfig& cfg) {
  cfg.validate();
  const Dataset data = synth::make_dataset(cfg.gen_spec());
  return write_run_outputs(data, run_on(data, cfg), cfg);
}

// ---------------------------------------------------------------------------
// spectral-study
// ---------------------------------------------------------------------------

struct SpectralRow {
  std::string panel;
  int n = 0, p = 0, s = 0, replicate = 0;
  std::uint64_t seed = 0;
  double rho_seq = std::numeric_limits<double>::quiet_NaN();
  double rho_par = std::numeric_limits<double>::quiet_NaN();
  bool seq_converged = false;
  bool assumption1_satisfied = false;
};

/// Generates one replicate, finds the sequential fixed point and measures both
/// spectral radii there. Non-convergence is recorded, never thrown.
inline SpectralRow spectral_replicate(const std::string& panel, int n, int p, int s, int replicate,
                                      const StudyConfig& cfg) {
  SpectralRow row{panel, n, p, s, replicate, synth::replicate_seed(cfg.seed, static_cast<std::uint64_t>(replicate))};
  synth::GenSpec g;
  g.n = n;
  g.p = p;
  g.s = s;
  g.amplitude = cfg.amplitude;
  g.sigma2 = cfg.hyper.sigma2;
  g.seed = row.seed;
  const Dataset data = synth::make_dataset(g);
  const Precomputed pre = precompute(data, cfg.hyper);
  try {
    const VariationalState fp = fixed_point(data, cfg.hyper, cfg.run, pre);
    const auto rep = stability::analyze(fp.mu, pre, cfg.hyper);
    row.seq_converged = true;
    row.rho_seq = rep.rho_seq;
    row.rho_par = rep.rho_par;
    row.assumption1_satisfied = rep.assumption1.satisfied;
  } catch (const NonConvergence&) {
    row.seq_converged = false;
  }
  return row;
}

struct GridPoint {
  std::string panel;
  int n, p, s;
};

inline std::vector<GridPoint> spectral_grid(const StudyConfig& cfg) {
  std::vector<GridPoint> grid;
  if (cfg.left_panel)
    for (int p : cfg.left_p) grid.push_back({"left", cfg.left_n, p, p});
  if (cfg.right_panel)
    for (int s : cfg.right_s) grid.push_back({"right", cfg.right_n, cfg.right_p, s});
  return grid;
}

/// All replicates of all grid points, in grid-then-replicate order.
inline std::vector<SpectralRow> spectral_rows(const StudyConfig& cfg) {
  const auto grid = spectral_grid(cfg);
  const std::size_t reps = static_cast<std::size_t>(cfg.reps);
  std::vector<SpectralRow> rows(grid.size() * reps);
  parallel_for(rows.size(), cfg.threads, [&](std::size_t k) {
    const auto& g = grid[k / reps];
    rows[k] = spectral_replicate(g.panel, g.n, g.p, g.s, static_cast<int>(k % reps), cfg);
  });
  return rows;
}

inline double safe_log(double x) {
  return std::isfinite(x) && x > 0.0 ? std::log(x) : std::numeric_limits<double>::quiet_NaN();
}

inline std::vector<SpectralRow> cmd_spectral_study(const StudyConfig& cfg) {
  cfg.validate();
  const auto rows = spectral_rows(cfg);
  CsvWriter w(cfg.out / "rho.csv",
              {"panel", "n", "p", "s", "replicate", "seed", "rho_seq", "log_rho_seq", "rho_par",
               "log_rho_par", "seq_converged", "assumption1_satisfied"});
  for (const auto& r : rows)
    w.row({r.panel, std::to_string(r.n), std::to_string(r.p), std::to_string(r.s),
           std::to_string(r.replicate), std::to_string(r.seed), fmt_double(r.rho_seq),
           fmt_double(safe_log(r.rho_seq)), fmt_double(r.rho_par), fmt_double(safe_log(r.rho_par)),
           fmt_bool(r.seq_converged), fmt_bool(r.assumption1_satisfied)});
  w.close();

  std::vector<svg::Box> boxes;
  int excluded = 0;
  for (const auto& g : spectral_grid(cfg)) {
    const std::string tag = g.panel + " n=" + std::to_string(g.n) + " p=" + std::to_string(g.p) +
                            " s=" + std::to_string(g.s);
    svg::Box bs{"seq " + tag, "#1f4e9c", {}};
    svg::Box bp{"par " + tag, "#c0392b", {}};
    for (const auto& r : rows) {
      if (r.panel != g.panel || r.p != g.p || r.s != g.s || r.n != g.n) continue;
      if (!r.seq_converged) {
        ++excluded;
        continue;
      }
      bs.values.push_back(safe_log(r.rho_seq));
      bp.values.push_back(safe_log(r.rho_par));
    }
    boxes.push_back(std::move(bs));
    boxes.push_back(std::move(bp));
  }
  svg::box_plot(cfg.out / "rho_boxplot.svg",
                "log spectral radius at the fixed point (" + std::to_string(excluded) +
                    " non-converged replicates excluded)",
                "log rho(J)", boxes, 0.0);
  return rows;
}

// ---------------------------------------------------------------------------
// wigner-check
// ---------------------------------------------------------------------------

struct WignerRow {
  int n = 0, p = 0;
  double tau = 1.0;
  int replicate = 0;
  std::uint64_t seed = 0;
  double norm = 0.0, ratio = 0.0;
};

/// Replaces X by an orthogonal matrix with the same column norms.
inline Matrix orthogonalize_columns(const Matrix& X) {
  const Matrix Q = Eigen::HouseholderQR<Matrix>(X).householderQ() * Matrix::Identity(X.rows(), X.cols());
  return Q * X.colwise().norm().asDiagonal();
}

inline std::vector<WignerRow> cmd_wigner_check(const StudyConfig& cfg) {
  cfg.validate();
  const std::size_t reps = static_cast<std::size_t>(cfg.reps);
  const std::size_t points = cfg.wigner_n.size();
  std::vector<WignerRow> rows(points * reps);
  parallel_for(rows.size(), cfg.threads, [&](std::size_t k) {
    WignerRow r;
    r.n = cfg.wigner_n[k / reps];
    r.p = cfg.wigner_p[k / reps];
    r.tau = cfg.hyper.tau;
    r.replicate = static_cast<int>(k % reps);
    r.seed = synth::replicate_seed(cfg.seed, static_cast<std::uint64_t>(r.replicate));
    Matrix X = synth::gen_design(r.n, r.p, synth::derive_seed(r.seed, synth::kDesignStream));
    if (cfg.orthogonalize) X = orthogonalize_columns(X);
    const auto st = stability::wigner_stat(X, r.tau);
    r.norm = st.norm;
    r.ratio = st.ratio;
    rows[k] = r;
  });

  CsvWriter w(cfg.out / "wigner.csv", {"n", "p", "tau", "replicate", "seed", "norm", "ratio"});
  for (const auto& r : rows)
    w.row({std::to_string(r.n), std::to_string(r.p), fmt_double(r.tau), std::to_string(r.replicate),
           std::to_string(r.seed), fmt_double(r.norm), fmt_double(r.ratio)});
  w.close();

  CsvWriter s(cfg.out / "wigner_summary.csv",
              {"n", "p", "tau", "reps", "ratio_min", "ratio_q25", "ratio_median", "ratio_q75", "ratio_max"});
  for (std::size_t g = 0; g < points; ++g) {
    std::vector<double> v;
    for (std::size_t k = g * reps; k < (g + 1) * reps; ++k) v.push_back(rows[k].ratio);
    s.row({std::to_string(cfg.wigner_n[g]), std::to_string(cfg.wigner_p[g]), fmt_double(cfg.hyper.tau),
           std::to_string(reps), fmt_double(svg::detail::quantile(v, 0.0)),
           fmt_double(svg::detail::quantile(v, 0.25)), fmt_double(svg::detail::quantile(v, 0.5)),
           fmt_double(svg::detail::quantile(v, 0.75)), fmt_double(svg::detail::quantile(v, 1.0))});
  }
  s.close();
  return rows;
}

}  // namespace cavi::harness
