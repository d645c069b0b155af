#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "cavi/model.hpp"

namespace cavi {

// ---------------------------------------------------------------------------
// One-sweep maps
// ---------------------------------------------------------------------------

/// One Gauss-Seidel-type sweep, coordinate by coordinate:
///   mu'_j = (f_j - sum_{l<j} X_j'X_l alpha_l mu'_l - sum_{l>j} X_j'X_l alpha_l mu_l) / (sigma2 a_j)
/// with alpha = psi(mu) frozen at the start of the sweep. With refresh_alpha,
/// alpha_l for l < j is recomputed from mu'_l right after coordinate l moves.
inline Vector seq_sweep(const Vector& mu, const Precomputed& pre, const Hyperparams& hyper,
                        bool refresh_alpha = false, AlphaMode mode = AlphaMode::Psi) {
  const Eigen::Index p = pre.p();
  Vector alpha = inclusion_probabilities(mu, pre, hyper, mode);
  Vector out = mu;
  for (Eigen::Index j = 0; j < p; ++j) {
    double acc = pre.f[j];
    for (Eigen::Index l = 0; l < p; ++l) {
      if (l == j) continue;
      acc -= pre.XtX(j, l) * alpha[l] * out[l];
    }
    out[j] = acc / pre.d[j];
    if (refresh_alpha && mode == AlphaMode::Psi) alpha[j] = psi(out[j], pre.a[j], hyper);
  }
  return out;
}

/// Matrix form of the sequential sweep: forward substitution on
/// (D + L* D_alpha) mu' = f - L*' D_alpha mu.
inline Vector seq_sweep_matrix(const Vector& mu, const Precomputed& pre, const Hyperparams& hyper,
                               AlphaMode mode = AlphaMode::Psi) {
  const Vector alpha = inclusion_probabilities(mu, pre, hyper, mode);
  Matrix T = pre.L_star * alpha.asDiagonal();
  T.diagonal() = pre.d;
  const Vector rhs = pre.f - pre.L_star.transpose() * alpha.cwiseProduct(mu);
  return T.triangularView<Eigen::Lower>().solve(rhs);
}

/// One Jacobi-type sweep: every coordinate uses the previous iterate,
///   mu'_j = (f_j - sum_{l!=j} X_j'X_l alpha_l mu_l) / (sigma2 a_j).
inline Vector par_sweep(const Vector& mu, const Precomputed& pre, const Hyperparams& hyper,
                        AlphaMode mode = AlphaMode::Psi) {
  const Eigen::Index p = pre.p();
  const Vector alpha = inclusion_probabilities(mu, pre, hyper, mode);
  Vector out(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double acc = pre.f[j];
    for (Eigen::Index l = 0; l < p; ++l) {
      if (l == j) continue;
      acc -= pre.XtX(j, l) * alpha[l] * mu[l];
    }
    out[j] = acc / pre.d[j];
  }
  return out;
}

/// Matrix form mu' = D^{-1}[f - (L + U) mu] with L = L* D_alpha, U = L*' D_alpha.
inline Vector par_sweep_matrix(const Vector& mu, const Precomputed& pre, const Hyperparams& hyper,
                               AlphaMode mode = AlphaMode::Psi) {
  const Vector alpha = inclusion_probabilities(mu, pre, hyper, mode);
  const Vector am = alpha.cwiseProduct(mu);
  const Vector rhs = pre.f - pre.L_star * am - pre.L_star.transpose() * am;
  return rhs.cwiseQuotient(pre.d);
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

enum class Variant { Sequential, Parallel };

struct Scheme {
  Variant variant = Variant::Sequential;
  bool alpha_refresh_within_sweep = false;  // Sequential only
  AlphaMode alpha_mode = AlphaMode::Psi;
};

enum class InitKind { Zero, DiagLS, Custom };

struct Init {
  InitKind kind = InitKind::DiagLS;
  Vector custom;  // used when kind == Custom
};

struct RunConfig {
  int max_iter = 1000;
  double tol = 1e-8;                   // sup-norm of the step
  double divergence_threshold = 1e8;   // sup-norm of mu
  Init init;

  void validate() const {
    if (max_iter < 1) throw InvalidInput("run config: max_iter must be positive");
    if (!(tol > 0.0)) throw InvalidInput("run config: tol must be positive");
    if (!(divergence_threshold > tol))
      throw InvalidInput("run config: divergence_threshold must exceed tol");
  }
};

struct IterationRecord {
  int iteration = 0;
  double elbo = 0.0;
  double step_sup_norm = 0.0;
};

enum class RunStatus { Converged, MaxIterReached, Diverged };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "converged";
    case RunStatus::MaxIterReached: return "max_iter";
    case RunStatus::Diverged: return "diverged";
  }
  return "unknown";
}

struct RunTrace {
  std::vector<IterationRecord> records;
  double initial_elbo = 0.0;
  RunStatus status = RunStatus::MaxIterReached;
  int status_iteration = 0;  // iterations used (Converged) or the failing iteration (Diverged)
  VariationalState final_state;

  bool converged() const { return status == RunStatus::Converged; }
  bool diverged() const { return status == RunStatus::Diverged; }

  /// True iff no recorded ELBO (including the initial one) drops by more than slack.
  bool elbo_monotone(double slack = 1e-9) const {
    double prev = initial_elbo;
    for (const auto& r : records) {
      if (!std::isfinite(r.elbo) || r.elbo < prev - slack) return false;
      prev = r.elbo;
    }
    return true;
  }
};

inline Vector initial_mean(const Init& init, const Precomputed& pre) {
  switch (init.kind) {
    case InitKind::Zero: return Vector::Zero(pre.p());
    case InitKind::DiagLS: return pre.f.cwiseQuotient(pre.d);
    case InitKind::Custom:
      if (init.custom.size() != pre.p()) throw InvalidInput("init: custom vector has wrong length");
      if (!init.custom.allFinite()) throw InvalidInput("init: custom vector is not finite");
      return init.custom;
  }
  return Vector::Zero(pre.p());
}

inline Vector apply_sweep(const Scheme& scheme, const Vector& mu, const Precomputed& pre,
                          const Hyperparams& hyper) {
  if (scheme.variant == Variant::Sequential)
    return seq_sweep(mu, pre, hyper, scheme.alpha_refresh_within_sweep, scheme.alpha_mode);
  return par_sweep(mu, pre, hyper, scheme.alpha_mode);
}

/// Iterates the chosen sweep until the step sup-norm drops below tol, the
/// iterate blows past divergence_threshold (or turns non-finite), or max_iter.
inline RunTrace run(const Dataset& data, const Hyperparams& hyper, const Scheme& scheme,
                    const RunConfig& cfg, const Precomputed& pre) {
  cfg.validate();
  RunTrace trace;
  Vector mu = initial_mean(cfg.init, pre);
  trace.initial_elbo = elbo(make_state(mu, pre, hyper, scheme.alpha_mode), data, hyper, pre);
  trace.records.reserve(static_cast<std::size_t>(cfg.max_iter));

  for (int t = 1; t <= cfg.max_iter; ++t) {
    Vector next = apply_sweep(scheme, mu, pre, hyper);
    const bool finite = next.allFinite();
    const double step = finite ? (next - mu).lpNorm<Eigen::Infinity>()
                               : std::numeric_limits<double>::infinity();
    const double e = finite ? elbo(make_state(next, pre, hyper, scheme.alpha_mode), data, hyper, pre)
                            : std::numeric_limits<double>::quiet_NaN();
    trace.records.push_back({t, e, step});
    mu = std::move(next);
    if (!finite || mu.lpNorm<Eigen::Infinity>() > cfg.divergence_threshold) {
      trace.status = RunStatus::Diverged;
      trace.status_iteration = t;
      break;
    }
    if (step < cfg.tol) {
      trace.status = RunStatus::Converged;
      trace.status_iteration = t;
      break;
    }
  }
  if (trace.status == RunStatus::MaxIterReached) trace.status_iteration = cfg.max_iter;
  trace.final_state = make_state(mu, pre, hyper, scheme.alpha_mode);
  return trace;
}

inline RunTrace run(const Dataset& data, const Hyperparams& hyper, const Scheme& scheme,
                    const RunConfig& cfg) {
  return run(data, hyper, scheme, cfg, precompute(data, hyper));
}

/// Raised by fixed_point when the sequential engine does not converge.
class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, RunTrace trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const RunTrace& trace() const { return trace_; }

 private:
  RunTrace trace_;
};

/// Sup-norm residuals of both sweeps at mu.
struct FixedPointResidual {
  double seq = 0.0;
  double par = 0.0;
};

inline FixedPointResidual fixed_point_residual(const Vector& mu, const Precomputed& pre,
                                               const Hyperparams& hyper,
                                               AlphaMode mode = AlphaMode::Psi) {
  return {(seq_sweep(mu, pre, hyper, false, mode) - mu).lpNorm<Eigen::Infinity>(),
          (par_sweep(mu, pre, hyper, mode) - mu).lpNorm<Eigen::Infinity>()};
}

/// Fixed point shared by both maps, located with the sequential engine.
///
/// After the run converges a few extra sweeps polish the iterate so that
/// both residuals sit below 10 * tol.
inline VariationalState fixed_point(const Dataset& data, const Hyperparams& hyper,
                                    const RunConfig& cfg, const Precomputed& pre) {
  RunTrace trace = run(data, hyper, Scheme{}, cfg, pre);
  if (!trace.converged())
    throw NonConvergence(std::string("sequential CAVI did not converge: ") + to_string(trace.status),
                         std::move(trace));
  Vector mu = trace.final_state.mu;
  double last = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 200; ++k) {
    Vector next = seq_sweep(mu, pre, hyper);
    const double step = (next - mu).lpNorm<Eigen::Infinity>();
    mu = std::move(next);
    if (step < 1e-3 * cfg.tol || step >= last) break;
    last = step;
  }
  const auto res = fixed_point_residual(mu, pre, hyper);
  if (!(res.seq < 10.0 * cfg.tol && res.par < 10.0 * cfg.tol))
    throw NonConvergence("fixed point residual check failed", std::move(trace));
  return make_state(std::move(mu), pre, hyper);
}

inline VariationalState fixed_point(const Dataset& data, const Hyperparams& hyper,
                                    const RunConfig& cfg) {
  return fixed_point(data, hyper, cfg, precompute(data, hyper));
}

}  // namespace cavi
