#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cavi/types.hpp"

namespace cavi {

/// Design-dependent quantities shared by both update schemes.
///
/// With D = sigma2 * diag(a) and L* = lower(X'X) (zero diagonal), the
/// sequential sweep solves (D + L* D_alpha) mu' = f - L*' D_alpha mu and the
/// parallel sweep computes mu' = D^{-1}(f - (L* + L*') D_alpha mu).
struct Precomputed {
  Vector a;         // a_j = |X_j|^2 / sigma2 + tau
  Vector d;         // diagonal of D: sigma2 * a_j = |X_j|^2 + sigma2 * tau
  Vector col_sq;    // |X_j|^2
  Matrix L_star;    // strictly lower triangle of X'X
  Matrix XtX;
  Vector f;         // X'y
  double sigma2 = 1.0;
  double tau = 1.0;

  Eigen::Index p() const { return a.size(); }
};

inline Precomputed precompute(const Dataset& data, const Hyperparams& hyper) {
  data.validate();
  hyper.validate();
  Precomputed pre;
  pre.sigma2 = hyper.sigma2;
  pre.tau = hyper.tau;
  pre.XtX = data.X.transpose() * data.X;
  // Symmetrize exactly; the product above can differ in the last bit across halves.
  pre.XtX = (0.5 * (pre.XtX + pre.XtX.transpose())).eval();
  pre.col_sq = pre.XtX.diagonal();
  pre.a = (pre.col_sq.array() / hyper.sigma2 + hyper.tau).matrix();
  pre.d = hyper.sigma2 * pre.a;
  pre.L_star = pre.XtX.triangularView<Eigen::StrictlyLower>();
  pre.f = data.X.transpose() * data.y;
  return pre;
}

namespace detail {

/// Overflow-safe logistic function.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double x) { return std::log(x) - std::log1p(-x); }

}  // namespace detail

/// Inclusion probability implied by a variational mean:
/// logit(alpha) = logit(pi) + log(tau / a_j) / 2 + a_j mu_j^2 / 2.
inline double psi(double mu, double a, const Hyperparams& hyper) {
  const double z = detail::logit(hyper.pi) + 0.5 * std::log(hyper.tau / a) + 0.5 * a * mu * mu;
  return detail::sigmoid(z);
}

/// d psi / d mu = alpha (1 - alpha) a_j mu_j.
inline double psi_derivative(double mu, double a, double alpha) {
  return alpha * (1.0 - alpha) * a * mu;
}

/// Applies psi coordinate-wise.
inline Vector psi(const Vector& mu, const Vector& a, const Hyperparams& hyper) {
  Vector alpha(mu.size());
  for (Eigen::Index j = 0; j < mu.size(); ++j) alpha[j] = psi(mu[j], a[j], hyper);
  return alpha;
}

inline Vector psi_derivative(const Vector& mu, const Vector& a, const Vector& alpha) {
  Vector out(mu.size());
  for (Eigen::Index j = 0; j < mu.size(); ++j) out[j] = psi_derivative(mu[j], a[j], alpha[j]);
  return out;
}

/// How inclusion probabilities are tied to the means. PinnedOne fixes alpha = 1,
/// which turns both sweeps into the linear Gauss-Seidel / Jacobi iterations for
/// the ridge system (X'X + sigma2 tau I) mu = f.
enum class AlphaMode { Psi, PinnedOne };

inline Vector inclusion_probabilities(const Vector& mu, const Precomputed& pre,
                                      const Hyperparams& hyper, AlphaMode mode = AlphaMode::Psi) {
  if (mode == AlphaMode::PinnedOne) return Vector::Ones(mu.size());
  return psi(mu, pre.a, hyper);
}

/// Variational means and their derived inclusion probabilities.
/// alpha is never free: construct through make_state.
struct VariationalState {
  Vector mu;
  Vector alpha;
};

inline VariationalState make_state(Vector mu, const Precomputed& pre, const Hyperparams& hyper,
                                   AlphaMode mode = AlphaMode::Psi) {
  Vector alpha = inclusion_probabilities(mu, pre, hyper, mode);
  return {std::move(mu), std::move(alpha)};
}

namespace detail {

// x log(x / c) with 0 log 0 = 0; x is clamped away from 0 inside the log only.
inline double xlogx_over(double x, double c) {
  if (x <= 0.0) return 0.0;
  const double xc = std::clamp(x, 1e-300, 1.0 - 1e-16);
  return x * (std::log(xc) - std::log(c));
}

}  // namespace detail

/// E_q[log p(y | beta)] for the factorized spike-and-slab q with slab
/// variances 1 / a_j.
inline double expected_log_likelihood(const VariationalState& state, const Dataset& data,
                                      const Precomputed& pre) {
  const double n = static_cast<double>(data.n());
  const double s2 = pre.sigma2;
  const Vector mean = state.alpha.cwiseProduct(state.mu);
  const double rss = (data.y - data.X * mean).squaredNorm();
  double var_term = 0.0;
  for (Eigen::Index j = 0; j < pre.p(); ++j) {
    const double al = state.alpha[j];
    const double mu = state.mu[j];
    var_term += pre.col_sq[j] * al * (1.0 / pre.a[j] + (1.0 - al) * mu * mu);
  }
  return -0.5 * n * std::log(2.0 * std::numbers::pi * s2) - rss / (2.0 * s2) - var_term / (2.0 * s2);
}

/// Evidence lower bound of the factorized spike-and-slab family.
inline double elbo(const VariationalState& state, const Dataset& data, const Hyperparams& hyper,
                   const Precomputed& pre) {
  double value = expected_log_likelihood(state, data, pre);
  for (Eigen::Index j = 0; j < pre.p(); ++j) {
    const double al = state.alpha[j];
    const double mu = state.mu[j];
    const double s2 = 1.0 / pre.a[j];
    // Slab KL, weighted by alpha: E[log N(b; 0, 1/tau)] + entropy of N(mu, s2).
    value += 0.5 * al * (1.0 + std::log(hyper.tau * s2) - hyper.tau * (s2 + mu * mu));
    value -= detail::xlogx_over(al, hyper.pi) + detail::xlogx_over(1.0 - al, 1.0 - hyper.pi);
  }
  return value;
}

}  // namespace cavi
