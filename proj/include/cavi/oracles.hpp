#pragma once

// Independent reference computations used by the verify command and the test
// suites. Nothing here calls into the sweep or Jacobian code it is meant to check.

#include <cmath>
#include <cstdint>
#include <numbers>

#include "cavi/model.hpp"
#include "cavi/synth.hpp"

namespace cavi::oracle {

/// Ridge system matrix X'X + sigma2 tau I, built straight from the data.
inline Matrix ridge_matrix(const Dataset& data, const Hyperparams& hyper) {
  Matrix A = data.X.transpose() * data.X;
  A = (0.5 * (A + A.transpose())).eval();
  A.diagonal().array() += hyper.sigma2 * hyper.tau;
  return A;
}

inline Vector direct_ridge_solve(const Dataset& data, const Hyperparams& hyper) {
  return ridge_matrix(data, hyper).ldlt().solve(data.X.transpose() * data.y);
}

/// Textbook Gauss-Seidel sweep for A x = b.
inline Vector gauss_seidel_sweep(const Matrix& A, const Vector& b, Vector x) {
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    double acc = b[i];
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      if (j != i) acc -= A(i, j) * x[j];
    x[i] = acc / A(i, i);
  }
  return x;
}

/// Textbook Jacobi sweep for A x = b.
inline Vector jacobi_sweep(const Matrix& A, const Vector& b, const Vector& x) {
  Vector out(x.size());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    double acc = b[i];
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      if (j != i) acc -= A(i, j) * x[j];
    out[i] = acc / A(i, i);
  }
  return out;
}

/// Classical iteration matrices of the splitting A = Dg + Lo + Up.
inline Matrix gauss_seidel_iteration_matrix(const Matrix& A) {
  const Matrix lower = A.triangularView<Eigen::Lower>();
  const Matrix upper = A.triangularView<Eigen::StrictlyUpper>();
  return -lower.triangularView<Eigen::Lower>().solve(upper);
}

inline Matrix jacobi_iteration_matrix(const Matrix& A) {
  Matrix off = A;
  off.diagonal().setZero();
  return -(A.diagonal().cwiseInverse().asDiagonal() * off);
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo estimate of E_q[log p(y | beta)] with beta_j drawn from
/// (1 - alpha_j) delta_0 + alpha_j N(mu_j, 1 / a_j), a_j = |X_j|^2 / sigma2 + tau.
inline MonteCarloEstimate mc_expected_log_likelihood(const Dataset& data, const Hyperparams& hyper,
                                                     const Vector& mu, const Vector& alpha,
                                                     long draws, std::uint64_t seed) {
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  Vector slab_sd(p);
  for (Eigen::Index j = 0; j < p; ++j)
    slab_sd[j] = 1.0 / std::sqrt(data.X.col(j).squaredNorm() / hyper.sigma2 + hyper.tau);

  const synth::NormalStream z(seed);
  const std::uint64_t ukey = synth::mix64(seed ^ 0x5eedu);
  const double c0 = -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi * hyper.sigma2);

  // Welford accumulation of the per-draw log-likelihood.
  double mean = 0.0;
  double m2 = 0.0;
  Vector beta(p);
  Vector resid(n);
  std::uint64_t k = 0;
  for (long d = 0; d < draws; ++d) {
    for (Eigen::Index j = 0; j < p; ++j, ++k) {
      const double u = static_cast<double>(synth::mix64(ukey ^ k) >> 11) * 0x1.0p-53;
      beta[j] = u < alpha[j] ? mu[j] + slab_sd[j] * z(k) : 0.0;
    }
    resid.noalias() = data.y - data.X * beta;
    const double ll = c0 - resid.squaredNorm() / (2.0 * hyper.sigma2);
    const double delta = ll - mean;
    mean += delta / static_cast<double>(d + 1);
    m2 += delta * (ll - mean);
  }
  const double var = draws > 1 ? m2 / static_cast<double>(draws - 1) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(draws))};
}

}  // namespace cavi::oracle
