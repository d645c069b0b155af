#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "cavi/engines.hpp"
#include "cavi/synth.hpp"

namespace cavi::stability {

// ---------------------------------------------------------------------------
// Jacobians of the one-sweep maps
// ---------------------------------------------------------------------------

/// Inclusion probabilities and their derivatives at mu under the given mode.
struct AlphaAt {
  Vector alpha;
  Vector alpha_dot;
};

inline AlphaAt alpha_at(const Vector& mu, const Precomputed& pre, const Hyperparams& hyper,
                        AlphaMode mode) {
  AlphaAt out;
  out.alpha = inclusion_probabilities(mu, pre, hyper, mode);
  out.alpha_dot = mode == AlphaMode::PinnedOne ? Vector::Zero(mu.size())
                                               : psi_derivative(mu, pre.a, out.alpha);
  return out;
}

/// The three pieces of the sequential Jacobian,
///   J_seq = G(mu) + [dG/dmu_j * mu]_j + [dH/dmu_j]_j,
/// where G = -(D + L* D_alpha)^{-1} L*' D_alpha and H = (D + L* D_alpha)^{-1} f.
struct SeqJacobianTerms {
  Matrix G;
  Matrix dG_mu;
  Matrix dH;

  Matrix sum() const { return G + dG_mu + dH; }
};

/// Each derivative column is a rank-one correction: with T = D + L* D_alpha and
/// dD_alpha/dmu_j = alpha_dot_j e_j e_j',
///   dG/dmu_j mu = alpha_dot_j [ (T^{-1} L*)_j (T^{-1} L*' D_alpha mu)_j - (T^{-1} L*')_j mu_j ]
///   dH/dmu_j    = -alpha_dot_j (T^{-1} L*)_j (T^{-1} f)_j
/// so a single triangular factor serves all p columns.
inline SeqJacobianTerms jacobian_seq_terms(const Vector& mu, const Precomputed& pre,
                                           const Hyperparams& hyper,
                                           AlphaMode mode = AlphaMode::Psi) {
  const Eigen::Index p = pre.p();
  const AlphaAt al = alpha_at(mu, pre, hyper, mode);

  Matrix T = pre.L_star * al.alpha.asDiagonal();
  T.diagonal() = pre.d;
  const auto tri = T.triangularView<Eigen::Lower>();

  const Matrix Lt = pre.L_star.transpose();
  const Matrix P = tri.solve(pre.L_star);        // T^{-1} L*
  const Matrix Q = tri.solve(Lt);                // T^{-1} L*'
  const Vector w = Q * al.alpha.cwiseProduct(mu); // T^{-1} L*' D_alpha mu
  const Vector h = tri.solve(pre.f);             // T^{-1} f

  SeqJacobianTerms terms;
  terms.G = -(Q * al.alpha.asDiagonal());
  terms.dG_mu.resize(p, p);
  terms.dH.resize(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double ad = al.alpha_dot[j];
    terms.dG_mu.col(j) = ad * (w[j] * P.col(j) - mu[j] * Q.col(j));
    terms.dH.col(j) = -ad * h[j] * P.col(j);
  }
  return terms;
}

inline Matrix jacobian_seq(const Vector& mu, const Precomputed& pre, const Hyperparams& hyper,
                           AlphaMode mode = AlphaMode::Psi) {
  return jacobian_seq_terms(mu, pre, hyper, mode).sum();
}

/// J_par = -D^{-1} (L* + L*') D_alpha - D^{-1} (L* + L*') diag(alpha_dot_j mu_j).
inline Matrix jacobian_par(const Vector& mu, const Precomputed& pre, const Hyperparams& hyper,
                           AlphaMode mode = AlphaMode::Psi) {
  const AlphaAt al = alpha_at(mu, pre, hyper, mode);
  const Matrix offdiag = pre.L_star + pre.L_star.transpose();
  const Vector right = al.alpha + al.alpha_dot.cwiseProduct(mu);
  return -(pre.d.cwiseInverse().asDiagonal() * offdiag * right.asDiagonal());
}

/// Central-difference Jacobian of a one-sweep map.
template <class Map>
Matrix fd_jacobian(Map&& map, const Vector& mu, double h) {
  const Eigen::Index p = mu.size();
  Matrix J(p, p);
  Vector probe = mu;
  for (Eigen::Index j = 0; j < p; ++j) {
    probe[j] = mu[j] + h;
    const Vector plus = map(probe);
    probe[j] = mu[j] - h;
    const Vector minus = map(probe);
    probe[j] = mu[j];
    J.col(j) = (plus - minus) / (2.0 * h);
  }
  return J;
}

// ---------------------------------------------------------------------------
// Spectral radius
// ---------------------------------------------------------------------------

/// Estimate of rho(J) from the Gelfand formula |J^k|_2^{1/k}, k = 2^m, with
/// one Richardson step in 1/k on the log scale. Scale is tracked in logs so
/// that J^k neither overflows nor underflows.
inline double gelfand_estimate(const Matrix& J, int log2_k = 8) {
  if (J.size() == 0) return 0.0;
  const double n0 = J.norm();
  if (!(n0 > 0.0)) return 0.0;
  Matrix B = J / n0;
  double log_scale = std::log(n0);  // J^k = exp(log_scale) * B
  double prev = std::numeric_limits<double>::quiet_NaN();
  double last = std::numeric_limits<double>::quiet_NaN();
  for (int m = 1; m <= log2_k; ++m) {
    B = (B * B).eval();
    log_scale *= 2.0;
    const double s = B.norm();
    if (!(s > 0.0)) return 0.0;  // nilpotent
    B /= s;
    log_scale += std::log(s);
    const double k = std::ldexp(1.0, m);
    const double two_norm = Eigen::JacobiSVD<Matrix>(B).singularValues()(0);
    prev = last;
    last = (log_scale + std::log(two_norm)) / k;
  }
  if (std::isnan(prev)) return std::exp(last);
  return std::exp(2.0 * last - prev);
}

struct SpectralRadius {
  double value = 0.0;
  bool used_fallback = false;  // eigensolver failed; value is a Gelfand estimate (~1% accuracy)
};

/// Max modulus over the complex spectrum via Hessenberg reduction and the
/// shifted QR iteration.
inline SpectralRadius spectral_radius_checked(const Matrix& J) {
  if (J.rows() != J.cols()) throw InvalidInput("spectral_radius: matrix must be square");
  if (!J.allFinite()) throw InvalidInput("spectral_radius: non-finite entries");
  if (J.size() == 0) return {};
  Eigen::EigenSolver<Matrix> es(J, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) return {gelfand_estimate(J), true};
  return {es.eigenvalues().cwiseAbs().maxCoeff(), false};
}

inline double spectral_radius(const Matrix& J) { return spectral_radius_checked(J).value; }

// ---------------------------------------------------------------------------
// Scaled operators and the contraction assumption
// ---------------------------------------------------------------------------

/// Operators in the D^{1/2}-scaled coordinates used by the contraction analysis.
struct ScaledOperators {
  Matrix L1_star;  // D^{-1/2} L* D^{-1/2}
  Matrix A;        // L1* + L1*'
  Matrix M;        // A + I
  Vector d_alpha;  // alpha*
  Vector b;        // (mu*)^2 a_j (1 - alpha*)
  Matrix C;        // D_alpha^{1/2} A B

  /// (I - M)(I + B) D_alpha, similar to J_par through D^{1/2}.
  Matrix scaled_par_jacobian() const {
    const Vector right = (Vector::Ones(b.size()) + b).cwiseProduct(d_alpha);
    return (Matrix::Identity(M.rows(), M.cols()) - M) * right.asDiagonal();
  }
};

inline ScaledOperators scaled_operators(const Vector& mu, const Precomputed& pre,
                                        const Hyperparams& hyper, AlphaMode mode = AlphaMode::Psi) {
  ScaledOperators ops;
  const Vector dm = pre.d.cwiseSqrt().cwiseInverse();
  ops.L1_star = dm.asDiagonal() * pre.L_star * dm.asDiagonal();
  ops.A = ops.L1_star + ops.L1_star.transpose();
  ops.M = ops.A + Matrix::Identity(pre.p(), pre.p());
  ops.d_alpha = inclusion_probabilities(mu, pre, hyper, mode);
  ops.b = mu.array().square() * pre.a.array() * (1.0 - ops.d_alpha.array());
  if (mode == AlphaMode::PinnedOne) ops.b.setZero();
  ops.C = ops.d_alpha.cwiseSqrt().asDiagonal() * ops.A * ops.b.asDiagonal();
  return ops;
}

struct Assumption1 {
  double delta1 = 0.0;       // lambda_max of B M^2 B v = lambda M v
  double delta2 = 0.0;       // max_j b_j^2 alpha_j / (1 - alpha_j)
  double delta_star = 0.0;   // max(delta1, delta2)
  double delta_bound = 0.5;  // min{1/2, lambda_min(M + D_alpha^{-1}) / |L1*' L1*|_2}
  double lambda_min_M = 0.0;
  double coupling_norm = 0.0;  // |L1*' L1*|_2
  bool satisfied = false;
  bool saturated = false;      // some alpha_j == 1 with b_j > 0
  bool vacuous_bound = false;  // coupling_norm == 0: decoupled coordinates
  bool m_not_pd = false;
};

inline constexpr double kAlphaClamp = 1e-12;

/// Evaluates the two quadratic-form contraction conditions at the fixed point.
///
/// delta1 comes from the symmetric reduction M^{-1/2} (B M^2 B) M^{-1/2} using an
/// eigendecomposition of M; delta2 is the diagonal condition
/// y'B^2 y <= delta y'(D_alpha^{-1} - I) y, which reduces to a coordinate max.
inline Assumption1 check_assumption1(const Vector& mu, const Precomputed& pre,
                                     const Hyperparams& hyper) {
  const ScaledOperators ops = scaled_operators(mu, pre, hyper);
  const Eigen::Index p = pre.p();
  Assumption1 out;

  Eigen::SelfAdjointEigenSolver<Matrix> eig_m(ops.M);
  out.lambda_min_M = eig_m.eigenvalues().minCoeff();
  if (!(out.lambda_min_M > 0.0)) {
    out.m_not_pd = true;
    out.delta1 = std::numeric_limits<double>::infinity();
  } else {
    const Matrix m_inv_half = eig_m.eigenvectors() *
                              eig_m.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                              eig_m.eigenvectors().transpose();
    const Matrix bm = ops.M * ops.b.asDiagonal();  // M B
    Matrix K = m_inv_half * bm.transpose() * bm * m_inv_half;
    K = (0.5 * (K + K.transpose())).eval();
    out.delta1 = std::max(0.0, Eigen::SelfAdjointEigenSolver<Matrix>(K, Eigen::EigenvaluesOnly)
                                   .eigenvalues()
                                   .maxCoeff());
  }

  Vector alpha_c(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double al = ops.d_alpha[j];
    const double bj = ops.b[j];
    if (al >= 1.0 && bj > 0.0) {
      out.saturated = true;
      out.delta2 = std::numeric_limits<double>::infinity();
    }
    alpha_c[j] = std::clamp(al, kAlphaClamp, 1.0 - kAlphaClamp);
    if (bj > 0.0)
      out.delta2 = std::max(out.delta2, bj * bj * alpha_c[j] / (1.0 - alpha_c[j]));
  }
  out.delta_star = std::max(out.delta1, out.delta2);

  Matrix m_plus = ops.M;
  m_plus.diagonal() += alpha_c.cwiseInverse();
  const double lam_min = Eigen::SelfAdjointEigenSolver<Matrix>(m_plus, Eigen::EigenvaluesOnly)
                             .eigenvalues()
                             .minCoeff();
  const Matrix ltl = ops.L1_star.transpose() * ops.L1_star;
  out.coupling_norm = p > 1 ? Eigen::SelfAdjointEigenSolver<Matrix>(ltl, Eigen::EigenvaluesOnly)
                                  .eigenvalues()
                                  .maxCoeff()
                            : 0.0;
  if (!(out.coupling_norm > 0.0)) {
    out.vacuous_bound = true;
    out.delta_bound = 0.5;
    out.satisfied = !out.m_not_pd;
    return out;
  }
  out.delta_bound = std::min(0.5, lam_min / out.coupling_norm);
  out.satisfied = !out.m_not_pd && out.delta_star < out.delta_bound;
  return out;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct StabilityReport {
  double rho_seq = 0.0;
  double rho_par = 0.0;
  Assumption1 assumption1;
  bool not_fixed_point = false;     // residual above 1e-6
  bool eigensolver_fallback = false;
  double residual_seq = 0.0;
  double residual_par = 0.0;

  std::string notes() const {
    std::string s;
    auto add = [&s](const char* flag) {
      if (!s.empty()) s += ';';
      s += flag;
    };
    if (not_fixed_point) add("not_fixed_point");
    if (eigensolver_fallback) add("gelfand_fallback");
    if (assumption1.saturated) add("alpha_saturated");
    if (assumption1.vacuous_bound) add("vacuous_bound");
    if (assumption1.m_not_pd) add("m_not_pd");
    if (rho_par > 1.0) add("par_unstable");
    if (rho_seq > 1.0) add("seq_unstable");
    return s;
  }
};

inline StabilityReport analyze(const Vector& mu_star, const Precomputed& pre,
                               const Hyperparams& hyper) {
  StabilityReport rep;
  const auto res = fixed_point_residual(mu_star, pre, hyper);
  rep.residual_seq = res.seq;
  rep.residual_par = res.par;
  rep.not_fixed_point = !(res.seq < 1e-6 && res.par < 1e-6);
  const auto rs = spectral_radius_checked(jacobian_seq(mu_star, pre, hyper));
  const auto rp = spectral_radius_checked(jacobian_par(mu_star, pre, hyper));
  rep.rho_seq = rs.value;
  rep.rho_par = rp.value;
  rep.eigensolver_fallback = rs.used_fallback || rp.used_fallback;
  rep.assumption1 = check_assumption1(mu_star, pre, hyper);
  return rep;
}

// ---------------------------------------------------------------------------
// Random-matrix statistic
// ---------------------------------------------------------------------------

struct WignerStat {
  double norm = 0.0;   // |A_tau|_2
  double ratio = 0.0;  // norm / sqrt(p / n)
};

/// A_tau = D_tau^{-1/2} (S - D_tau) D_tau^{-1/2} with S = X'X, D_tau = diag(S) + tau I.
inline WignerStat wigner_stat(const Matrix& X, double tau) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (p < 2 || n < p) throw InvalidInput("wigner_stat: need n >= p >= 2");
  if (!(tau > 0.0)) throw InvalidInput("wigner_stat: tau must be positive");
  Matrix S = X.transpose() * X;
  S = (0.5 * (S + S.transpose())).eval();
  const Vector dt = (S.diagonal().array() + tau).matrix();
  const Vector dm = dt.cwiseSqrt().cwiseInverse();
  Matrix Atau = S;
  Atau.diagonal() -= dt;
  Atau = (dm.asDiagonal() * Atau * dm.asDiagonal()).eval();
  const Vector ev =
      Eigen::SelfAdjointEigenSolver<Matrix>(Atau, Eigen::EigenvaluesOnly).eigenvalues();
  WignerStat out;
  out.norm = std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
  out.ratio = out.norm / std::sqrt(static_cast<double>(p) / static_cast<double>(n));
  return out;
}

// ---------------------------------------------------------------------------
// Direct simulation of local stability
// ---------------------------------------------------------------------------

struct PerturbationResult {
  double rho = 0.0;
  bool all_contracted = true;  // every orbit ends within radius / 2
  bool any_escaped = false;    // some orbit leaves 2 * radius (or goes non-finite)
  double max_final_ratio = 0.0;
  /// True when the orbits agree with the spectral radius: contraction when
  /// rho < 0.95, escape when rho > 1.05; nothing is asserted in between.
  bool consistent = true;
};

inline double default_radius(const Vector& mu_star) {
  return 1e-4 * (1.0 + mu_star.lpNorm<Eigen::Infinity>());
}

/// Samples `trials` perturbations of Euclidean norm `radius` around mu_star
/// and iterates `map` on each for `iters` steps.
template <class Map>
PerturbationResult perturbation_decay(Map&& map, const Vector& mu_star, double rho, double radius,
                                      int trials, int iters, std::uint64_t seed = 1) {
  PerturbationResult out;
  out.rho = rho;
  const Eigen::Index p = mu_star.size();
  const synth::NormalStream z(seed);
  std::uint64_t k = 0;
  for (int t = 0; t < trials; ++t) {
    Vector dir(p);
    for (Eigen::Index j = 0; j < p; ++j) dir[j] = z(k++);
    dir *= radius / dir.norm();
    Vector x = mu_star + dir;
    bool escaped = false;
    for (int i = 0; i < iters; ++i) {
      x = map(x);
      const double dist = (x - mu_star).norm();
      if (!std::isfinite(dist) || dist > 2.0 * radius) {
        escaped = true;
        break;
      }
    }
    const double final_ratio = escaped ? std::numeric_limits<double>::infinity()
                                       : (x - mu_star).norm() / radius;
    out.max_final_ratio = std::max(out.max_final_ratio, final_ratio);
    if (escaped) out.any_escaped = true;
    if (escaped || final_ratio > 0.5) out.all_contracted = false;
  }
  if (rho < 0.95) out.consistent = out.all_contracted;
  else if (rho > 1.05) out.consistent = out.any_escaped;
  return out;
}

/// Same, with rho measured from a finite-difference Jacobian of the map.
template <class Map>
PerturbationResult perturbation_decay(Map&& map, const Vector& mu_star, double radius, int trials,
                                      int iters, std::uint64_t seed = 1) {
  const double rho = spectral_radius(fd_jacobian(map, mu_star, 1e-6));
  return perturbation_decay(map, mu_star, rho, radius, trials, iters, seed);
}

}  // namespace cavi::stability
