#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cavi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thrown when a caller hands in data that violates a documented precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

/// Design matrix, response and (for synthetic data) the generating truth.
struct Dataset {
  Matrix X;                        // n x p
  Vector y;                        // n
  std::optional<Vector> beta_true; // p, synthetic data only
  double sigma2_gen = 1.0;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }

  void validate() const {
    if (X.rows() < 1 || X.cols() < 1) throw InvalidInput("dataset: X must be at least 1x1");
    if (y.size() != X.rows()) throw InvalidInput("dataset: y length must equal rows of X");
    if (!X.allFinite() || !y.allFinite()) throw InvalidInput("dataset: non-finite entries");
    if (beta_true && beta_true->size() != X.cols())
      throw InvalidInput("dataset: beta_true length must equal columns of X");
    if (!(sigma2_gen >= 0.0) || !std::isfinite(sigma2_gen))
      throw InvalidInput("dataset: sigma2_gen must be finite and nonnegative");
  }
};

/// Spike-and-slab prior and likelihood constants.
struct Hyperparams {
  double pi = 0.5;     // prior inclusion probability
  double tau = 1.0;    // slab precision
  double sigma2 = 1.0; // known noise variance

  void validate() const {
    if (!(pi > 0.0 && pi < 1.0)) throw InvalidInput("hyperparams: pi must lie in (0,1)");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidInput("hyperparams: tau must be positive");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
      throw InvalidInput("hyperparams: sigma2 must be positive");
  }
};

}  // namespace cavi
