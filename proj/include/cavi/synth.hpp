#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "cavi/types.hpp"

namespace cavi::synth {

/// SplitMix64 finalizer. Used both as the counter hash of the normal stream
/// and as the seed-mixing function.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stream offsets for the two independent seed streams of a dataset.
inline constexpr std::uint64_t kDesignStream = 0x44455349474e0001ULL;
inline constexpr std::uint64_t kNoiseStream = 0x4e4f495345000002ULL;

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return mix64(master ^ mix64(stream));
}

/// Seed of replicate `index` under master seed `master`.
constexpr std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master + index);
}

/// Counter-based standard normal stream: variate k depends only on (seed, k).
///
/// Two 53-bit uniforms are hashed out of the counter and mapped through the
/// cosine branch of Box-Muller. Output is therefore independent of how many
/// threads generate a matrix and of the order entries are requested.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : key_(mix64(seed)) {}

  double operator()(std::uint64_t k) const {
    const std::uint64_t h1 = mix64(key_ ^ (2 * k));
    const std::uint64_t h2 = mix64(key_ ^ (2 * k + 1));
    // (0, 1] and [0, 1)
    const double u1 = (static_cast<double>(h1 >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
};

struct GenSpec {
  int n = 200;
  int p = 50;
  int s = 25;
  double amplitude = 1.0;
  double sigma2 = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1 || p < 1) throw InvalidInput("gen spec: n and p must be positive");
    if (s < 0 || s > p) throw InvalidInput("gen spec: s must lie in [0, p]");
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2))
      throw InvalidInput("gen spec: sigma2 must be finite and nonnegative");
    if (!std::isfinite(amplitude)) throw InvalidInput("gen spec: amplitude must be finite");
  }
};

/// n x p matrix of i.i.d. N(0,1) entries; entry (i, j) is variate i * p + j.
inline Matrix gen_design(int n, int p, std::uint64_t seed) {
  const NormalStream z(seed);
  Matrix X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j)
      X(i, j) = z(static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(p) +
                  static_cast<std::uint64_t>(j));
  return X;
}

inline Matrix gen_design(const GenSpec& spec) {
  spec.validate();
  return gen_design(spec.n, spec.p, derive_seed(spec.seed, kDesignStream));
}

/// (amplitude, ..., amplitude, 0, ..., 0) with s leading actives.
inline Vector gen_beta(const GenSpec& spec) {
  spec.validate();
  Vector beta = Vector::Zero(spec.p);
  beta.head(spec.s).setConstant(spec.amplitude);
  return beta;
}

/// y = X beta + sigma z with z drawn from its own stream.
inline Vector gen_response(const Matrix& X, const Vector& beta, double sigma2, std::uint64_t seed) {
  if (beta.size() != X.cols()) throw InvalidInput("gen_response: beta length must equal columns of X");
  if (!(sigma2 >= 0.0)) throw InvalidInput("gen_response: sigma2 must be nonnegative");
  const NormalStream z(seed);
  Vector y = X * beta;
  if (sigma2 > 0.0) {
    const double sigma = std::sqrt(sigma2);
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += sigma * z(static_cast<std::uint64_t>(i));
  }
  return y;
}

/// Full synthetic dataset. The design depends on (n, p, seed) only, so
/// varying s or the amplitude keeps X fixed.
inline Dataset make_dataset(const GenSpec& spec) {
  spec.validate();
  Dataset data;
  data.X = gen_design(spec);
  data.beta_true = gen_beta(spec);
  data.y = gen_response(data.X, *data.beta_true, spec.sigma2, derive_seed(spec.seed, kNoiseStream));
  data.sigma2_gen = spec.sigma2;
  return data;
}

}  // namespace cavi::synth
