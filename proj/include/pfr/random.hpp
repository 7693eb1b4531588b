// Seeded random draws used by the samplers and simulators.
#pragma once

#include "pfr/types.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace pfr {

using Rng = std::mt19937_64;

/// Independent stream seed for work unit `index` of a run seeded with `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 finalizer over the combined key
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double draw_normal(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  return normal(rng);
}

inline double draw_uniform(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng);
}

inline Matrix draw_normal_matrix(Index rows, Index cols, Rng& rng) {
  Matrix M(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) M(i, j) = draw_normal(rng);
  return M;
}

inline Vector draw_normal_vector(Index n, Rng& rng) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = draw_normal(rng);
  return v;
}

/// Gamma with shape/rate parameterization.
inline double draw_gamma(double shape, double rate, Rng& rng) {
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  return g(rng);
}

inline double draw_inverse_gamma(double shape, double rate, Rng& rng) {
  return 1.0 / draw_gamma(shape, rate, rng);
}

inline double draw_half_cauchy(double scale, Rng& rng) {
  std::cauchy_distribution<double> c(0.0, scale);
  return std::abs(c(rng));
}

inline double draw_folded_t(double dof, double scale, Rng& rng) {
  std::student_t_distribution<double> t(dof);
  return scale * std::abs(t(rng));
}

/// N(mean, sd^2) truncated to [0, inf). Uses Robert's exponential
/// rejection sampler when the bound sits far in the upper tail.
inline double draw_truncated_normal_positive(double mean, double sd, Rng& rng) {
  const double a = -mean / sd;  // standardized lower bound
  if (a < 0.5) {
    for (;;) {
      const double z = draw_normal(rng);
      if (z >= a) return mean + sd * z;
    }
  }
  const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a - std::log(draw_uniform(rng)) / alpha;
    const double rho = std::exp(-0.5 * (z - alpha) * (z - alpha));
    if (draw_uniform(rng) <= rho) return mean + sd * z;
  }
}

/// Multivariate normal draw given the mean and the precision's Cholesky factor.
inline Vector draw_from_precision(const Vector& mean, const Eigen::LLT<Matrix>& precision_llt, Rng& rng) {
  const Vector z = draw_normal_vector(mean.size(), rng);
  return mean + precision_llt.matrixU().solve(z);
}

}  // namespace pfr
