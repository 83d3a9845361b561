// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Slow, definitional reference implementations used only by tests.  These are
// written straight from the textbook formulas (O(N^2) sums, no FFT, no shared
// code with the library) so the fast paths are checked against an independent
// route.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>

namespace oracle {

// Orthonormal DCT-II by direct summation:
//   z[t] = a_t * sum_n x[n] * cos(pi * t * (2n + 1) / (2N)).
inline Eigen::VectorXd dct(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd z(n);
  const double pi = std::acos(-1.0);
  for (Eigen::Index t = 0; t < n; ++t) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      acc += x[i] * std::cos(pi * static_cast<double>(t) * (2.0 * i + 1.0) / (2.0 * n));
    const double scale = t == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    z[t] = scale * acc;
  }
  return z;
}

// Orthonormal inverse DCT-II (i.e. DCT-III) by direct summation:
//   x[n] = sum_t a_t * z[t] * cos(pi * t * (2n + 1) / (2N)).
inline Eigen::VectorXd idct(const Eigen::VectorXd& z) {
  const Eigen::Index n = z.size();
  Eigen::VectorXd x(n);
  const double pi = std::acos(-1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double scale = t == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      acc += scale * z[t] * std::cos(pi * static_cast<double>(t) * (2.0 * i + 1.0) / (2.0 * n));
    }
    x[i] = acc;
  }
  return x;
}

// Low-pass compression done the long way: oracle DCT, truncate, oracle IDCT
// at the shorter length, explicit amplitude rescale.
inline Eigen::VectorXd compress_lowpass(const Eigen::VectorXd& x, Eigen::Index retain,
                                        bool rescale = true) {
  const Eigen::VectorXd z = dct(x);
  const Eigen::VectorXd out = idct(z.head(retain));
  if (!rescale) return out;
  return std::sqrt(static_cast<double>(retain) / static_cast<double>(x.size())) * out;
}

// Reconstruction of a compressed column back to full length: recover the kept
// coefficients, zero-pad to N and invert.  Used for distortion measurements.
inline Eigen::VectorXd reconstruct_lowpass(const Eigen::VectorXd& compressed, Eigen::Index n,
                                           bool rescaled = true) {
  Eigen::VectorXd kept = dct(compressed);
  if (rescaled)
    kept /= std::sqrt(static_cast<double>(compressed.size()) / static_cast<double>(n));
  Eigen::VectorXd padded = Eigen::VectorXd::Zero(n);
  padded.head(kept.size()) = kept;
  return idct(padded);
}

// Deterministic standard normal draws for test fixtures.
inline Eigen::VectorXd gaussian(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = dist(rng);
  return x;
}

// Stationary AR(1) process x[i] = a * x[i-1] + e[i], e ~ N(0, 1), with the
// initial sample drawn from the stationary distribution N(0, 1 / (1 - a^2)).
inline Eigen::VectorXd ar1(Eigen::Index n, double a, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd x(n);
  x[0] = dist(rng) / std::sqrt(1.0 - a * a);
  for (Eigen::Index i = 1; i < n; ++i) x[i] = a * x[i - 1] + dist(rng);
  return x;
}

}  // namespace oracle
