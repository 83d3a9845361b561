// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#include "freqkv/spectral.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <stdexcept>

namespace freqkv {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Both transforms run over a single complex FFT of the same length via the
// even/odd reordering trick: v[i] = x[2i] for the first half, v[N-1-i] =
// x[2i+1] for the second.  This works for any N, including odd sizes.

void check_nonempty(Index n) {
  if (n < 1) throw std::invalid_argument("dct: input must contain at least one sample");
}

VectorD dct_impl(const Eigen::Ref<const VectorD>& x) {
  const Index n = x.size();
  check_nonempty(n);
  if (n == 1) return x;  // the 1x1 transform matrix is [1]

  Eigen::VectorXcd v(n);
  const Index half = (n + 1) / 2;
  for (Index i = 0; i < half; ++i) v[i] = x[2 * i];
  for (Index i = 0; 2 * i + 1 < n; ++i) v[n - 1 - i] = x[2 * i + 1];

  Eigen::FFT<double> fft;
  Eigen::VectorXcd spectrum;
  fft.fwd(spectrum, v);

  VectorD z(n);
  const double a0 = std::sqrt(1.0 / n);
  const double at = std::sqrt(2.0 / n);
  for (Index t = 0; t < n; ++t) {
    const std::complex<double> twiddle = std::polar(1.0, -kPi * t / (2.0 * n));
    z[t] = (t == 0 ? a0 : at) * (twiddle * spectrum[t]).real();
  }
  return z;
}

VectorD idct_impl(const Eigen::Ref<const VectorD>& z) {
  const Index n = z.size();
  check_nonempty(n);
  if (n == 1) return z;

  // Undo the orthonormal scaling, rebuild the half-shifted spectrum and
  // invert the same even/odd reordering the forward pass applied.
  VectorD raw(n);
  raw[0] = z[0] / std::sqrt(1.0 / n);
  const double at = std::sqrt(2.0 / n);
  for (Index t = 1; t < n; ++t) raw[t] = z[t] / at;

  Eigen::VectorXcd spectrum(n);
  spectrum[0] = raw[0];
  for (Index t = 1; t < n; ++t)
    spectrum[t] = std::polar(1.0, kPi * t / (2.0 * n)) *
                  std::complex<double>(raw[t], -raw[n - t]);

  Eigen::FFT<double> fft;
  Eigen::VectorXcd v;
  fft.inv(v, spectrum);  // includes the 1/N factor

  VectorD x(n);
  const Index half = (n + 1) / 2;
  for (Index i = 0; i < half; ++i) x[2 * i] = v[i].real();
  for (Index i = 0; 2 * i + 1 < n; ++i) x[2 * i + 1] = v[n - 1 - i].real();
  return x;
}

enum class Band { kLow, kHigh };

template <typename Scalar>
KvTensor<Scalar> compress_impl(const KvTensor<Scalar>& block, Index retain, Band band,
                               bool rescale) {
  const Index n = block.seq_len();
  if (n < 1) throw std::invalid_argument("compress: block must contain at least one row");
  if (retain < 1 || retain > n)
    throw std::invalid_argument("compress: retain must lie in [1, seq_len], got " +
                                std::to_string(retain) + " for seq_len " + std::to_string(n));

  const double gain = rescale ? std::sqrt(static_cast<double>(retain) / n) : 1.0;
  KvTensor<Scalar> out = KvTensor<Scalar>::zero(retain, block.n_heads, block.head_dim);
  for (Index c = 0; c < block.channels(); ++c) {
    const VectorD coeffs = dct_impl(block.data.col(c).template cast<double>());
    const VectorD kept =
        band == Band::kLow ? coeffs.head(retain).eval() : coeffs.tail(retain).eval();
    out.data.col(c) = (gain * idct_impl(kept)).template cast<Scalar>();
  }
  return out;
}

}  // namespace

VectorD dct(const Eigen::Ref<const VectorD>& x) { return dct_impl(x); }

VectorD idct(const Eigen::Ref<const VectorD>& z) { return idct_impl(z); }

template <typename Scalar>
KvTensor<Scalar> compress_lowpass(const KvTensor<Scalar>& block, Index retain) {
  return compress_impl(block, retain, Band::kLow, /*rescale=*/true);
}

template <typename Scalar>
KvTensor<Scalar> compress_highpass(const KvTensor<Scalar>& block, Index retain) {
  return compress_impl(block, retain, Band::kHigh, /*rescale=*/true);
}

template <typename Scalar>
KvTensor<Scalar> compress_lowpass_unscaled(const KvTensor<Scalar>& block, Index retain) {
  return compress_impl(block, retain, Band::kLow, /*rescale=*/false);
}

template KvTensor<float> compress_lowpass(const KvTensor<float>&, Index);
template KvTensor<double> compress_lowpass(const KvTensor<double>&, Index);
template KvTensor<float> compress_highpass(const KvTensor<float>&, Index);
template KvTensor<double> compress_highpass(const KvTensor<double>&, Index);
template KvTensor<float> compress_lowpass_unscaled(const KvTensor<float>&, Index);
template KvTensor<double> compress_lowpass_unscaled(const KvTensor<double>&, Index);

double PowerSpectrum::low_band_fraction(Index cutoff) const {
  if (cutoff < 0 || cutoff > bins.size())
    throw std::invalid_argument("low_band_fraction: cutoff out of range");
  // Fractions are always of squared magnitude, so the amplitude convention
  // squares its bins first while the power convention uses them directly.
  const VectorD power = scale == SpectrumScale::kAmplitude ? bins.cwiseAbs2().eval() : bins;
  const double total = power.sum();
  if (total == 0.0) return 0.0;
  return power.head(cutoff).sum() / total;
}

PowerSpectrum power_spectrum(const Eigen::Ref<const MatrixD>& block, SpectrumScale scale) {
  if (block.rows() < 1 || block.cols() < 1)
    throw std::invalid_argument("power_spectrum: block must be non-empty");
  PowerSpectrum ps;
  ps.scale = scale;
  ps.column_count = block.cols();
  ps.bins = VectorD::Zero(block.rows());
  for (Index c = 0; c < block.cols(); ++c) {
    const VectorD z = dct_impl(block.col(c));
    ps.bins += scale == SpectrumScale::kAmplitude ? z.cwiseAbs().eval() : z.cwiseAbs2().eval();
  }
  ps.bins /= static_cast<double>(block.cols());
  return ps;
}

}  // namespace freqkv
