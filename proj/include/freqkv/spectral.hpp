// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include "freqkv/types.hpp"

namespace freqkv {

// Orthonormal DCT-II of a real signal.  With N = x.size():
//   z[t] = a_t * sum_n x[n] * cos(pi * t * (2n + 1) / (2N)),
//   a_0 = sqrt(1/N), a_t = sqrt(2/N) for t > 0.
// The transform is unitary: idct(dct(x)) == x and ||z|| == ||x||.
// Internally runs a single complex FFT of length N, so arbitrary N is fine;
// N == 1 is the identity.  Throws std::invalid_argument for empty input.
// Stateless and safe to call concurrently.
VectorD dct(const Eigen::Ref<const VectorD>& x);

// Inverse of dct(); accepts any coefficient vector of length >= 1.
VectorD idct(const Eigen::Ref<const VectorD>& z);

// Keeps the lowest `retain` DCT coefficients of every column, inverts at the
// shorter length and rescales by sqrt(retain / seq_len) so dot products
// against the compressed rows approximate dot products against the originals.
// Column means are preserved exactly (up to rounding) because the DC
// coefficient is always kept.  Requires 1 <= retain <= block.seq_len().
template <typename Scalar>
KvTensor<Scalar> compress_lowpass(const KvTensor<Scalar>& block, Index retain);

// Same shape contract but keeps the highest `retain` coefficients instead.
// A diagnostic policy: discards exactly the band compress_lowpass keeps.
template <typename Scalar>
KvTensor<Scalar> compress_highpass(const KvTensor<Scalar>& block, Index retain);

// compress_lowpass without the sqrt(retain / seq_len) factor.  Iterating this
// operator amplifies the surviving band by sqrt(seq_len / retain) per round,
// which is the failure mode the rescale exists to prevent.
template <typename Scalar>
KvTensor<Scalar> compress_lowpass_unscaled(const KvTensor<Scalar>& block, Index retain);

// Frequency-magnitude convention for power spectra.
enum class SpectrumScale {
  kAmplitude,  // mean |z_t| per bin
  kPower,      // mean z_t^2 per bin
};

// Per-bin magnitude of the DCT of each column, averaged across columns.
// All columns must share the same length; `bins` has that length.
struct PowerSpectrum {
  VectorD bins;             // averaged magnitude per frequency bin
  Index column_count = 0;   // how many columns were averaged
  SpectrumScale scale = SpectrumScale::kAmplitude;

  // Fraction of total power carried by bins [0, cutoff).  Always computed
  // from squared magnitudes regardless of the stored scale's convention.
  double low_band_fraction(Index cutoff) const;
};

// Averages the spectra of all columns of `block` (each column transformed
// independently).  Requires at least one row and one column.
PowerSpectrum power_spectrum(const Eigen::Ref<const MatrixD>& block,
                             SpectrumScale scale = SpectrumScale::kAmplitude);

}  // namespace freqkv
