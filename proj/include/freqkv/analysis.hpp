// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "freqkv/engine.hpp"
#include "freqkv/model.hpp"
#include "freqkv/policy.hpp"
#include "freqkv/spectral.hpp"

namespace freqkv {

// ---------------------------------------------------------------------------
// Analytic decode-cost model.  Multiply-accumulates count as 2 FLOPs.  Per
// token and layer: q/k/v/o projections and the gated FFN; attention scales
// with the rows visible at that step; the lm_head runs once per token.  Each
// compression event adds one DCT/IDCT pass over every kv channel in every
// layer, costed at 2 * (M log2 M + L log2 L) per channel for an M-row input
// compressed to L rows.  Row counts come from simulating the policy schedule
// token by token, so event counts equal expected_compressions exactly.
// ---------------------------------------------------------------------------

struct FlopsBreakdown {
  double projections = 0;
  double attention = 0;
  double ffn = 0;
  double logits = 0;
  double compression = 0;
  double total() const { return projections + attention + ffn + logits + compression; }
  double compression_fraction() const { return total() > 0 ? compression / total() : 0.0; }
};

struct FlopsReport {
  std::int64_t tokens = 0;
  PolicySpec spec;
  FlopsBreakdown flops;
  std::int64_t compression_events = 0;
  Index max_rows = 0;  // cache high-water mark in the simulation
};

FlopsReport flops_report(const ModelConfig& cfg, const PolicySpec& spec, std::int64_t tokens);

// ---------------------------------------------------------------------------
// Frequency-content reports, taken from the pre-RoPE keys and values a
// full-cache session accumulated (the full policy stores the entire stream
// verbatim, which is exactly the signal the spectra should describe).
// ---------------------------------------------------------------------------

struct SpectrumBand {
  Index layer = 0;
  char tensor = 'k';  // 'k' or 'v'
  VectorD bins;       // per-frequency magnitude, averaged over channels
  double low_half_fraction = 0;  // share of power in bins [0, seq_len/2)
};

struct SpectrumReport {
  Index seq_len = 0;
  Index channels = 0;  // columns averaged per band
  SpectrumScale scale = SpectrumScale::kPower;
  std::vector<SpectrumBand> bands;  // ordered by (layer, k before v)
};

// Requires a session running PolicyTag::kFull whose stream has ended.
SpectrumReport spectrum_report(const DecodeSession& session,
                               SpectrumScale scale = SpectrumScale::kPower);

// Runs every stream under the full policy (truncated to the shortest length)
// and averages the per-bin magnitudes across streams.
SpectrumReport spectrum_report(const ModelConfig& cfg, const WeightStore& weights,
                               const std::vector<std::vector<std::int32_t>>& streams,
                               SpectrumScale scale = SpectrumScale::kPower);

// ---------------------------------------------------------------------------
// Band sensitivity probe: how much of each layer's K/V content survives a
// token perturbation, split into the low and high half of the spectrum.
// Similarity 1.0 means the band is unchanged.
// ---------------------------------------------------------------------------

struct PerturbBand {
  Index layer = 0;
  double low_k = 1.0;   // cosine similarity of low-band reconstructions
  double high_k = 1.0;  // ... high-band
  double low_v = 1.0;
  double high_v = 1.0;
};

struct PerturbReport {
  Index seq_len = 0;
  double fraction = 0;
  double band = 0.5;
  std::vector<PerturbBand> layers;
};

// Runs both token streams (equal length, >= 8 tokens) under the full policy
// and compares band-limited reconstructions of every layer's keys and values.
// `band` is the fraction of low bins kept; both bands must be non-empty.
PerturbReport perturb_report(const ModelConfig& cfg, const WeightStore& weights,
                             const std::vector<std::int32_t>& original,
                             const std::vector<std::int32_t>& perturbed, double band = 0.5);

// Perturbs each stream independently (stream i uses seed + i), runs the
// original/perturbed pairs, and averages the similarities per layer.  Streams
// are truncated to the shortest length first.
PerturbReport perturb_report(const ModelConfig& cfg, const WeightStore& weights,
                             const std::vector<std::vector<std::int32_t>>& streams,
                             double fraction, double band, std::uint64_t seed);

// Replaces ceil(fraction * size) positions of `tokens` (chosen and refilled
// by a seeded generator) with uniform vocabulary draws.
std::vector<std::int32_t> perturb_tokens(const std::vector<std::int32_t>& tokens, double fraction,
                                         Index vocab_size, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Policy comparison at desk scale: identical weights and stream, one session
// per policy.  Each session prefills the prompt, then greedy-decodes
// `new_tokens` continuations; entries report cache growth, analytic cost,
// drift against the full baseline, and where the continuation first departs
// from the first listed policy's.
// ---------------------------------------------------------------------------

struct BenchEntry {
  PolicyTag policy = PolicyTag::kFull;
  Index final_rows = 0;
  Index max_rows = 0;
  Index max_rope_position = 0;
  std::int64_t compressions = 0;
  double logit_drift = 0;   // max |logit - full| / max(1, |full|_inf), prompt end
  double model_flops = 0;   // analytic decode cost over the whole run
  std::int64_t divergence_step = -1;  // stream index of first token differing
                                      // from entries[0]'s run; -1 if none
  std::vector<std::int32_t> generated;
  double runtime_ms = 0;
};

struct BenchReport {
  std::int64_t tokens = 0;      // prompt length
  std::int64_t new_tokens = 0;  // greedy continuation length
  std::vector<BenchEntry> entries;
};

BenchReport bench_report(const ModelConfig& cfg, const WeightStore& weights,
                         const CachePolicyConfig& cache,
                         const std::vector<PolicyTag>& policies,
                         const std::vector<std::int32_t>& tokens, Index new_tokens = 0);

}  // namespace freqkv
