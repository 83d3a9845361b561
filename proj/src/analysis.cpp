// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#include "freqkv/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <utility>

namespace freqkv {
namespace {

// One DCT/IDCT pass over both tensors of every layer: 2 * kv channels per
// layer, M log2 M flops for the forward transform of an M-row region and
// L log2 L for the inverse at the retained length.
double compression_cost(const ModelConfig& cfg, Index m, Index l) {
  const double channels = static_cast<double>(cfg.n_layers) * cfg.kv_channels() * 2.0;
  return channels * (m * std::log2(static_cast<double>(m)) +
                     l * std::log2(static_cast<double>(l)));
}

struct ScheduleSim {
  std::int64_t sum_visible = 0;
  std::int64_t events = 0;
  Index max_rows = 0;
  double compression_flops = 0;
};

// Replays the admission cycle with bare row counts: the token arriving at a
// full cache first settles it, then attends everything plus itself.
ScheduleSim simulate_schedule(const ModelConfig& cfg, const PolicySpec& spec,
                              std::int64_t tokens) {
  ScheduleSim sim;
  Index rows = 0;
  const bool windowed = spec.tag != PolicyTag::kFull;
  const bool compresses = spec.tag != PolicyTag::kFull && spec.tag != PolicyTag::kDropping;
  const CachePolicyConfig& cache = spec.cache;
  for (std::int64_t t = 0; t < tokens; ++t) {
    if (windowed && rows >= cache.window) {
      if (!compresses) {
        rows = cache.window - 1;  // dropping: evict the oldest non-sink row
      } else if (cache.identity_mode()) {
        const Index m = rows - cache.sink_tokens;
        sim.compression_flops += compression_cost(cfg, m, m);
        ++sim.events;  // identity transform: row count unchanged
      } else {
        const Index m = rows - cache.sink_tokens;
        sim.compression_flops += compression_cost(cfg, m, cache.retained());
        ++sim.events;
        rows = cache.sink_tokens + cache.retained();
      }
    }
    ++rows;
    sim.max_rows = std::max(sim.max_rows, rows);
    sim.sum_visible += rows;
  }
  return sim;
}

MatrixD band_reconstruct_low(const Eigen::Ref<const MatrixD>& block, Index cutoff) {
  MatrixD out(block.rows(), block.cols());
  for (Index c = 0; c < block.cols(); ++c) {
    VectorD z = dct(block.col(c));
    z.segment(cutoff, z.size() - cutoff).setZero();
    out.col(c) = idct(z);
  }
  return out;
}

// Shortest stream length across the corpus; every analysis truncates to it so
// per-bin statistics are comparable.
Index common_length(const std::vector<std::vector<std::int32_t>>& streams, const char* what) {
  if (streams.empty()) throw std::invalid_argument(std::string(what) + ": empty corpus");
  std::size_t shortest = streams.front().size();
  for (const auto& stream : streams) shortest = std::min(shortest, stream.size());
  return static_cast<Index>(shortest);
}

Index band_cutoff(Index seq_len, double band) {
  const Index cutoff = static_cast<Index>(std::floor(band * static_cast<double>(seq_len)));
  if (cutoff < 1 || cutoff >= seq_len) {
    throw std::invalid_argument("perturb_report: band leaves an empty band");
  }
  return cutoff;
}

double cosine_similarity(const MatrixD& a, const MatrixD& b) {
  if ((a.array() == b.array()).all()) return 1.0;  // identical states, exactly
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  // Clamp rounding spill so reported similarities stay in [-1, 1].
  return std::clamp(a.cwiseProduct(b).sum() / (na * nb), -1.0, 1.0);
}

// Pulls one layer's pre-RoPE cache contents as doubles.
std::pair<MatrixD, MatrixD> layer_kv(const DecodeSession& session, Index layer) {
  CacheView view = session.layer_cache(layer).view();
  return {view.concat_k().cast<double>(), view.concat_v().cast<double>()};
}

void require_full_session(const DecodeSession& session, const char* what) {
  if (session.policy_spec().tag != PolicyTag::kFull) {
    throw std::invalid_argument(std::string(what) + " needs a full-policy session");
  }
  if (session.tokens_seen() < 2) {
    throw std::invalid_argument(std::string(what) + " needs at least 2 cached tokens");
  }
}

}  // namespace

FlopsReport flops_report(const ModelConfig& cfg, const PolicySpec& spec, std::int64_t tokens) {
  cfg.validate();
  if (spec.tag != PolicyTag::kFull) spec.cache.validate();
  if (tokens < 1) throw std::invalid_argument("flops_report: tokens must be >= 1");

  const ScheduleSim sim = simulate_schedule(cfg, spec, tokens);
  const double t = static_cast<double>(tokens);
  const double per_layer_proj =
      4.0 * cfg.hidden_dim * cfg.q_channels() + 4.0 * cfg.hidden_dim * cfg.kv_channels();

  FlopsReport report;
  report.tokens = tokens;
  report.spec = spec;
  report.compression_events = sim.events;
  report.max_rows = sim.max_rows;
  report.flops.projections = t * cfg.n_layers * per_layer_proj;
  report.flops.attention =
      static_cast<double>(sim.sum_visible) * cfg.n_layers * 4.0 * cfg.q_channels();
  report.flops.ffn = t * cfg.n_layers * 6.0 * cfg.hidden_dim * cfg.ffn_dim;
  report.flops.logits = t * 2.0 * cfg.hidden_dim * cfg.vocab_size;
  report.flops.compression = sim.compression_flops;
  return report;
}

SpectrumReport spectrum_report(const DecodeSession& session, SpectrumScale scale) {
  require_full_session(session, "spectrum_report");
  SpectrumReport report;
  report.scale = scale;
  for (Index layer = 0; layer < session.config().n_layers; ++layer) {
    auto [k, v] = layer_kv(session, layer);
    report.seq_len = k.rows();
    report.channels = k.cols();
    const std::pair<char, const MatrixD*> tensors[] = {{'k', &k}, {'v', &v}};
    for (const auto& [tensor, block] : tensors) {
      PowerSpectrum spectrum = power_spectrum(*block, scale);
      SpectrumBand band;
      band.layer = layer;
      band.tensor = tensor;
      band.low_half_fraction = spectrum.low_band_fraction(report.seq_len / 2);
      band.bins = std::move(spectrum.bins);
      report.bands.push_back(std::move(band));
    }
  }
  return report;
}

SpectrumReport spectrum_report(const ModelConfig& cfg, const WeightStore& weights,
                               const std::vector<std::vector<std::int32_t>>& streams,
                               SpectrumScale scale) {
  const Index length = common_length(streams, "spectrum_report");
  if (length < 2) throw std::invalid_argument("spectrum_report: streams must have >= 2 tokens");

  SpectrumReport total;
  for (const auto& stream : streams) {
    DecodeSession session(cfg, weights, PolicySpec{PolicyTag::kFull, {}});
    session.prefill(std::span(stream.data(), static_cast<std::size_t>(length)));
    SpectrumReport one = spectrum_report(session, scale);
    if (total.bands.empty()) {
      total = std::move(one);
    } else {
      for (std::size_t i = 0; i < total.bands.size(); ++i) {
        total.bands[i].bins += one.bands[i].bins;
      }
    }
  }
  const double count = static_cast<double>(streams.size());
  for (SpectrumBand& band : total.bands) {
    band.bins /= count;
    PowerSpectrum averaged{band.bins, total.channels, scale};
    band.low_half_fraction = averaged.low_band_fraction(total.seq_len / 2);
  }
  return total;
}

PerturbReport perturb_report(const ModelConfig& cfg, const WeightStore& weights,
                             const std::vector<std::int32_t>& original,
                             const std::vector<std::int32_t>& perturbed, double band) {
  if (original.size() != perturbed.size()) {
    throw std::invalid_argument("perturb_report: streams must have equal length");
  }
  if (original.size() < 8) {
    throw std::invalid_argument("perturb_report: streams must have at least 8 tokens");
  }
  DecodeSession base(cfg, weights, PolicySpec{PolicyTag::kFull, {}});
  DecodeSession other(cfg, weights, PolicySpec{PolicyTag::kFull, {}});
  base.prefill(original);
  other.prefill(perturbed);

  PerturbReport report;
  report.seq_len = static_cast<Index>(original.size());
  report.band = band;
  const Index cutoff = band_cutoff(report.seq_len, band);
  for (Index layer = 0; layer < cfg.n_layers; ++layer) {
    auto [k0, v0] = layer_kv(base, layer);
    auto [k1, v1] = layer_kv(other, layer);
    PerturbBand entry;
    entry.layer = layer;
    const MatrixD low_k0 = band_reconstruct_low(k0, cutoff);
    const MatrixD low_k1 = band_reconstruct_low(k1, cutoff);
    const MatrixD low_v0 = band_reconstruct_low(v0, cutoff);
    const MatrixD low_v1 = band_reconstruct_low(v1, cutoff);
    entry.low_k = cosine_similarity(low_k0, low_k1);
    entry.high_k = cosine_similarity(k0 - low_k0, k1 - low_k1);
    entry.low_v = cosine_similarity(low_v0, low_v1);
    entry.high_v = cosine_similarity(v0 - low_v0, v1 - low_v1);
    report.layers.push_back(entry);
  }
  return report;
}

PerturbReport perturb_report(const ModelConfig& cfg, const WeightStore& weights,
                             const std::vector<std::vector<std::int32_t>>& streams,
                             double fraction, double band, std::uint64_t seed) {
  const Index length = common_length(streams, "perturb_report");
  if (length < 8) throw std::invalid_argument("perturb_report: streams must have >= 8 tokens");

  PerturbReport total;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    std::vector<std::int32_t> original(streams[i].begin(),
                                       streams[i].begin() + static_cast<std::ptrdiff_t>(length));
    const std::vector<std::int32_t> noisy =
        perturb_tokens(original, fraction, cfg.vocab_size, seed + i);
    PerturbReport one = perturb_report(cfg, weights, original, noisy, band);
    if (total.layers.empty()) {
      total = std::move(one);
    } else {
      for (std::size_t layer = 0; layer < total.layers.size(); ++layer) {
        total.layers[layer].low_k += one.layers[layer].low_k;
        total.layers[layer].high_k += one.layers[layer].high_k;
        total.layers[layer].low_v += one.layers[layer].low_v;
        total.layers[layer].high_v += one.layers[layer].high_v;
      }
    }
  }
  const double count = static_cast<double>(streams.size());
  for (PerturbBand& entry : total.layers) {
    entry.low_k /= count;
    entry.high_k /= count;
    entry.low_v /= count;
    entry.high_v /= count;
  }
  total.fraction = fraction;
  return total;
}

std::vector<std::int32_t> perturb_tokens(const std::vector<std::int32_t>& tokens, double fraction,
                                         Index vocab_size, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) {
    throw std::invalid_argument("perturb_tokens: fraction must lie in [0, 1]");
  }
  if (vocab_size < 1) throw std::invalid_argument("perturb_tokens: vocab_size must be >= 1");
  std::vector<std::int32_t> out = tokens;
  const auto count = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(tokens.size())));
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(tokens.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<std::int32_t> draw(0, static_cast<std::int32_t>(vocab_size - 1));
  for (std::size_t i = 0; i < count; ++i) out[order[i]] = draw(rng);
  return out;
}

BenchReport bench_report(const ModelConfig& cfg, const WeightStore& weights,
                         const CachePolicyConfig& cache,
                         const std::vector<PolicyTag>& policies,
                         const std::vector<std::int32_t>& tokens, Index new_tokens) {
  if (tokens.empty()) throw std::invalid_argument("bench_report: token stream is empty");
  if (policies.empty()) throw std::invalid_argument("bench_report: no policies given");
  if (new_tokens < 0) throw std::invalid_argument("bench_report: new_tokens must be >= 0");

  DecodeSession baseline(cfg, weights, PolicySpec{PolicyTag::kFull, cache});
  const VectorF full_logits = baseline.prefill(tokens);
  const double full_inf = std::max(1.0, static_cast<double>(full_logits.cwiseAbs().maxCoeff()));

  BenchReport report;
  report.tokens = static_cast<std::int64_t>(tokens.size());
  report.new_tokens = new_tokens;
  for (PolicyTag tag : policies) {
    const PolicySpec spec{tag, cache};
    const auto start = std::chrono::steady_clock::now();
    DecodeSession session(cfg, weights, spec);
    const VectorF logits = session.prefill(tokens);
    std::vector<std::int32_t> generated;
    if (new_tokens > 0) {
      // Continue from the prompt logits the prefill already produced.
      Index best = 0;
      logits.maxCoeff(&best);
      generated.push_back(static_cast<std::int32_t>(best));
      for (Index i = 1; i < new_tokens; ++i) {
        const VectorF next = session.decode_step(generated.back());
        next.maxCoeff(&best);
        generated.push_back(static_cast<std::int32_t>(best));
      }
    }
    const auto stop = std::chrono::steady_clock::now();

    BenchEntry entry;
    entry.policy = tag;
    entry.final_rows = session.layer_cache(0).rows();
    entry.max_rows = session.max_cache_rows();
    entry.max_rope_position = session.max_rope_position();
    entry.compressions = session.layer_cache(0).compression_count();
    entry.logit_drift =
        static_cast<double>((logits - full_logits).cwiseAbs().maxCoeff()) / full_inf;
    entry.model_flops =
        flops_report(cfg, spec, report.tokens + new_tokens).flops.total();
    entry.generated = std::move(generated);
    entry.runtime_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    report.entries.push_back(std::move(entry));
  }

  // Prompts agree by construction, so runs can only part ways in the greedy
  // continuation; report stream indices so the bound "identical until the
  // first compression or eviction" is directly checkable.
  const std::vector<std::int32_t>& reference = report.entries.front().generated;
  for (BenchEntry& entry : report.entries) {
    entry.divergence_step = -1;
    for (std::size_t i = 0; i < reference.size(); ++i) {
      if (entry.generated[i] != reference[i]) {
        entry.divergence_step = report.tokens + static_cast<std::int64_t>(i);
        break;
      }
    }
  }
  return report;
}

}  // namespace freqkv
