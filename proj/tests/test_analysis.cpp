// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "freqkv/analysis.hpp"
#include "freqkv/engine.hpp"

using namespace freqkv;

namespace {

PolicySpec full_spec() { return PolicySpec{PolicyTag::kFull, {}}; }

PolicySpec spec_7b() {
  PolicySpec spec;
  spec.tag = PolicyTag::kFreqKv;
  spec.cache = CachePolicyConfig{4096, 4, 0.5};
  return spec;
}

std::vector<std::int32_t> cycle_tokens(Index count, Index vocab) {
  std::vector<std::int32_t> tokens(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    tokens[static_cast<std::size_t>(i)] = static_cast<std::int32_t>((i * 37 + 11) % vocab);
  }
  return tokens;
}

}  // namespace

TEST_CASE("flops: linear per-token cost of the 7B reference is exact") {
  const ModelConfig cfg = ModelConfig::reference_7b();
  const FlopsReport one = flops_report(cfg, full_spec(), 1);

  // Projections: q and o move hidden<->4096 head channels, k and v likewise
  // for the kv heads; with n_kv_heads == n_heads each pair costs 4h^2.
  CHECK(one.flops.projections == 32.0 * 8.0 * 4096.0 * 4096.0);
  CHECK(one.flops.ffn == 32.0 * 6.0 * 4096.0 * 11008.0);
  CHECK(one.flops.logits == 2.0 * 4096.0 * 32000.0);
  CHECK(one.flops.projections + one.flops.ffn + one.flops.logits == 13214154752.0);

  // A single token attends only itself.
  CHECK(one.flops.attention == 32.0 * 4.0 * 4096.0);
  CHECK(one.flops.compression == 0.0);
  CHECK(one.compression_events == 0);
  CHECK(one.max_rows == 1);
}

TEST_CASE("flops: full-cache attention matches the closed-form triangle sum") {
  const ModelConfig cfg = ModelConfig::desk();
  const std::int64_t tokens = 1000;
  const FlopsReport report = flops_report(cfg, full_spec(), tokens);
  const double sum_visible = 0.5 * tokens * (tokens + 1);
  CHECK(report.flops.attention == cfg.n_layers * 4.0 * cfg.q_channels() * sum_visible);
  CHECK(report.max_rows == tokens);
  CHECK(report.compression_events == 0);
}

TEST_CASE("flops: simulated event counts match the closed form at 7B scale") {
  const ModelConfig cfg = ModelConfig::reference_7b();
  const PolicySpec spec = spec_7b();
  const std::int64_t lengths[] = {4096, 8192, 12288, 16384, 32768, 65536, 131072, 262144};
  const std::int64_t want[] = {0, 3, 5, 7, 15, 31, 63, 127};
  for (int i = 0; i < 8; ++i) {
    const FlopsReport report = flops_report(cfg, spec, lengths[i]);
    CHECK(report.compression_events == want[i]);
    CHECK(report.compression_events == expected_compressions(spec.cache, lengths[i]));
    CHECK(report.max_rows <= spec.cache.window);
  }
}

TEST_CASE("flops: compression overhead lands between 0.01% and 0.1% of decode cost") {
  const ModelConfig cfg = ModelConfig::reference_7b();
  const PolicySpec spec = spec_7b();
  double previous = 0.0;
  for (std::int64_t tokens : {8192, 16384, 32768}) {
    const FlopsReport report = flops_report(cfg, spec, tokens);
    CHECK(report.flops.compression > 0.0);
    CHECK(report.flops.compression_fraction() >= 1e-4);
    CHECK(report.flops.compression_fraction() <= 1e-3);
    if (previous > 0.0) {
      // The overhead share plateaus: doubling the stream moves it <20%.
      CHECK(std::abs(report.flops.compression_fraction() - previous) < 0.2 * previous);
    }
    previous = report.flops.compression_fraction();
  }
}

TEST_CASE("flops: doubling the stream doubles bounded-cache cost but not full cost") {
  const ModelConfig cfg = ModelConfig::reference_7b();
  const PolicySpec freq = spec_7b();
  double full_ratio_top = 0.0;
  for (std::int64_t t = 16384; t <= 262144; t *= 2) {
    const double freq_ratio =
        flops_report(cfg, freq, 2 * t).flops.total() / flops_report(cfg, freq, t).flops.total();
    CHECK(freq_ratio <= 2.3);
    CHECK(freq_ratio >= 1.9);
    full_ratio_top = flops_report(cfg, full_spec(), 2 * t).flops.total() /
                     flops_report(cfg, full_spec(), t).flops.total();
    CHECK(full_ratio_top > 2.3);
  }
  CHECK(full_ratio_top > 3.5);  // quadratic term dominates by 256k tokens
}

TEST_CASE("flops: dropping policy caps visible rows without compression cost") {
  const ModelConfig cfg = ModelConfig::desk();
  PolicySpec spec;
  spec.tag = PolicyTag::kDropping;
  spec.cache = CachePolicyConfig{64, 4, 0.5};
  const FlopsReport report = flops_report(cfg, spec, 500);
  CHECK(report.compression_events == 0);
  CHECK(report.flops.compression == 0.0);
  CHECK(report.max_rows == 64);
  // 63 ramp-up tokens, then every token sees exactly the window.
  const double sum_visible = 0.5 * 63.0 * 64.0 + (500.0 - 63.0) * 64.0;
  CHECK(report.flops.attention == cfg.n_layers * 4.0 * cfg.q_channels() * sum_visible);
}

TEST_CASE("flops: rejects bad input") {
  const ModelConfig cfg = ModelConfig::desk();
  CHECK_THROWS_AS(flops_report(cfg, full_spec(), 0), std::invalid_argument);
  PolicySpec bad;
  bad.tag = PolicyTag::kFreqKv;
  bad.cache.window = 1;
  CHECK_THROWS_AS(flops_report(cfg, bad, 10), std::invalid_argument);
}

TEST_CASE("spectra: full-session report covers every layer and tensor") {
  const ModelConfig cfg = ModelConfig::desk();
  const WeightStore weights = WeightStore::random(cfg, 99);
  DecodeSession session(cfg, weights, full_spec());

  std::mt19937_64 rng(7);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  MatrixF embeddings(96, cfg.hidden_dim);
  for (Index c = 0; c < embeddings.cols(); ++c) {
    for (Index r = 0; r < embeddings.rows(); ++r) embeddings(r, c) = normal(rng);
  }
  session.forward_embeddings(embeddings);

  const SpectrumReport report = spectrum_report(session);
  CHECK(report.seq_len == 96);
  CHECK(report.channels == cfg.kv_channels());
  CHECK(report.scale == SpectrumScale::kPower);
  REQUIRE(report.bands.size() == static_cast<std::size_t>(2 * cfg.n_layers));
  for (std::size_t i = 0; i < report.bands.size(); ++i) {
    const SpectrumBand& band = report.bands[i];
    CHECK(band.layer == static_cast<Index>(i / 2));
    CHECK(band.tensor == (i % 2 == 0 ? 'k' : 'v'));
    CHECK(band.bins.size() == 96);
    CHECK((band.bins.array() >= 0.0).all());
    CHECK(band.low_half_fraction >= 0.0);
    CHECK(band.low_half_fraction <= 1.0);
    if (band.layer == 0) {
      // Layer 0's K/V rows depend only on their own position's iid input, so
      // the time series are white and the spectrum near flat.
      CHECK(band.low_half_fraction >= 0.45);
      CHECK(band.low_half_fraction <= 0.55);
    }
  }
}

TEST_CASE("spectra: single-stream corpus agrees with the session route") {
  const ModelConfig cfg = ModelConfig::desk();
  const WeightStore weights = WeightStore::random(cfg, 99);
  const std::vector<std::int32_t> tokens = cycle_tokens(48, cfg.vocab_size);

  DecodeSession session(cfg, weights, full_spec());
  session.prefill(tokens);
  const SpectrumReport a = spectrum_report(session, SpectrumScale::kAmplitude);
  const SpectrumReport b = spectrum_report(cfg, weights, {tokens}, SpectrumScale::kAmplitude);
  REQUIRE(a.bands.size() == b.bands.size());
  for (std::size_t i = 0; i < a.bands.size(); ++i) {
    CHECK((a.bands[i].bins.array() == b.bands[i].bins.array()).all());
    CHECK(a.bands[i].low_half_fraction == b.bands[i].low_half_fraction);
  }
}

TEST_CASE("spectra: multi-stream corpus truncates to the shortest and averages") {
  const ModelConfig cfg = ModelConfig::desk();
  const WeightStore weights = WeightStore::random(cfg, 99);
  std::vector<std::vector<std::int32_t>> streams;
  streams.push_back(cycle_tokens(40, cfg.vocab_size));
  streams.push_back(cycle_tokens(64, cfg.vocab_size));
  for (auto& token : streams[1]) token = (token + 101) % cfg.vocab_size;

  const SpectrumReport avg = spectrum_report(cfg, weights, streams);
  CHECK(avg.seq_len == 40);
  REQUIRE(avg.bands.size() == static_cast<std::size_t>(2 * cfg.n_layers));

  std::vector<std::int32_t> tail(streams[1].begin(), streams[1].begin() + 40);
  const SpectrumReport a = spectrum_report(cfg, weights, {streams[0]});
  const SpectrumReport b = spectrum_report(cfg, weights, {tail});
  for (std::size_t i = 0; i < avg.bands.size(); ++i) {
    const VectorD mean = 0.5 * (a.bands[i].bins + b.bands[i].bins);
    CHECK((avg.bands[i].bins - mean).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(spectrum_report(cfg, weights, {}, SpectrumScale::kPower),
                  std::invalid_argument);
}

TEST_CASE("spectra: constant embeddings concentrate all power at DC") {
  const ModelConfig cfg = ModelConfig::desk();
  const WeightStore weights = WeightStore::random(cfg, 99);
  DecodeSession session(cfg, weights, full_spec());
  MatrixF embeddings = MatrixF::Zero(32, cfg.hidden_dim);
  embeddings.rowwise() = Eigen::RowVectorXf::LinSpaced(cfg.hidden_dim, -1.0f, 1.0f);
  session.forward_embeddings(embeddings);
  const SpectrumReport report = spectrum_report(session);
  // Identical rows make every K/V channel constant in time.
  CHECK(report.bands.front().low_half_fraction > 0.99);
  PowerSpectrum dc{report.bands.front().bins, report.channels, report.scale};
  CHECK(dc.low_band_fraction(1) > 0.99);
}

TEST_CASE("spectra: rejects non-full sessions and empty caches") {
  const ModelConfig cfg = ModelConfig::desk();
  const WeightStore weights = WeightStore::random(cfg, 99);
  PolicySpec freq;
  freq.tag = PolicyTag::kFreqKv;
  freq.cache = CachePolicyConfig{32, 4, 0.5};
  DecodeSession bounded(cfg, weights, freq);
  bounded.prefill(cycle_tokens(8, cfg.vocab_size));
  CHECK_THROWS_AS(spectrum_report(bounded), std::invalid_argument);

  DecodeSession empty(cfg, weights, full_spec());
  CHECK_THROWS_AS(spectrum_report(empty), std::invalid_argument);
}

TEST_CASE("perturb: identical streams give unit similarity in both bands") {
  const ModelConfig cfg = ModelConfig::desk();
  const WeightStore weights = WeightStore::random(cfg, 123);
  const std::vector<std::int32_t> tokens = cycle_tokens(64, cfg.vocab_size);
  const PerturbReport report = perturb_report(cfg, weights, tokens, tokens);
  CHECK(report.seq_len == 64);
  REQUIRE(report.layers.size() == static_cast<std::size_t>(cfg.n_layers));
  for (const PerturbBand& band : report.layers) {
    CHECK(band.low_k == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(band.high_k == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(band.low_v == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(band.high_v == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("perturb: token replacement moves every band strictly below 1") {
  const ModelConfig cfg = ModelConfig::desk();
  const WeightStore weights = WeightStore::random(cfg, 123);
  const std::vector<std::int32_t> tokens = cycle_tokens(64, cfg.vocab_size);
  const std::vector<std::int32_t> noisy = perturb_tokens(tokens, 0.5, cfg.vocab_size, 5);
  const PerturbReport report = perturb_report(cfg, weights, tokens, noisy);
  for (const PerturbBand& band : report.layers) {
    for (double s : {band.low_k, band.high_k, band.low_v, band.high_v}) {
      CHECK(s < 1.0);
      CHECK(s >= -1.0);
      CHECK(std::isfinite(s));
    }
  }
}

TEST_CASE("perturb: corpus route averages streams and keys off the fraction") {
  const ModelConfig cfg = ModelConfig::desk();
  const WeightStore weights = WeightStore::random(cfg, 123);
  std::vector<std::vector<std::int32_t>> streams;
  streams.push_back(cycle_tokens(48, cfg.vocab_size));
  streams.push_back(cycle_tokens(48, cfg.vocab_size));
  for (auto& token : streams[1]) token = (token + 7) % cfg.vocab_size;

  // Zero fraction leaves the streams untouched, so the seed cannot matter.
  const PerturbReport clean_a = perturb_report(cfg, weights, streams, 0.0, 0.5, 1);
  const PerturbReport clean_b = perturb_report(cfg, weights, streams, 0.0, 0.5, 2);
  REQUIRE(clean_a.layers.size() == static_cast<std::size_t>(cfg.n_layers));
  for (std::size_t i = 0; i < clean_a.layers.size(); ++i) {
    CHECK(clean_a.layers[i].low_k == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(clean_a.layers[i].high_k == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(clean_a.layers[i].low_v == clean_b.layers[i].low_v);
    CHECK(clean_a.layers[i].high_v == clean_b.layers[i].high_v);
  }

  // Replacing every token of unrelated random streams decorrelates both
  // bands: the states share no structure beyond chance overlap.
  std::vector<std::vector<std::int32_t>> noise;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::int32_t> draw(0, static_cast<std::int32_t>(cfg.vocab_size - 1));
  for (int s = 0; s < 2; ++s) {
    std::vector<std::int32_t> stream(64);
    for (auto& token : stream) token = draw(rng);
    noise.push_back(std::move(stream));
  }
  const PerturbReport scrambled = perturb_report(cfg, weights, noise, 1.0, 0.5, 3);
  for (const PerturbBand& band : scrambled.layers) {
    CHECK(std::abs(band.low_k) <= 0.2);
    CHECK(std::abs(band.high_k) <= 0.2);
    CHECK(std::abs(band.low_v) <= 0.2);
    CHECK(std::abs(band.high_v) <= 0.2);
  }
}

TEST_CASE("perturb: token editing is deterministic and respects the fraction") {
  const std::vector<std::int32_t> tokens = cycle_tokens(100, 512);
  const std::vector<std::int32_t> a = perturb_tokens(tokens, 0.25, 512, 42);
  const std::vector<std::int32_t> b = perturb_tokens(tokens, 0.25, 512, 42);
  CHECK(a == b);
  CHECK(perturb_tokens(tokens, 0.0, 512, 42) == tokens);

  std::size_t changed = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (a[i] != tokens[i]) ++changed;
  }
  CHECK(changed <= 25);  // draws may coincide with the original token
  CHECK(changed >= 15);
  // The touched count rounds up, so any positive fraction edits something.
  const std::vector<std::int32_t> tiny = perturb_tokens(tokens, 0.001, 2, 4242);
  std::size_t touched = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tiny[i] != tokens[i]) ++touched;
  }
  CHECK(touched <= 1);
  CHECK_THROWS_AS(perturb_tokens(tokens, 1.5, 512, 0), std::invalid_argument);
  CHECK_THROWS_AS(perturb_tokens(tokens, 0.5, 0, 0), std::invalid_argument);
}

TEST_CASE("perturb: degenerate streams and bands are rejected") {
  const ModelConfig cfg = ModelConfig::desk();
  const WeightStore weights = WeightStore::random(cfg, 123);
  const std::vector<std::int32_t> tokens = cycle_tokens(16, cfg.vocab_size);
  std::vector<std::int32_t> shorter(tokens.begin(), tokens.end() - 1);
  CHECK_THROWS_AS(perturb_report(cfg, weights, tokens, shorter), std::invalid_argument);
  const std::vector<std::int32_t> seven = cycle_tokens(7, cfg.vocab_size);
  CHECK_THROWS_AS(perturb_report(cfg, weights, seven, seven), std::invalid_argument);
  CHECK_THROWS_AS(perturb_report(cfg, weights, tokens, tokens, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(perturb_report(cfg, weights, tokens, tokens, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(perturb_report(cfg, weights, {}, 0.5, 0.5, 0), std::invalid_argument);
}

TEST_CASE("bench: per-policy summary tracks rows, events, and drift") {
  const ModelConfig cfg = ModelConfig::desk();
  const WeightStore weights = WeightStore::random(cfg, 321);
  const CachePolicyConfig cache{64, 4, 0.5};
  const std::vector<PolicyTag> policies = {PolicyTag::kFull, PolicyTag::kDropping,
                                           PolicyTag::kFreqKv, PolicyTag::kHighFreq,
                                           PolicyTag::kNoRescale, PolicyTag::kPostRope};
  const std::vector<std::int32_t> tokens = cycle_tokens(200, cfg.vocab_size);
  const BenchReport report = bench_report(cfg, weights, cache, policies, tokens);

  CHECK(report.tokens == 200);
  CHECK(report.new_tokens == 0);
  REQUIRE(report.entries.size() == policies.size());
  for (std::size_t i = 0; i < policies.size(); ++i) {
    const BenchEntry& entry = report.entries[i];
    CHECK(entry.policy == policies[i]);
    CHECK(std::isfinite(entry.logit_drift));
    CHECK(entry.runtime_ms >= 0.0);
    CHECK(entry.generated.empty());
    CHECK(entry.divergence_step == -1);  // nothing generated, nothing to differ
    CHECK(entry.model_flops > 0.0);
    if (entry.policy == PolicyTag::kFull) {
      CHECK(entry.logit_drift == 0.0);
      CHECK(entry.max_rows == 200);
      CHECK(entry.compressions == 0);
    } else {
      CHECK(entry.max_rows <= 64);
      CHECK(entry.logit_drift > 0.0);
      CHECK(entry.model_flops < report.entries[0].model_flops);
    }
    if (entry.policy == PolicyTag::kFreqKv) {
      CHECK(entry.compressions == expected_compressions(cache, 200));
      CHECK(entry.final_rows <= 64);
    }
    if (entry.policy == PolicyTag::kDropping) {
      CHECK(entry.final_rows == 64);
      CHECK(entry.compressions == 0);
    }
  }
  CHECK_THROWS_AS(bench_report(cfg, weights, cache, policies, {}), std::invalid_argument);
  CHECK_THROWS_AS(bench_report(cfg, weights, cache, {}, tokens), std::invalid_argument);
}

TEST_CASE("bench: continuations stay aligned until the first compression or eviction") {
  const ModelConfig cfg = ModelConfig::desk();
  const WeightStore weights = WeightStore::random(cfg, 321);
  const CachePolicyConfig cache{64, 4, 0.5};
  const std::vector<PolicyTag> policies = {PolicyTag::kFull, PolicyTag::kDropping,
                                           PolicyTag::kFreqKv};
  // Short prompt: every cache is far below the window, so all policies run
  // bitwise-identical paths until token 64 fills it.
  const std::vector<std::int32_t> prompt = cycle_tokens(20, cfg.vocab_size);
  const BenchReport report = bench_report(cfg, weights, cache, policies, prompt, 70);

  REQUIRE(report.entries.size() == 3);
  for (const BenchEntry& entry : report.entries) {
    CHECK(entry.generated.size() == 70);
  }
  CHECK(report.entries[0].divergence_step == -1);
  for (std::size_t i = 1; i < report.entries.size(); ++i) {
    const BenchEntry& entry = report.entries[i];
    if (entry.divergence_step != -1) CHECK(entry.divergence_step >= 64);
    // The shared prefix is bitwise equal, not merely close.
    for (std::int64_t t = 0; t < 44; ++t) {
      CHECK(entry.generated[static_cast<std::size_t>(t)] ==
            report.entries[0].generated[static_cast<std::size_t>(t)]);
    }
  }
  // A greedy run equals the library generate() call exactly.
  DecodeSession session(cfg, weights, PolicySpec{PolicyTag::kFreqKv, cache});
  CHECK(session.generate(prompt, 70) == report.entries[2].generated);
}
