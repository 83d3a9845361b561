// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "freqkv/analysis.hpp"
#include "freqkv/cache.hpp"
#include "freqkv/model.hpp"
#include "freqkv/policy.hpp"

namespace freqkv {

// ---------------------------------------------------------------------------
// Token streams.  The extension picks the encoding:
//   .txt  whitespace-separated decimal ids
//   .bin  raw little-endian 32-bit ids, no header
// Anything else is rejected.  Ids must be non-negative.
// ---------------------------------------------------------------------------
std::vector<std::int32_t> read_tokens(const std::filesystem::path& path);
void write_tokens(const std::filesystem::path& path, std::span<const std::int32_t> tokens);

// ---------------------------------------------------------------------------
// Weight files ("FKVW", version 1).  Layout, all little-endian:
//   magic "FKVW" | u32 version | u32 tensor count
//   per tensor: u32 name length | name bytes | u32 rows | u32 cols
//   then per tensor, in the same (lexicographic) order: rows*cols f32
//   values, row-major.
// Round-trips are bit-exact.  Errors are distinct: bad magic, unsupported
// version, and truncation each raise their own message; shape validation
// against a config stays with WeightStore::validate_against.
// ---------------------------------------------------------------------------
void save_weights(const WeightStore& store, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Cache snapshots ("FKVC", version 1).  Captures one FreqKvCache: config,
// counters, and the six region matrices (f32, row-major), little-endian.
// Restoring yields a cache whose future behavior matches the original's.
// ---------------------------------------------------------------------------
void save_cache(const FreqKvCache& cache, const std::filesystem::path& path);
FreqKvCache load_cache(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Reports.  JSON carries the full structure (schema-tagged, keys sorted, so
// a fixed input yields identical bytes); CSV is the plot-ready flat view with
// a "# <schema>" first line.  Volatile fields (wall-clock runtimes) are
// opt-in so artifact comparisons stay byte-stable.
// ---------------------------------------------------------------------------
nlohmann::json to_json(const FlopsBreakdown& flops);
nlohmann::json to_json(const FlopsReport& report);
nlohmann::json to_json(const SpectrumReport& report);
nlohmann::json to_json(const PerturbReport& report);
nlohmann::json to_json(const BenchReport& report, bool include_runtime = false);

// One row per stream length.
std::string flops_csv(const std::vector<FlopsReport>& reports);
// One row per frequency bin per layer and tensor.
std::string spectrum_csv(const SpectrumReport& report);
// One row per layer.
std::string perturb_csv(const PerturbReport& report);
// One row per policy.
std::string bench_csv(const BenchReport& report, bool include_runtime = false);
// One row per compression event.
std::string events_csv(const std::vector<CompressionEvent>& events);

// Reproducibility record for a run: versions, seed, generator name, config
// fingerprint, and the exact model/policy settings.  `timestamp` adds the
// current UTC time; leave it off when artifacts must be byte-comparable.
nlohmann::json run_metadata(const ModelConfig& cfg, const PolicySpec& spec, std::uint64_t seed,
                            bool timestamp);

// Writes text/JSON with a trailing newline; parent directory must exist.
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& value);

}  // namespace freqkv
