// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#include "freqkv/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "freqkv/version.hpp"

namespace freqkv {
namespace {

// ----- byte-level plumbing (explicit little-endian, platform-agnostic) -----

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_i64(std::string& out, std::int64_t v) {
  const auto u = static_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

void put_f64(std::string& out, double v) { put_i64(out, std::bit_cast<std::int64_t>(v)); }

// Bounds-checked reader over an in-memory file image; any overrun is the
// file-specific truncation error.
struct Cursor {
  const std::string& data;
  std::size_t at = 0;
  const char* truncated_message;

  void need(std::size_t bytes) const {
    if (at + bytes > data.size()) throw std::runtime_error(truncated_message);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[at + i])) << (8 * i);
    }
    at += 4;
    return v;
  }
  std::int64_t i64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[at + i])) << (8 * i);
    }
    at += 8;
    return static_cast<std::int64_t>(v);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(i64()); }
  std::string bytes(std::size_t count) {
    need(count);
    std::string v = data.substr(at, count);
    at += count;
    return v;
  }
  bool done() const { return at == data.size(); }
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return std::move(buffer).str();
}

void spill(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void put_matrix(std::string& out, const MatrixF& m) {
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) put_f32(out, m(r, c));
  }
}

MatrixF take_matrix(Cursor& in) {
  const std::uint32_t rows = in.u32();
  const std::uint32_t cols = in.u32();
  in.need(std::size_t{4} * rows * cols);
  MatrixF m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = in.f32();
  }
  return m;
}

// Deterministic shortest-round-trip decimal for CSV cells, reusing the JSON
// serializer so both formats print numbers identically.
std::string fmt(double v) { return nlohmann::json(v).dump(); }

nlohmann::json policy_json(const PolicySpec& spec) {
  return {{"policy", to_string(spec.tag)},
          {"window", spec.cache.window},
          {"sink_tokens", spec.cache.sink_tokens},
          {"gamma", spec.cache.gamma}};
}

}  // namespace

// ----- token streams -------------------------------------------------------

std::vector<std::int32_t> read_tokens(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  std::vector<std::int32_t> tokens;
  if (ext == ".txt") {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    long long value = 0;
    while (in >> value) {
      if (value < 0) throw std::runtime_error("token stream: negative id in " + path.string());
      tokens.push_back(static_cast<std::int32_t>(value));
    }
    if (!in.eof()) throw std::runtime_error("token stream: non-numeric data in " + path.string());
  } else if (ext == ".bin") {
    const std::string raw = slurp(path);
    if (raw.size() % 4 != 0) {
      throw std::runtime_error("token stream: truncated binary file " + path.string());
    }
    Cursor in{raw, 0, "token stream: truncated binary file"};
    tokens.reserve(raw.size() / 4);
    while (!in.done()) {
      const auto value = static_cast<std::int32_t>(in.u32());
      if (value < 0) throw std::runtime_error("token stream: negative id in " + path.string());
      tokens.push_back(value);
    }
  } else {
    throw std::invalid_argument("token stream: unknown extension (want .txt or .bin): " +
                                path.string());
  }
  return tokens;
}

void write_tokens(const std::filesystem::path& path, std::span<const std::int32_t> tokens) {
  const std::string ext = path.extension().string();
  if (ext == ".txt") {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i > 0) out.push_back(' ');
      out += std::to_string(tokens[i]);
    }
    out.push_back('\n');
    spill(path, out);
  } else if (ext == ".bin") {
    std::string out;
    out.reserve(tokens.size() * 4);
    for (const std::int32_t token : tokens) put_u32(out, static_cast<std::uint32_t>(token));
    spill(path, out);
  } else {
    throw std::invalid_argument("token stream: unknown extension (want .txt or .bin): " +
                                path.string());
  }
}

// ----- weight files --------------------------------------------------------

void save_weights(const WeightStore& store, const std::filesystem::path& path) {
  std::string out = "FKVW";
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(store.tensors().size()));
  for (const auto& [name, tensor] : store.tensors()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(tensor.rows()));
    put_u32(out, static_cast<std::uint32_t>(tensor.cols()));
  }
  for (const auto& [name, tensor] : store.tensors()) {
    for (Index r = 0; r < tensor.rows(); ++r) {
      for (Index c = 0; c < tensor.cols(); ++c) put_f32(out, tensor(r, c));
    }
  }
  spill(path, out);
}

WeightStore load_weights(const std::filesystem::path& path) {
  const std::string raw = slurp(path);
  Cursor in{raw, 0, "weights file: truncated"};
  if (in.bytes(4) != "FKVW") throw std::runtime_error("weights file: bad magic");
  if (in.u32() != 1) throw std::runtime_error("weights file: unsupported version");

  const std::uint32_t count = in.u32();
  std::vector<std::pair<std::string, std::pair<Index, Index>>> directory;
  directory.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = in.u32();
    std::string name = in.bytes(name_len);
    const Index rows = in.u32();
    const Index cols = in.u32();
    directory.emplace_back(std::move(name), std::pair<Index, Index>{rows, cols});
  }
  WeightStore store;
  for (auto& [name, shape] : directory) {
    in.need(std::size_t{4} * static_cast<std::size_t>(shape.first) *
            static_cast<std::size_t>(shape.second));
    MatrixF tensor(shape.first, shape.second);
    for (Index r = 0; r < shape.first; ++r) {
      for (Index c = 0; c < shape.second; ++c) tensor(r, c) = in.f32();
    }
    store.put(std::move(name), std::move(tensor));
  }
  if (!in.done()) throw std::runtime_error("weights file: trailing bytes");
  return store;
}

// ----- cache snapshots -----------------------------------------------------

void save_cache(const FreqKvCache& cache, const std::filesystem::path& path) {
  const FreqKvCache::State state = cache.to_state();
  std::string out = "FKVC";
  put_u32(out, 1);
  put_i64(out, cache.config().window);
  put_i64(out, cache.config().sink_tokens);
  put_f64(out, cache.config().gamma);
  put_u32(out, static_cast<std::uint32_t>(cache.kind()));
  put_i64(out, cache.kv_heads());
  put_i64(out, cache.head_dim());
  put_i64(out, state.tokens_seen);
  put_i64(out, state.compression_count);
  put_i64(out, state.summary_end);
  for (const MatrixF* m : {&state.sink_k, &state.sink_v, &state.comp_k, &state.comp_v,
                           &state.inc_k, &state.inc_v}) {
    put_matrix(out, *m);
  }
  spill(path, out);
}

FreqKvCache load_cache(const std::filesystem::path& path) {
  const std::string raw = slurp(path);
  Cursor in{raw, 0, "cache file: truncated"};
  if (in.bytes(4) != "FKVC") throw std::runtime_error("cache file: bad magic");
  if (in.u32() != 1) throw std::runtime_error("cache file: unsupported version");

  CachePolicyConfig cfg;
  cfg.window = in.i64();
  cfg.sink_tokens = in.i64();
  cfg.gamma = in.f64();
  const std::uint32_t kind_raw = in.u32();
  if (kind_raw > static_cast<std::uint32_t>(CompressKind::kLowpassUnscaled)) {
    throw std::runtime_error("cache file: unknown compression kind");
  }
  const Index kv_heads = in.i64();
  const Index head_dim = in.i64();

  FreqKvCache::State state;
  state.tokens_seen = in.i64();
  state.compression_count = in.i64();
  state.summary_end = in.i64();
  for (MatrixF* m : {&state.sink_k, &state.sink_v, &state.comp_k, &state.comp_v, &state.inc_k,
                     &state.inc_v}) {
    *m = take_matrix(in);
  }
  if (!in.done()) throw std::runtime_error("cache file: trailing bytes");
  return FreqKvCache::from_state(cfg, kv_heads, head_dim,
                                 static_cast<CompressKind>(kind_raw), std::move(state));
}

// ----- JSON reports --------------------------------------------------------

nlohmann::json to_json(const FlopsBreakdown& flops) {
  return {{"projections", flops.projections}, {"attention", flops.attention},
          {"ffn", flops.ffn},                 {"logits", flops.logits},
          {"compression", flops.compression}, {"total", flops.total()},
          {"compression_fraction", flops.compression_fraction()}};
}

nlohmann::json to_json(const FlopsReport& report) {
  nlohmann::json j = policy_json(report.spec);
  j["schema"] = "freqkv.flops.v1";
  j["cost_model"] =
      "mac=2 flops; attention 4*heads*head_dim per visible row per layer; "
      "compression M*log2(M)+L*log2(L) flops per kv channel per event";
  j["tokens"] = report.tokens;
  j["flops"] = to_json(report.flops);
  j["compression_count"] = report.compression_events;
  j["max_rows"] = report.max_rows;
  return j;
}

nlohmann::json to_json(const SpectrumReport& report) {
  nlohmann::json bands = nlohmann::json::array();
  for (const SpectrumBand& band : report.bands) {
    std::vector<double> bins(band.bins.data(), band.bins.data() + band.bins.size());
    bands.push_back({{"layer", band.layer},
                     {"tensor", std::string(1, band.tensor)},
                     {"low_half_fraction", band.low_half_fraction},
                     {"bins", bins}});
  }
  return {{"schema", "freqkv.spectrum.v1"},
          {"seq_len", report.seq_len},
          {"channels", report.channels},
          {"scale", report.scale == SpectrumScale::kPower ? "power" : "amplitude"},
          {"bands", bands}};
}

nlohmann::json to_json(const PerturbReport& report) {
  nlohmann::json layers = nlohmann::json::array();
  for (const PerturbBand& band : report.layers) {
    layers.push_back({{"layer", band.layer},
                      {"low_k", band.low_k},
                      {"high_k", band.high_k},
                      {"low_v", band.low_v},
                      {"high_v", band.high_v}});
  }
  return {{"schema", "freqkv.perturb.v1"},
          {"seq_len", report.seq_len},
          {"fraction", report.fraction},
          {"band", report.band},
          {"layers", layers}};
}

nlohmann::json to_json(const BenchReport& report, bool include_runtime) {
  nlohmann::json entries = nlohmann::json::array();
  for (const BenchEntry& entry : report.entries) {
    nlohmann::json j = {{"policy", to_string(entry.policy)},
                        {"final_rows", entry.final_rows},
                        {"max_rows", entry.max_rows},
                        {"max_rope_position", entry.max_rope_position},
                        {"compressions", entry.compressions},
                        {"logit_drift", entry.logit_drift},
                        {"model_flops", entry.model_flops},
                        {"divergence_step", entry.divergence_step},
                        {"generated", entry.generated}};
    if (include_runtime) j["runtime_ms"] = entry.runtime_ms;
    entries.push_back(std::move(j));
  }
  return {{"schema", "freqkv.bench.v1"},
          {"tokens", report.tokens},
          {"new_tokens", report.new_tokens},
          {"entries", entries}};
}

// ----- CSV reports ---------------------------------------------------------

std::string flops_csv(const std::vector<FlopsReport>& reports) {
  std::string out =
      "# freqkv.flops.v1\n"
      "tokens,policy,window,sink_tokens,gamma,projections,attention,ffn,logits,"
      "compression,total,compression_fraction,compression_count,max_rows\n";
  for (const FlopsReport& r : reports) {
    out += std::to_string(r.tokens) + ',' + to_string(r.spec.tag) + ',' +
           std::to_string(r.spec.cache.window) + ',' + std::to_string(r.spec.cache.sink_tokens) +
           ',' + fmt(r.spec.cache.gamma) + ',' + fmt(r.flops.projections) + ',' +
           fmt(r.flops.attention) + ',' + fmt(r.flops.ffn) + ',' + fmt(r.flops.logits) + ',' +
           fmt(r.flops.compression) + ',' + fmt(r.flops.total()) + ',' +
           fmt(r.flops.compression_fraction()) + ',' + std::to_string(r.compression_events) +
           ',' + std::to_string(r.max_rows) + '\n';
  }
  return out;
}

std::string spectrum_csv(const SpectrumReport& report) {
  std::string out =
      "# freqkv.spectrum.v1\n"
      "layer,tensor,bin,value\n";
  for (const SpectrumBand& band : report.bands) {
    for (Index bin = 0; bin < band.bins.size(); ++bin) {
      out += std::to_string(band.layer) + ',' + band.tensor + ',' + std::to_string(bin) + ',' +
             fmt(band.bins[bin]) + '\n';
    }
  }
  return out;
}

std::string perturb_csv(const PerturbReport& report) {
  std::string out =
      "# freqkv.perturb.v1\n"
      "layer,low_k,high_k,low_v,high_v\n";
  for (const PerturbBand& band : report.layers) {
    out += std::to_string(band.layer) + ',' + fmt(band.low_k) + ',' + fmt(band.high_k) + ',' +
           fmt(band.low_v) + ',' + fmt(band.high_v) + '\n';
  }
  return out;
}

std::string bench_csv(const BenchReport& report, bool include_runtime) {
  std::string out = "# freqkv.bench.v1\n";
  out +=
      "policy,final_rows,max_rows,max_rope_position,compressions,logit_drift,"
      "model_flops,divergence_step";
  if (include_runtime) out += ",runtime_ms";
  out += '\n';
  for (const BenchEntry& entry : report.entries) {
    out += to_string(entry.policy) + ',' + std::to_string(entry.final_rows) + ',' +
           std::to_string(entry.max_rows) + ',' + std::to_string(entry.max_rope_position) + ',' +
           std::to_string(entry.compressions) + ',' + fmt(entry.logit_drift) + ',' +
           fmt(entry.model_flops) + ',' + std::to_string(entry.divergence_step);
    if (include_runtime) out += ',' + fmt(entry.runtime_ms);
    out += '\n';
  }
  return out;
}

std::string events_csv(const std::vector<CompressionEvent>& events) {
  std::string out =
      "# freqkv.events.v1\n"
      "step,sinks,summary,recent,generation\n";
  for (const CompressionEvent& event : events) {
    out += std::to_string(event.tokens_seen) + ',' + std::to_string(event.sink_rows) + ',' +
           std::to_string(event.compressed_rows) + ',' + std::to_string(event.incoming_rows) +
           ',' + std::to_string(event.generation) + '\n';
  }
  return out;
}

// ----- metadata ------------------------------------------------------------

nlohmann::json run_metadata(const ModelConfig& cfg, const PolicySpec& spec, std::uint64_t seed,
                            bool timestamp) {
  nlohmann::json model = {{"vocab_size", cfg.vocab_size},
                          {"hidden_dim", cfg.hidden_dim},
                          {"n_layers", cfg.n_layers},
                          {"n_heads", cfg.n_heads},
                          {"n_kv_heads", cfg.n_kv_heads},
                          {"head_dim", cfg.head_dim},
                          {"ffn_dim", cfg.ffn_dim},
                          {"rope_base", cfg.rope_base},
                          {"norm_eps", cfg.norm_eps},
                          {"tie_output_head", cfg.tie_output_head}};
  nlohmann::json j = {{"schema", "freqkv.meta.v1"},
                      {"version", std::string(kVersion)},
                      {"prng", std::string(kPrngName)},
                      {"seed", seed},
                      {"model", model},
                      {"policy", policy_json(spec)}};
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(model.dump() + policy_json(spec).dump())));
  j["config_hash"] = hash;
  if (timestamp) {
    const std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
    j["generated_at"] = stamp;
  }
  return j;
}

// ----- generic writers -----------------------------------------------------

void write_text(const std::filesystem::path& path, const std::string& text) {
  spill(path, text);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
  spill(path, value.dump(2) + "\n");
}

}  // namespace freqkv
