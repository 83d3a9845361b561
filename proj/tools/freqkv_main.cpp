// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: configure a model and cache policy, run decodes,
// and emit the analysis artifacts (JSON/CSV) documented in the README.
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "freqkv/analysis.hpp"
#include "freqkv/engine.hpp"
#include "freqkv/io.hpp"
#include "freqkv/version.hpp"

namespace fs = std::filesystem;
using namespace freqkv;

namespace {

// Thrown for errors that are the caller's fault (contradictory flags,
// impossible requests); mapped to exit code 2 like CLI11 parse errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string preset = "desk";
  std::string model_config;
  std::string weights_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string policy = "freqkv";
  Index window = 256;
  bool window_given = false;
  Index sinks = 4;
  double gamma = 0.5;
  std::string out_dir = ".";
  bool no_timestamp = false;
};

// Attaches the flag set shared by every subcommand.  `engine` commands run
// the transformer, so they also need a weight source.
void add_common(CLI::App* cmd, CommonOptions& opt, bool engine) {
  cmd->set_config("--config", "", "Read options from a key=value config file");
  cmd->add_option("--preset", opt.preset, "Model preset: desk or 7b")
      ->check(CLI::IsMember({"desk", "7b"}))
      ->capture_default_str();
  cmd->add_option("--model-config", opt.model_config,
                  "JSON model config file (overrides --preset)");
  cmd->add_option("--policy", opt.policy,
                  "Cache policy: full, dropping, freqkv, highfreq, norescale, postrope")
      ->capture_default_str();
  cmd->add_option("--window", opt.window, "Cache row budget N (7b preset defaults to 4096)")
      ->capture_default_str();
  cmd->add_option("--sinks", opt.sinks, "Pinned sink tokens S")->capture_default_str();
  cmd->add_option("--gamma", opt.gamma, "Retained fraction of the non-sink window")
      ->capture_default_str();
  cmd->add_option("--out-dir", opt.out_dir, "Artifact directory")
      ->envname("FREQKV_OUT_DIR")
      ->capture_default_str();
  cmd->add_flag("--no-timestamp", opt.no_timestamp,
                "Omit wall-clock fields so reruns are byte-identical");
  if (engine) {
    auto* weights = cmd->add_option("--weights", opt.weights_path, "Weight file (FKVW)");
    auto* seed = cmd->add_option("--seed", opt.seed, "Deterministic random-init seed");
    seed->excludes(weights);
  }
  cmd->callback([&opt, cmd, engine] {
    opt.window_given = cmd->count("--window") > 0;
    if (engine) opt.seed_given = cmd->count("--seed") > 0;
  });
}

ModelConfig resolve_model(const CommonOptions& opt, bool engine) {
  ModelConfig cfg;
  if (!opt.model_config.empty()) {
    std::ifstream in(opt.model_config);
    if (!in) throw std::runtime_error("cannot open model config: " + opt.model_config);
    nlohmann::json j = nlohmann::json::parse(in);
    cfg = ModelConfig::desk();  // absent keys keep desk-scale defaults
    cfg.vocab_size = j.value("vocab_size", cfg.vocab_size);
    cfg.hidden_dim = j.value("hidden_dim", cfg.hidden_dim);
    cfg.n_layers = j.value("n_layers", cfg.n_layers);
    cfg.n_heads = j.value("n_heads", cfg.n_heads);
    cfg.n_kv_heads = j.value("n_kv_heads", cfg.n_kv_heads);
    cfg.head_dim = j.value("head_dim", cfg.head_dim);
    cfg.ffn_dim = j.value("ffn_dim", cfg.ffn_dim);
    cfg.rope_base = j.value("rope_base", cfg.rope_base);
    cfg.norm_eps = j.value("norm_eps", cfg.norm_eps);
    cfg.tie_output_head = j.value("tie_output_head", cfg.tie_output_head);
  } else if (opt.preset == "desk") {
    cfg = ModelConfig::desk();
  } else {
    if (engine) {
      throw UsageError("the 7b preset is for the analytic flops model only; "
                       "engine commands need a desk-scale model");
    }
    cfg = ModelConfig::reference_7b();
  }
  cfg.validate();
  return cfg;
}

PolicySpec resolve_policy(const CommonOptions& opt) {
  PolicySpec spec;
  spec.tag = parse_policy(opt.policy);
  Index window = opt.window;
  // The 7b preset mirrors the reference deployment, which compresses at 4096
  // rows; an explicit --window (flag or config file) still wins.
  if (!opt.window_given && opt.model_config.empty() && opt.preset == "7b") window = 4096;
  spec.cache = CachePolicyConfig{window, opt.sinks, opt.gamma};
  return spec;
}

WeightStore resolve_weights(const CommonOptions& opt, const ModelConfig& cfg) {
  if (!opt.weights_path.empty()) {
    WeightStore store = load_weights(opt.weights_path);
    store.validate_against(cfg);
    return store;
  }
  if (!opt.seed_given) {
    throw UsageError("need a weight source: pass --weights FILE or --seed N");
  }
  return WeightStore::random(cfg, opt.seed);
}

fs::path artifact_dir(const CommonOptions& opt) {
  fs::create_directories(opt.out_dir);
  return opt.out_dir;
}

std::vector<std::int32_t> load_stream(const std::string& path, Index take) {
  std::vector<std::int32_t> tokens = read_tokens(path);
  if (tokens.empty()) throw std::runtime_error("token stream is empty: " + path);
  if (take > 0 && static_cast<std::size_t>(take) < tokens.size()) {
    tokens.resize(static_cast<std::size_t>(take));
  }
  return tokens;
}

nlohmann::json meta_for(const CommonOptions& opt, const ModelConfig& cfg,
                        const PolicySpec& spec) {
  nlohmann::json meta = run_metadata(cfg, spec, opt.seed, !opt.no_timestamp);
  if (!opt.weights_path.empty()) meta["weights_file"] = opt.weights_path;
  return meta;
}

// ----- subcommand bodies ---------------------------------------------------

int cmd_decode(const CommonOptions& opt, const std::string& tokens_path, Index take,
               Index max_new) {
  const ModelConfig cfg = resolve_model(opt, true);
  const PolicySpec spec = resolve_policy(opt);
  const WeightStore weights = resolve_weights(opt, cfg);
  const std::vector<std::int32_t> prompt = load_stream(tokens_path, take);

  DecodeSession session(cfg, weights, spec);
  std::vector<std::int32_t> generated;
  if (max_new > 0) {
    generated = session.generate(prompt, max_new);
  } else {
    session.prefill(prompt);
  }

  const fs::path dir = artifact_dir(opt);
  write_tokens(dir / "decode_tokens.txt", generated);
  write_text(dir / "decode_events.csv", events_csv(session.events()));
  nlohmann::json meta = meta_for(opt, cfg, spec);
  meta["run"] = {{"prompt_tokens", static_cast<std::int64_t>(prompt.size())},
                 {"generated_tokens", static_cast<std::int64_t>(generated.size())},
                 {"tokens_seen", session.tokens_seen()},
                 {"compressions", session.layer_cache(0).compression_count()},
                 {"max_cache_rows", session.max_cache_rows()},
                 {"max_rope_position", session.max_rope_position()}};
  write_json(dir / "decode_meta.json", meta);

  for (std::size_t i = 0; i < generated.size(); ++i) {
    std::cout << (i > 0 ? " " : "") << generated[i];
  }
  if (!generated.empty()) std::cout << '\n';
  return 0;
}

int cmd_spectrum(const CommonOptions& opt, const std::vector<std::string>& token_paths,
                 Index take, const std::string& scale_name) {
  const ModelConfig cfg = resolve_model(opt, true);
  // Spectra always run the full policy: the signal under analysis is the
  // uncompressed stream, whatever policy the shared flags name.
  const PolicySpec spec{PolicyTag::kFull, CachePolicyConfig{opt.window, opt.sinks, opt.gamma}};
  const WeightStore weights = resolve_weights(opt, cfg);
  std::vector<std::vector<std::int32_t>> streams;
  for (const std::string& path : token_paths) streams.push_back(load_stream(path, take));

  const SpectrumScale scale =
      scale_name == "amplitude" ? SpectrumScale::kAmplitude : SpectrumScale::kPower;
  const SpectrumReport report = spectrum_report(cfg, weights, streams, scale);

  const fs::path dir = artifact_dir(opt);
  nlohmann::json j = to_json(report);
  j["meta"] = meta_for(opt, cfg, spec);
  write_json(dir / "spectrum.json", j);
  write_text(dir / "spectrum.csv", spectrum_csv(report));
  std::cout << "spectrum: " << report.bands.size() << " bands over " << report.seq_len
            << " positions\n";
  return 0;
}

int cmd_perturb(const CommonOptions& opt, const std::vector<std::string>& token_paths,
                Index take, double fraction, double band, std::uint64_t perturb_seed) {
  const ModelConfig cfg = resolve_model(opt, true);
  const PolicySpec spec{PolicyTag::kFull, CachePolicyConfig{opt.window, opt.sinks, opt.gamma}};
  const WeightStore weights = resolve_weights(opt, cfg);
  std::vector<std::vector<std::int32_t>> streams;
  for (const std::string& path : token_paths) streams.push_back(load_stream(path, take));

  const PerturbReport report =
      perturb_report(cfg, weights, streams, fraction, band, perturb_seed);

  const fs::path dir = artifact_dir(opt);
  nlohmann::json j = to_json(report);
  j["meta"] = meta_for(opt, cfg, spec);
  j["perturb_seed"] = perturb_seed;
  write_json(dir / "perturb.json", j);
  write_text(dir / "perturb.csv", perturb_csv(report));
  std::cout << "perturb: " << report.layers.size() << " layers, fraction " << fraction << '\n';
  return 0;
}

int cmd_flops(const CommonOptions& opt, const std::vector<std::int64_t>& lengths) {
  const ModelConfig cfg = resolve_model(opt, false);
  const PolicySpec spec = resolve_policy(opt);

  std::vector<FlopsReport> reports;
  nlohmann::json runs = nlohmann::json::array();
  for (const std::int64_t tokens : lengths) {
    reports.push_back(flops_report(cfg, spec, tokens));
    runs.push_back(to_json(reports.back()));
  }

  const fs::path dir = artifact_dir(opt);
  nlohmann::json j = {{"schema", "freqkv.flops_sweep.v1"}, {"runs", runs}};
  j["meta"] = meta_for(opt, cfg, spec);
  write_json(dir / "flops.json", j);
  write_text(dir / "flops.csv", flops_csv(reports));
  for (const FlopsReport& r : reports) {
    std::cout << "tokens " << r.tokens << ": compressions " << r.compression_events
              << ", overhead " << r.flops.compression_fraction() << '\n';
  }
  return 0;
}

int cmd_bench(const CommonOptions& opt, const std::vector<std::string>& policy_names,
              const std::string& tokens_path, Index take, Index max_new, bool runtime) {
  if (policy_names.size() < 2) {
    throw UsageError("bench compares policies; list at least two via --policies");
  }
  const ModelConfig cfg = resolve_model(opt, true);
  const WeightStore weights = resolve_weights(opt, cfg);
  const CachePolicyConfig cache{opt.window, opt.sinks, opt.gamma};
  std::vector<PolicyTag> tags;
  for (const std::string& name : policy_names) tags.push_back(parse_policy(name));
  const std::vector<std::int32_t> prompt = load_stream(tokens_path, take);

  const BenchReport report = bench_report(cfg, weights, cache, tags, prompt, max_new);

  const fs::path dir = artifact_dir(opt);
  nlohmann::json j = to_json(report, runtime);
  PolicySpec meta_spec;
  meta_spec.tag = tags.front();
  meta_spec.cache = cache;
  j["meta"] = meta_for(opt, cfg, meta_spec);
  write_json(dir / "bench.json", j);
  write_text(dir / "bench.csv", bench_csv(report, runtime));
  for (const BenchEntry& entry : report.entries) {
    std::cout << to_string(entry.policy) << ": max_rows " << entry.max_rows << ", compressions "
              << entry.compressions << ", divergence " << entry.divergence_step << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FreqKV: frequency-domain KV cache compression workbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  CommonOptions opt;

  auto* decode = app.add_subcommand("decode", "Prefill a stream and greedy-decode");
  add_common(decode, opt, true);
  std::string decode_tokens;
  Index decode_take = 0;
  Index decode_max_new = 0;
  decode->add_option("--tokens", decode_tokens, "Prompt token stream (.txt or .bin)")
      ->required();
  decode->add_option("--take", decode_take, "Use only the first N prompt tokens (0 = all)");
  decode->add_option("--max-new", decode_max_new, "Greedy continuation length");

  auto* spectrum = app.add_subcommand("spectrum", "Per-layer K/V frequency spectra");
  add_common(spectrum, opt, true);
  std::vector<std::string> spectrum_tokens;
  Index spectrum_take = 0;
  std::string spectrum_scale = "power";
  spectrum->add_option("--tokens", spectrum_tokens, "Token stream file(s)")->required();
  spectrum->add_option("--take", spectrum_take, "Truncate each stream to N tokens (0 = all)");
  spectrum->add_option("--scale", spectrum_scale, "Bin convention: power or amplitude")
      ->check(CLI::IsMember({"power", "amplitude"}))
      ->capture_default_str();

  auto* perturb = app.add_subcommand("perturb", "Band sensitivity to token perturbations");
  add_common(perturb, opt, true);
  std::vector<std::string> perturb_tokens_paths;
  Index perturb_take = 0;
  double perturb_fraction = 0.01;
  double perturb_band = 0.5;
  std::uint64_t perturb_seed = 0;
  perturb->add_option("--tokens", perturb_tokens_paths, "Token stream file(s)")->required();
  perturb->add_option("--take", perturb_take, "Truncate each stream to N tokens (0 = all)");
  perturb->add_option("--fraction", perturb_fraction, "Fraction of tokens to replace")
      ->capture_default_str();
  perturb->add_option("--band", perturb_band, "Low-band cutoff as a fraction of bins")
      ->capture_default_str();
  perturb->add_option("--perturb-seed", perturb_seed, "Seed for the token replacements")
      ->capture_default_str();

  auto* flops = app.add_subcommand("flops", "Analytic decode-cost model");
  add_common(flops, opt, false);
  std::vector<std::int64_t> flops_lengths = {4096, 8192, 12288, 16384, 32768};
  flops->add_option("--lengths", flops_lengths, "Stream lengths to evaluate")
      ->capture_default_str();

  auto* bench = app.add_subcommand("bench", "Contrast policies on one stream");
  add_common(bench, opt, true);
  std::vector<std::string> bench_policies;
  std::string bench_tokens;
  Index bench_take = 0;
  Index bench_max_new = 32;
  bool bench_runtime = false;
  bench->add_option("--policies", bench_policies, "Two or more policies to compare")
      ->required();
  bench->add_option("--tokens", bench_tokens, "Prompt token stream")->required();
  bench->add_option("--take", bench_take, "Use only the first N prompt tokens (0 = all)");
  bench->add_option("--max-new", bench_max_new, "Greedy continuation length")
      ->capture_default_str();
  bench->add_flag("--runtime", bench_runtime,
                  "Include wall-clock runtimes (volatile; off for byte-stable artifacts)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message; exit code below follows this tool's contract
    return 2;
  }

  try {
    if (decode->parsed()) return cmd_decode(opt, decode_tokens, decode_take, decode_max_new);
    if (spectrum->parsed()) {
      return cmd_spectrum(opt, spectrum_tokens, spectrum_take, spectrum_scale);
    }
    if (perturb->parsed()) {
      return cmd_perturb(opt, perturb_tokens_paths, perturb_take, perturb_fraction,
                         perturb_band, perturb_seed);
    }
    if (flops->parsed()) return cmd_flops(opt, flops_lengths);
    if (bench->parsed()) {
      return cmd_bench(opt, bench_policies, bench_tokens, bench_take, bench_max_new,
                       bench_runtime);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
