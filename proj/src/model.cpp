// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#include "freqkv/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace freqkv {

void ModelConfig::validate() const {
  if (vocab_size < 2) throw std::invalid_argument("model config: vocab_size must be at least 2");
  if (hidden_dim < 1 || n_layers < 1 || ffn_dim < 1)
    throw std::invalid_argument("model config: dimensions must be positive");
  if (n_heads < 1 || n_kv_heads < 1 || n_heads % n_kv_heads != 0)
    throw std::invalid_argument("model config: n_heads must be a positive multiple of n_kv_heads");
  if (head_dim < 2 || head_dim % 2 != 0)
    throw std::invalid_argument("model config: head_dim must be positive and even");
  if (!(rope_base > 0.0)) throw std::invalid_argument("model config: rope_base must be positive");
  if (!(norm_eps > 0.0)) throw std::invalid_argument("model config: norm_eps must be positive");
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::reference_7b() {
  ModelConfig cfg;
  cfg.vocab_size = 32000;
  cfg.hidden_dim = 4096;
  cfg.n_layers = 32;
  cfg.n_heads = 32;
  cfg.n_kv_heads = 32;
  cfg.head_dim = 128;
  cfg.ffn_dim = 11008;
  return cfg;
}

namespace {

// The documented reproducible source: mt19937_64 + Box-Muller.  Uniforms take
// the generator's top 53 bits; u1 is nudged into (0, 1] so the log is finite.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

void fill_gaussian(MatrixF& tensor, GaussianSource& source, double std_dev) {
  for (Index c = 0; c < tensor.cols(); ++c)
    for (Index r = 0; r < tensor.rows(); ++r)
      tensor(r, c) = static_cast<float>(std_dev * source.next());
}

}  // namespace

WeightStore WeightStore::random(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  WeightStore store;
  store.put("tok_embed", MatrixF(cfg.vocab_size, cfg.hidden_dim));
  for (Index i = 0; i < cfg.n_layers; ++i) {
    const std::string prefix = "layers." + std::to_string(i) + ".";
    store.put(prefix + "attn_norm", MatrixF::Ones(1, cfg.hidden_dim));
    store.put(prefix + "wq", MatrixF(cfg.hidden_dim, cfg.q_channels()));
    store.put(prefix + "wk", MatrixF(cfg.hidden_dim, cfg.kv_channels()));
    store.put(prefix + "wv", MatrixF(cfg.hidden_dim, cfg.kv_channels()));
    store.put(prefix + "wo", MatrixF(cfg.q_channels(), cfg.hidden_dim));
    store.put(prefix + "ffn_norm", MatrixF::Ones(1, cfg.hidden_dim));
    store.put(prefix + "w_gate", MatrixF(cfg.hidden_dim, cfg.ffn_dim));
    store.put(prefix + "w_up", MatrixF(cfg.hidden_dim, cfg.ffn_dim));
    store.put(prefix + "w_down", MatrixF(cfg.ffn_dim, cfg.hidden_dim));
  }
  store.put("final_norm", MatrixF::Ones(1, cfg.hidden_dim));
  if (!cfg.tie_output_head) store.put("lm_head", MatrixF(cfg.hidden_dim, cfg.vocab_size));

  GaussianSource source(seed);
  for (auto& [name, tensor] : store.tensors_) {
    if (name.ends_with("norm")) continue;  // gains stay at one, no draws
    const double std_dev =
        name == "tok_embed" ? 1.0 : 1.0 / std::sqrt(static_cast<double>(tensor.rows()));
    fill_gaussian(tensor, source, std_dev);
  }
  return store;
}

const MatrixF& WeightStore::get(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("weight store: no tensor named '" + name + "'");
  return it->second;
}

void WeightStore::put(std::string name, MatrixF tensor) {
  tensors_[std::move(name)] = std::move(tensor);
}

std::int64_t WeightStore::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& [name, tensor] : tensors_) total += tensor.size();
  return total;
}

void WeightStore::validate_against(const ModelConfig& cfg) const {
  cfg.validate();
  const auto expect = [this](const std::string& name, Index rows, Index cols) {
    const MatrixF& t = get(name);  // raises out_of_range when missing
    if (t.rows() != rows || t.cols() != cols)
      throw std::invalid_argument("weight store: tensor '" + name + "' is " +
                                  std::to_string(t.rows()) + "x" + std::to_string(t.cols()) +
                                  ", expected " + std::to_string(rows) + "x" +
                                  std::to_string(cols));
  };
  expect("tok_embed", cfg.vocab_size, cfg.hidden_dim);
  for (Index i = 0; i < cfg.n_layers; ++i) {
    const std::string prefix = "layers." + std::to_string(i) + ".";
    expect(prefix + "attn_norm", 1, cfg.hidden_dim);
    expect(prefix + "wq", cfg.hidden_dim, cfg.q_channels());
    expect(prefix + "wk", cfg.hidden_dim, cfg.kv_channels());
    expect(prefix + "wv", cfg.hidden_dim, cfg.kv_channels());
    expect(prefix + "wo", cfg.q_channels(), cfg.hidden_dim);
    expect(prefix + "ffn_norm", 1, cfg.hidden_dim);
    expect(prefix + "w_gate", cfg.hidden_dim, cfg.ffn_dim);
    expect(prefix + "w_up", cfg.hidden_dim, cfg.ffn_dim);
    expect(prefix + "w_down", cfg.ffn_dim, cfg.hidden_dim);
  }
  expect("final_norm", 1, cfg.hidden_dim);
  if (!cfg.tie_output_head) expect("lm_head", cfg.hidden_dim, cfg.vocab_size);
}

MatrixF rmsnorm(const Eigen::Ref<const MatrixF>& rows, const Eigen::Ref<const MatrixF>& gain,
                double eps) {
  if (gain.rows() != 1 || gain.cols() != rows.cols())
    throw std::invalid_argument("rmsnorm: gain must be [1 x cols]");
  MatrixF out(rows.rows(), rows.cols());
  for (Index r = 0; r < rows.rows(); ++r) {
    const double mean_sq = rows.row(r).cast<double>().squaredNorm() / rows.cols();
    const float inv = static_cast<float>(1.0 / std::sqrt(mean_sq + eps));
    out.row(r) = rows.row(r).cwiseProduct(gain.row(0)) * inv;
  }
  return out;
}

MatrixF silu(const Eigen::Ref<const MatrixF>& x) {
  return x.array() / (1.0f + (-x.array()).exp());
}

}  // namespace freqkv
