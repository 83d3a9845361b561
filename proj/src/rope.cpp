// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#include "freqkv/rope.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace freqkv {

RopeTable::RopeTable(Index head_dim, Index max_positions, double base)
    : head_dim_(head_dim), max_positions_(max_positions), base_(base) {
  if (head_dim_ < 2 || head_dim_ % 2 != 0)
    throw std::invalid_argument("rope: head_dim must be a positive even number");
  if (max_positions_ < 1) throw std::invalid_argument("rope: max_positions must be positive");
  if (!(base_ > 0.0)) throw std::invalid_argument("rope: base must be positive");

  const Index pairs = head_dim_ / 2;
  cos_.resize(max_positions_, pairs);
  sin_.resize(max_positions_, pairs);
  for (Index j = 0; j < pairs; ++j) {
    const double inv_freq = std::pow(base_, -2.0 * static_cast<double>(j) / head_dim_);
    for (Index p = 0; p < max_positions_; ++p) {
      const double angle = static_cast<double>(p) * inv_freq;
      cos_(p, j) = static_cast<float>(std::cos(angle));
      sin_(p, j) = static_cast<float>(std::sin(angle));
    }
  }
}

MatrixF RopeTable::rotate(const Eigen::Ref<const MatrixF>& block, Index first_position) const {
  if (block.cols() % head_dim_ != 0)
    throw std::invalid_argument("rope: block width " + std::to_string(block.cols()) +
                                " is not a multiple of head_dim " + std::to_string(head_dim_));
  if (first_position < 0 || first_position + block.rows() > max_positions_)
    throw std::out_of_range("rope: positions [" + std::to_string(first_position) + ", " +
                            std::to_string(first_position + block.rows()) +
                            ") exceed the table of " + std::to_string(max_positions_));

  const Index heads = block.cols() / head_dim_;
  const Index pairs = head_dim_ / 2;
  MatrixF out(block.rows(), block.cols());
  for (Index r = 0; r < block.rows(); ++r) {
    const Index p = first_position + r;
    for (Index h = 0; h < heads; ++h) {
      const Index off = h * head_dim_;
      for (Index j = 0; j < pairs; ++j) {
        const float x = block(r, off + 2 * j);
        const float y = block(r, off + 2 * j + 1);
        const float c = cos_(p, j);
        const float s = sin_(p, j);
        out(r, off + 2 * j) = x * c - y * s;
        out(r, off + 2 * j + 1) = x * s + y * c;
      }
    }
  }
  return out;
}

}  // namespace freqkv
