// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "freqkv/types.hpp"

namespace freqkv {

// Precomputed rotary position embedding.  Channel pair (2j, 2j+1) of every
// head turns by angle position / base^(2j / head_dim); tables are built in
// double and stored in single precision.  Position 0 is exactly the identity.
class RopeTable {
 public:
  RopeTable(Index head_dim, Index max_positions, double base = 10000.0);

  Index head_dim() const { return head_dim_; }
  Index max_positions() const { return max_positions_; }
  double base() const { return base_; }

  // Rotates every head slice of `block` ([rows x n_heads*head_dim]); row r
  // uses position first_position + r.  Throws std::out_of_range when any
  // requested position falls outside the table.
  MatrixF rotate(const Eigen::Ref<const MatrixF>& block, Index first_position) const;

 private:
  Index head_dim_;
  Index max_positions_;
  double base_;
  MatrixF cos_;  // [max_positions x head_dim/2]
  MatrixF sin_;
};

}  // namespace freqkv
