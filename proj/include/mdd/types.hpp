// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdd/errors.hpp"

namespace mdd {

// Discrete diffusion state: a sequence of code ids. Ids are 0-based; the
// absorbing mask token is the extra id `codebook_size` (the (K+1)-th
// category).
struct TokenSequence {
  std::vector<int> tokens;
  int codebook_size = 0;  // K

  int mask_id() const { return codebook_size; }
  int length() const { return static_cast<int>(tokens.size()); }

  bool has_mask() const {
    for (int t : tokens)
      if (t == codebook_size) return true;
    return false;
  }

  void validate() const {
    if (tokens.empty()) throw DataError("TokenSequence: empty sequence");
    if (codebook_size < 1) throw DataError("TokenSequence: codebook_size < 1");
    for (size_t i = 0; i < tokens.size(); ++i)
      if (tokens[i] < 0 || tokens[i] > codebook_size)
        throw DataError("TokenSequence: token out of range at position " + std::to_string(i));
  }

  static TokenSequence full_mask(int length, int codebook_size) {
    TokenSequence u;
    u.codebook_size = codebook_size;
    u.tokens.assign(static_cast<size_t>(length), codebook_size);
    return u;
  }

  bool operator==(const TokenSequence& o) const {
    return codebook_size == o.codebook_size && tokens == o.tokens;
  }
};

// Per-position categorical distributions: one row-stochastic row per
// sequence position. Column count is K+1 when the mask category is in play
// and K for clean-token distributions.
struct CategoricalState {
  Eigen::MatrixXd probs;

  int length() const { return static_cast<int>(probs.rows()); }
  int categories() const { return static_cast<int>(probs.cols()); }

  void validate(double tol = 1e-9) const {
    if (probs.rows() < 1 || probs.cols() < 1) throw DataError("CategoricalState: empty");
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      if ((probs.row(i).array() < 0.0).any())
        throw DataError("CategoricalState: negative probability in row " + std::to_string(i));
      if (std::abs(probs.row(i).sum() - 1.0) > tol)
        throw DataError("CategoricalState: row " + std::to_string(i) + " does not sum to 1");
    }
  }
};

}  // namespace mdd
