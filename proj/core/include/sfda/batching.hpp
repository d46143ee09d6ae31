// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <random>
#include <vector>

#include "sfda/nn.hpp"
#include "sfda/rng.hpp"

namespace sfda {

// Draws indices from [0, n) in uniformly shuffled epochs.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    reshuffle();
  }

  std::vector<std::size_t> next(std::size_t count) {
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count && !order_.empty()) {
      if (pos_ == order_.size()) reshuffle();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    for (std::size_t i = order_.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order_[i - 1], order_[pick(rng_)]);
    }
    pos_ = 0;
  }

  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  Rng rng_;
};

inline Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = m.row(static_cast<Eigen::Index>(idx[k]));
  }
  return out;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t k : idx) out.push_back(v[k]);
  return out;
}

// Backbone outputs computed in chunks to bound trace-free memory use.
inline Matrix backbone_features(const Backbone& backbone, const Matrix& inputs) {
  Matrix out(inputs.rows(), backbone.output_dim());
  constexpr Eigen::Index kChunk = 256;
  for (Eigen::Index start = 0; start < inputs.rows(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, inputs.rows() - start);
    out.middleRows(start, len) = backbone.forward(inputs.middleRows(start, len));
  }
  return out;
}

}  // namespace sfda
