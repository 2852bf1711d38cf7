// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>

#include "vtmc/errors.hpp"

namespace vtmc {

using Scalar = double;
using Index = Eigen::Index;

/// Dense row-major matrix. Sequences are stored frames-by-features (T x F).
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Compact storage for cached features; promoted to Matrix before use.
using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

inline void require_shape(const Matrix& m, Index rows, Index cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                         ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Uniform(-limit, limit) fill drawn in row-major order.
inline void fill_uniform(Matrix& m, Scalar limit, Rng& rng) {
  std::uniform_real_distribution<Scalar> dist(-limit, limit);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

inline Matrix random_normal(Index rows, Index cols, Rng& rng, Scalar stddev = 1.0) {
  std::normal_distribution<Scalar> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace vtmc
