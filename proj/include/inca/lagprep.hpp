#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "inca/core/matrix.hpp"
#include "inca/core/types.hpp"

namespace inca::lagprep {

struct ColumnScale {
  double mean = 0.0;
  double stdev = 1.0;
};

struct Standardized {
  MetricPanel panel;
  std::vector<ColumnScale> scales;
};

// Column-wise z-scores with the population stdev. Constant columns become
// zeros and record stdev 1. Throws TooShort for fewer than two rows.
Standardized standardize(const MetricPanel& panel);
std::vector<double> standardize_series(std::span<const double> series, ColumnScale* scale = nullptr);

// Lagged design of a VAR(p): row r of `targets` is x_{p+r}; row r of `lagged`
// is [x_{p+r-1} | x_{p+r-2} | ... | x_{r}].
struct LagTensor {
  Matrix targets;  // m x d
  Matrix lagged;   // m x (p*d)
  std::size_t p = 0;

  std::size_t m() const noexcept { return targets.rows(); }
  std::size_t d() const noexcept { return targets.cols(); }
  double lag_value(std::size_t row, std::size_t lag, std::size_t entity) const {
    return lagged(row, (lag - 1) * d() + entity);
  }
};

LagTensor build_lag_embedding(const Matrix& series, std::size_t p);
inline LagTensor build_lag_embedding(const MetricPanel& panel, std::size_t p) {
  return build_lag_embedding(panel.values, p);
}

}  // namespace inca::lagprep
