#include "inca/lagprep.hpp"

#include <cmath>
#include <string>

#include "inca/core/error.hpp"

namespace inca::lagprep {

std::vector<double> standardize_series(std::span<const double> series, ColumnScale* scale) {
  const std::size_t n = series.size();
  if (n < 2) fail(ErrorCode::TooShort, "standardize needs at least 2 points, got " + std::to_string(n));
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  double sd = std::sqrt(var);

  std::vector<double> out(n, 0.0);
  // Treat relative round-off as constant.
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
    sd = 1.0;
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = (series[i] - mean) / sd;
  }
  if (scale != nullptr) *scale = {mean, sd};
  return out;
}

Standardized standardize(const MetricPanel& panel) {
  if (panel.steps() < 2)
    fail(ErrorCode::TooShort, "panel '" + panel.metric_name + "' has fewer than 2 time points");
  Standardized s{panel, std::vector<ColumnScale>(panel.width())};
  for (std::size_t j = 0; j < panel.width(); ++j) {
    auto col = standardize_series(panel.column(j), &s.scales[j]);
    for (std::size_t r = 0; r < panel.steps(); ++r) s.panel.values(r, j) = col[r];
  }
  return s;
}

LagTensor build_lag_embedding(const Matrix& series, std::size_t p) {
  if (p == 0) fail(ErrorCode::InvalidArgument, "lag order must be >= 1");
  const std::size_t steps = series.rows();
  const std::size_t d = series.cols();
  if (steps <= p)
    fail(ErrorCode::LagTooLarge, "lag " + std::to_string(p) + " leaves no samples from " +
                                     std::to_string(steps) + " time points");
  const std::size_t m = steps - p;
  LagTensor lag{Matrix(m, d), Matrix(m, p * d), p};
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t t = p + r;
    for (std::size_t j = 0; j < d; ++j) lag.targets(r, j) = series(t, j);
    for (std::size_t k = 1; k <= p; ++k)
      for (std::size_t j = 0; j < d; ++j) lag.lagged(r, (k - 1) * d + j) = series(t - k, j);
  }
  return lag;
}

}  // namespace inca::lagprep
