#include "inca/eval_metrics.hpp"

#include <algorithm>

#include "inca/core/error.hpp"

namespace inca::eval_metrics {

namespace {

void check(std::span<const FaultOutcome> faults) {
  if (faults.empty()) fail(ErrorCode::EmptyTruth, "no faults to evaluate");
  for (const auto& f : faults)
    if (f.truth.empty()) fail(ErrorCode::EmptyTruth, "fault with an empty root-cause set");
}

}  // namespace

double pr_at_k(std::span<const FaultOutcome> faults, std::size_t k) {
  check(faults);
  double total = 0.0;
  for (const auto& f : faults) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < std::min(k, f.ranking.size()); ++i) hits += f.truth.contains(f.ranking[i]);
    total += static_cast<double>(hits) / static_cast<double>(std::min(k, f.truth.size()));
  }
  return total / static_cast<double>(faults.size());
}

double map_at_k(std::span<const FaultOutcome> faults, std::size_t k) {
  check(faults);
  if (k == 0) fail(ErrorCode::InvalidArgument, "MAP@K needs K >= 1");
  double total = 0.0;
  for (std::size_t j = 1; j <= k; ++j) total += pr_at_k(faults, j);
  return total / static_cast<double>(k);
}

double mrr(std::span<const FaultOutcome> faults) {
  check(faults);
  double total = 0.0;
  for (const auto& f : faults) {
    for (std::size_t i = 0; i < f.ranking.size(); ++i)
      if (f.truth.contains(f.ranking[i])) {
        total += 1.0 / static_cast<double>(i + 1);
        break;
      }
  }
  return total / static_cast<double>(faults.size());
}

}  // namespace inca::eval_metrics
