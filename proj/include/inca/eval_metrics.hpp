#pragma once

#include <set>
#include <span>
#include <string>
#include <vector>

namespace inca::eval_metrics {

// One fault: the predicted ranking and the true root-cause set.
struct FaultOutcome {
  std::vector<std::string> ranking;
  std::set<std::string> truth;
};

// Mean over faults of (hits in the top k) / min(k, |truth|).
double pr_at_k(std::span<const FaultOutcome> faults, std::size_t k);
// (1 / k) * sum_{j=1..k} PR@j.
double map_at_k(std::span<const FaultOutcome> faults, std::size_t k);
// Mean reciprocal 1-based rank of the first hit; a fault without any hit adds 0.
double mrr(std::span<const FaultOutcome> faults);

}  // namespace inca::eval_metrics
