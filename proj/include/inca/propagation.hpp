#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "inca/core/matrix.hpp"
#include "inca/core/types.hpp"

namespace inca::propagation {

struct PropagationConfig {
  double phi = 0.5;      // probability of jumping between levels
  double varphi = 0.15;  // restart probability
  double tol = 1e-10;    // L1 change between iterates
  std::size_t max_iters = 10000;

  void validate() const;
};

// Walk over the transposed causal structure, nodes ordered
// [high-level 0..g-1 | low-level 0..n_low-1]. Rows with no outgoing
// transition are all-zero and flagged dangling.
struct TransitionMatrix {
  Matrix h;
  double phi = 0.5;
  std::size_t g = 0;
  std::size_t n_low = 0;
  std::vector<bool> dangling;

  std::size_t size() const noexcept { return h.rows(); }
};

struct Transition {
  TransitionMatrix matrix;
  std::vector<double> restart;  // mass on high-level nodes proportional to w_kpi
};

// Row-normalized transitions: a node splits its mass (1 - phi) within its
// level and phi across levels; if one side has no edges the other side takes
// all of it. Throws EmptyGraph when every weight is zero.
Transition build_transition(const InterdependentCausalGraph& graph, double phi);

struct RwrResult {
  std::vector<double> p;
  std::size_t iterations = 0;
};

// Iterates p <- (1 - varphi) * p H + varphi * r until the L1 change is below
// tol. Mass reaching a dangling node returns through the restart
// distribution, so the fixed point solves a linear system and sums to one.
// Throws NoConvergence after max_iters.
RwrResult rwr(const TransitionMatrix& transition, std::span<const double> restart,
              const PropagationConfig& cfg);

// Min-max normalized stationary mass of each low-level node (index order);
// a constant slice maps to 0.5 everywhere.
std::vector<double> topological_scores(const InterdependentCausalGraph& graph,
                                       const PropagationConfig& cfg);

std::vector<double> min_max_normalize(std::span<const double> v);

}  // namespace inca::propagation
