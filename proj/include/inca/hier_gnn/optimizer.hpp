#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace inca::hier_gnn {

// Objective callback: returns f(x) and writes the gradient into `grad`.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct Bounds {
  std::vector<double> lower;  // -inf for unbounded
  std::vector<double> upper;  // +inf for unbounded
};

struct OptimizerOptions {
  std::size_t max_iters = 2000;
  double grad_tol = 1e-6;  // on the projected gradient, infinity norm
  double ftol = 2.2e-9;    // relative reduction of f between iterations
  std::size_t memory = 10;
  double adam_step = 1e-2;
};

struct OptimizerResult {
  std::vector<double> x;
  double f = 0.0;
  double projected_grad_norm = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::vector<double> trace;  // f after every accepted step, starting with f(x0)
};

// Limited-memory BFGS on a box: the two-loop direction is restricted to the
// free variables and the step follows the projected path with an Armijo
// backtracking search, so every accepted step lowers f.
OptimizerResult minimize_lbfgs_box(const Objective& fn, std::vector<double> x0, const Bounds& bounds,
                                   const OptimizerOptions& opts);

// Projected Adam with step rejection: a step that raises f is undone and the
// learning rate halved.
OptimizerResult minimize_adam(const Objective& fn, std::vector<double> x0, const Bounds& bounds,
                              const OptimizerOptions& opts);

}  // namespace inca::hier_gnn
