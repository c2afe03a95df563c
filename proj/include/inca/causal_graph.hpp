#pragma once

#include <cstddef>

#include "inca/core/matrix.hpp"

namespace inca::causal_graph {

// Unconstrained factors of the adaptive adjacency layer.
struct AdjacencyParams {
  Matrix w_plus;
  Matrix w_minus;

  std::size_t dim() const noexcept { return w_plus.rows(); }
};

// W = relu(tanh(W+ W-^T - W- W+^T)) with the diagonal forced to zero. The
// inner matrix is antisymmetric, so at most one of W(i,j), W(j,i) is positive.
Matrix materialize_adjacency(const AdjacencyParams& params);

struct AdjacencyGrad {
  Matrix w_plus;
  Matrix w_minus;
};

// Pulls dL/dW back to the two factors. Uses relu'(0) = 0.
AdjacencyGrad adjacency_backward(const AdjacencyParams& params, const Matrix& grad_w);

// e^M by scaling and squaring around a truncated Taylor series. Throws
// NonFinite on NaN/Inf input.
Matrix matrix_exponential(const Matrix& m, double tol = 1e-12);

struct Acyclicity {
  double h = 0.0;
  Matrix grad;
};

// h(W) = tr(exp(W o W)) - d, gradient exp(W o W)^T o 2W.
Acyclicity acyclicity_penalty(const Matrix& w);

bool is_acyclic(const Matrix& w);

// Drops edges below `w_min`, then repeatedly removes the weakest edge of a
// remaining directed cycle until the support is a DAG.
Matrix prune_to_dag(const Matrix& w, double w_min);

}  // namespace inca::causal_graph
