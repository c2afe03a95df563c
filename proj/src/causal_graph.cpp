#include "inca/causal_graph.hpp"

#include <cmath>
#include <optional>
#include <vector>

#include "inca/core/error.hpp"
#include "inca/kernels/kernels.hpp"

namespace inca::causal_graph {

namespace {

Matrix antisymmetric_product(const AdjacencyParams& params) {
  const std::size_t d = params.dim();
  if (params.w_minus.rows() != d || params.w_plus.cols() != params.w_minus.cols())
    fail(ErrorCode::ShapeMismatch, "adjacency factors differ in shape");
  // A = W+ W-^T - W- W+^T, i.e. P - P^T with P = W+ W-^T.
  Matrix p(d, d);
  kernels::gemm_nt(params.w_plus.data(), params.w_minus.data(), p.data(), d,
                   params.w_plus.cols(), d);
  Matrix a(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) a(i, j) = p(i, j) - p(j, i);
  return a;
}

double norm1(const Matrix& m) {
  double best = 0.0;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) s += std::abs(m(r, c));
    best = std::max(best, s);
  }
  return best;
}

}  // namespace

Matrix materialize_adjacency(const AdjacencyParams& params) {
  Matrix a = antisymmetric_product(params);
  const std::size_t d = a.rows();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double v = a(i, j);
      a(i, j) = (i != j && v > 0.0) ? std::tanh(v) : 0.0;
    }
  return a;
}

AdjacencyGrad adjacency_backward(const AdjacencyParams& params, const Matrix& grad_w) {
  const Matrix a = antisymmetric_product(params);
  const std::size_t d = a.rows();
  Matrix ga(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j || !(a(i, j) > 0.0)) continue;
      const double t = std::tanh(a(i, j));
      ga(i, j) = grad_w(i, j) * (1.0 - t * t);
    }
  // dA = dW+ W-^T - W- dW+^T + ...  =>  dW+ = (G - G^T) W-,  dW- = -(G - G^T) W+
  Matrix skew(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) skew(i, j) = ga(i, j) - ga(j, i);
  const std::size_t k = params.w_plus.cols();
  AdjacencyGrad g{Matrix(d, k), Matrix(d, k)};
  kernels::gemm_nn(skew.data(), params.w_minus.data(), g.w_plus.data(), d, d, k);
  kernels::gemm_nn(skew.data(), params.w_plus.data(), g.w_minus.data(), d, d, k);
  for (double& v : g.w_minus.flat()) v = -v;
  return g;
}

Matrix matrix_exponential(const Matrix& m, double tol) {
  if (!m.is_square()) fail(ErrorCode::ShapeMismatch, "matrix exponential needs a square matrix");
  for (double v : m.flat())
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "matrix exponential input is not finite");
  const std::size_t d = m.rows();
  if (d == 0) return {};

  const double norm = norm1(m);
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const double scale = std::ldexp(1.0, -squarings);

  Matrix a = m;
  for (double& v : a.flat()) v *= scale;

  Matrix result = Matrix::identity(d);
  Matrix term = Matrix::identity(d);
  for (int k = 1; k < 60; ++k) {
    Matrix next(d, d);
    kernels::gemm_nn(term.data(), a.data(), next.data(), d, d, d);
    const double inv_k = 1.0 / k;
    for (double& v : next.flat()) v *= inv_k;
    term = std::move(next);
    for (std::size_t i = 0; i < result.size(); ++i) result.flat()[i] += term.flat()[i];
    if (norm1(term) <= tol * norm1(result)) break;
  }
  for (int s = 0; s < squarings; ++s) result = kernels::matmul(result, result);
  return result;
}

Acyclicity acyclicity_penalty(const Matrix& w) {
  if (!w.is_square()) fail(ErrorCode::ShapeMismatch, "acyclicity penalty needs a square matrix");
  const std::size_t d = w.rows();
  Matrix sq = w;
  for (double& v : sq.flat()) v *= v;
  const Matrix e = matrix_exponential(sq);
  Acyclicity out{0.0, Matrix(d, d)};
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += e(i, i);
  out.h = trace - static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) out.grad(i, j) = e(j, i) * 2.0 * w(i, j);
  return out;
}

namespace {

// Returns the edges (u, v) of some directed cycle in the support of w.
std::optional<std::vector<std::pair<std::size_t, std::size_t>>> find_cycle(const Matrix& w) {
  const std::size_t d = w.rows();
  enum : char { White, Grey, Black };
  std::vector<char> colour(d, White);
  std::vector<std::size_t> parent(d, d);
  for (std::size_t root = 0; root < d; ++root) {
    if (colour[root] != White) continue;
    // Iterative DFS with an explicit (node, next neighbour) stack.
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    colour[root] = Grey;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      if (next == d) {
        colour[u] = Black;
        stack.pop_back();
        continue;
      }
      const std::size_t v = next++;
      if (!(w(u, v) > 0.0)) continue;
      if (colour[v] == Grey) {
        std::vector<std::pair<std::size_t, std::size_t>> cycle{{u, v}};
        for (std::size_t x = u; x != v; x = parent[x]) cycle.emplace_back(parent[x], x);
        return cycle;
      }
      if (colour[v] == White) {
        colour[v] = Grey;
        parent[v] = u;
        stack.emplace_back(v, 0);
      }
    }
  }
  return std::nullopt;
}

}  // namespace

bool is_acyclic(const Matrix& w) { return !find_cycle(w).has_value(); }

Matrix prune_to_dag(const Matrix& w, double w_min) {
  Matrix out = w;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j)
      if (i == j || !(out(i, j) >= w_min)) out(i, j) = 0.0;
  while (auto cycle = find_cycle(out)) {
    auto weakest = cycle->front();
    for (const auto& e : *cycle)
      if (out(e.first, e.second) < out(weakest.first, weakest.second)) weakest = e;
    out(weakest.first, weakest.second) = 0.0;
  }
  return out;
}

}  // namespace inca::causal_graph
