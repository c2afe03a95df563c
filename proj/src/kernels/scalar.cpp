#include "inca/kernels/kernels.hpp"
#include "gemm_impl.hpp"

namespace inca::kernels {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void relu(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask(const double* x, double* g, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!(x[i] > 0.0)) g[i] = 0.0;
}

double sq_diff(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  detail::gemm_nn(a, b, c, m, k, n, axpy);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  detail::gemm_tn(a, b, c, m, k, n, axpy);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  detail::gemm_nt(a, b, c, m, k, n, dot);
}

constexpr KernelTable kScalar{"scalar", dot, axpy, relu, relu_mask, sq_diff, gemm_nn, gemm_tn, gemm_nt};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace inca::kernels
