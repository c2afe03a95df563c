#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "inca/core/matrix.hpp"

// Data-parallel inner loops used by the trainer, the matrix exponential and
// the random walk. Each primitive has a scalar reference implementation and
// an AVX2 variant; the variant is picked once at startup from CPUID unless
// INCA_SIMD=scalar forces the reference path.
namespace inca::kernels {

struct KernelTable {
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = max(x, 0)
  void (*relu)(const double* x, double* y, std::size_t n);
  // g = (x > 0) ? g : 0
  void (*relu_mask)(const double* x, double* g, std::size_t n);
  // sum_i (a_i - b_i)^2
  double (*sq_diff)(const double* a, const double* b, std::size_t n);
  // Accumulating products, see gemm_nn / gemm_tn / gemm_nt below.
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
};

const KernelTable& scalar_table();
// nullptr when the host CPU lacks AVX2/FMA.
const KernelTable* avx2_table();
const KernelTable& active();

// Gemm-style helpers on top of the active table. All accumulate into `c`
// (c += ...); callers zero `c` when they want an assignment.
// C(m x n) += A(m x k) * B(k x n)
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, const KernelTable& kt = active());
// C(m x n) += A^T * B, A stored k x m
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, const KernelTable& kt = active());
// C(m x n) += A * B^T, B stored n x k
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, const KernelTable& kt = active());

Matrix matmul(const Matrix& a, const Matrix& b);

}  // namespace inca::kernels
