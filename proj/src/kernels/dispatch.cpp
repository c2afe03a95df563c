#include <cstdlib>
#include <cstring>

#include "inca/kernels/kernels.hpp"

namespace inca::kernels {

const KernelTable& active() {
  static const KernelTable& table = [] () -> const KernelTable& {
    const char* env = std::getenv("INCA_SIMD");
    if (env != nullptr && std::strcmp(env, "scalar") == 0) return scalar_table();
    if (const KernelTable* t = avx2_table()) return *t;
    return scalar_table();
  }();
  return table;
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, const KernelTable& kt) {
  kt.gemm_nn(a, b, c, m, k, n);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, const KernelTable& kt) {
  kt.gemm_tn(a, b, c, m, k, n);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, const KernelTable& kt) {
  kt.gemm_nt(a, b, c, m, k, n);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  gemm_nn(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

}  // namespace inca::kernels
