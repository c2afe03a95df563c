#include "inca/kernels/kernels.hpp"
#include "gemm_impl.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define INCA_X86 1
#include <immintrin.h>
#else
#define INCA_X86 0
#endif

namespace inca::kernels {

#if INCA_X86
namespace {

#define INCA_AVX2 __attribute__((target("avx2,fma")))

INCA_AVX2 inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

INCA_AVX2 double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

INCA_AVX2 void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

INCA_AVX2 void relu(const double* x, double* y, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    // max_pd(x, 0) returns 0 for NaN in the first operand, like the scalar path.
    _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

INCA_AVX2 void relu_mask(const double* x, double* g, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d keep = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(g + i, _mm256_and_pd(keep, _mm256_loadu_pd(g + i)));
  }
  for (; i < n; ++i)
    if (!(x[i] > 0.0)) g[i] = 0.0;
}

INCA_AVX2 double sq_diff(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// flatten pulls the shared loops into these bodies so they get AVX2 codegen.
#define INCA_AVX2_FLAT __attribute__((target("avx2,fma"), flatten))

INCA_AVX2_FLAT void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                            std::size_t n) {
  detail::gemm_nn(a, b, c, m, k, n, axpy);
}

INCA_AVX2_FLAT void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                            std::size_t n) {
  detail::gemm_tn(a, b, c, m, k, n, axpy);
}

INCA_AVX2_FLAT void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                            std::size_t n) {
  detail::gemm_nt(a, b, c, m, k, n, dot);
}

constexpr KernelTable kAvx2{"avx2", dot, axpy, relu, relu_mask, sq_diff, gemm_nn, gemm_tn, gemm_nt};

}  // namespace

const KernelTable* avx2_table() {
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &kAvx2 : nullptr;
}

#else

const KernelTable* avx2_table() { return nullptr; }

#endif

}  // namespace inca::kernels
