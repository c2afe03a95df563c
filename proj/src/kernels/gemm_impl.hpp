#pragma once

#include <algorithm>
#include <cstddef>
#include <type_traits>

// Gemm loops shared by the kernel variants. Each variant instantiates them
// with its own dot / axpy so the narrow loops are compiled for its ISA too.
namespace inca::kernels::detail {

// Below this width a call through the table costs more than the arithmetic.
inline constexpr std::size_t narrow = 16;
// Column panel kept resident in cache across the rows of the left operand.
inline constexpr std::size_t block = 512;

// W > 0 fixes the inner width at compile time; W == 0 reads it at run time.
template <std::size_t W>
inline std::size_t width(std::size_t n) { return W > 0 ? W : n; }

template <typename Fn>
inline void with_width(std::size_t n, Fn&& fn) {
  switch (n) {
    case 1: fn(std::integral_constant<std::size_t, 1>{}); break;
    case 2: fn(std::integral_constant<std::size_t, 2>{}); break;
    case 3: fn(std::integral_constant<std::size_t, 3>{}); break;
    case 4: fn(std::integral_constant<std::size_t, 4>{}); break;
    case 6: fn(std::integral_constant<std::size_t, 6>{}); break;
    case 8: fn(std::integral_constant<std::size_t, 8>{}); break;
    default: fn(std::integral_constant<std::size_t, 0>{}); break;
  }
}

template <std::size_t W>
inline void nn_narrow(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n_rt) {
  const std::size_t n = width<W>(n_rt);
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ai[p];
      if (s == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += s * bp[j];
    }
  }
}

template <std::size_t W>
inline void tn_narrow(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n_rt) {
  const std::size_t n = width<W>(n_rt);
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double s = ap[i];
      if (s == 0.0) continue;
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += s * bp[j];
    }
  }
}

template <std::size_t W>
inline void nt_narrow(const double* a, const double* b, double* c, std::size_t m, std::size_t k_rt, std::size_t n) {
  const std::size_t k = width<W>(k_rt);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] += s;
    }
}

template <typename Axpy>
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, Axpy&& axpy) {
  if (n < narrow) {
    with_width(n, [&](auto w) { nn_narrow<w()>(a, b, c, m, k, n); });
    return;
  }
  for (std::size_t j0 = 0; j0 < n; j0 += block) {
    const std::size_t nb = std::min(block, n - j0);
    for (std::size_t i = 0; i < m; ++i) {
      double* ci = c + i * n + j0;
      const double* ai = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        if (ai[p] == 0.0) continue;
        axpy(ai[p], b + p * n + j0, ci, nb);
      }
    }
  }
}

template <typename Axpy>
inline void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, Axpy&& axpy) {
  if (n < narrow) {
    with_width(n, [&](auto w) { tn_narrow<w()>(a, b, c, m, k, n); });
    return;
  }
  for (std::size_t j0 = 0; j0 < n; j0 += block) {
    const std::size_t nb = std::min(block, n - j0);
    for (std::size_t p = 0; p < k; ++p) {
      const double* ap = a + p * m;
      const double* bp = b + p * n + j0;
      for (std::size_t i = 0; i < m; ++i) {
        if (ap[i] == 0.0) continue;
        axpy(ap[i], bp, c + i * n + j0, nb);
      }
    }
  }
}

template <typename Dot>
inline void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, Dot&& dot) {
  if (k < narrow) {
    with_width(k, [&](auto w) { nt_narrow<w()>(a, b, c, m, k, n); });
    return;
  }
  for (std::size_t p0 = 0; p0 < k; p0 += block) {
    const std::size_t kb = std::min(block, k - p0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot(a + i * k + p0, b + j * k + p0, kb);
  }
}

}  // namespace inca::kernels::detail
