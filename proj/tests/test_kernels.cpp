#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "inca/kernels/kernels.hpp"
#include "util.hpp"

using namespace inca;
namespace kn = inca::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  // sprinkle exact zeros; the gemm paths skip them
  for (std::size_t i = 0; i < n; i += 7) v[i] = 0.0;
  return v;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  return worst;
}

const std::size_t lengths[] = {0, 1, 3, 4, 5, 7, 8, 15, 16, 17, 33, 100, 1023};

}  // namespace

TEST_CASE("scalar primitives match naive loops") {
  const auto& s = kn::scalar_table();
  std::mt19937_64 rng(1);
  for (std::size_t n : lengths) {
    auto a = random_vec(n, rng), b = random_vec(n, rng);
    double dot = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dot += a[i] * b[i];
      sq += (a[i] - b[i]) * (a[i] - b[i]);
    }
    CHECK(s.dot(a.data(), b.data(), n) == doctest::Approx(dot).epsilon(1e-12));
    CHECK(s.sq_diff(a.data(), b.data(), n) == doctest::Approx(sq).epsilon(1e-12));
  }
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  const kn::KernelTable* v = kn::avx2_table();
  if (v == nullptr) {
    MESSAGE("host lacks AVX2/FMA; only the scalar path is exercised");
    return;
  }
  const auto& s = kn::scalar_table();
  std::mt19937_64 rng(2);
  for (std::size_t n : lengths) {
    CAPTURE(n);
    auto a = random_vec(n, rng), b = random_vec(n, rng);
    const double ds = s.dot(a.data(), b.data(), n), dv = v->dot(a.data(), b.data(), n);
    CHECK(std::abs(ds - dv) <= 1e-12 * std::max(1.0, std::abs(ds)) * std::sqrt(double(n) + 1.0));
    const double qs = s.sq_diff(a.data(), b.data(), n), qv = v->sq_diff(a.data(), b.data(), n);
    CHECK(std::abs(qs - qv) <= 1e-12 * std::max(1.0, qs));

    auto ys = b, yv = b;
    s.axpy(0.37, a.data(), ys.data(), n);
    v->axpy(0.37, a.data(), yv.data(), n);
    CHECK(max_rel(yv, ys) <= 1e-15);

    std::vector<double> rs(n), rv(n);
    s.relu(a.data(), rs.data(), n);
    v->relu(a.data(), rv.data(), n);
    CHECK(rs == rv);

    auto gs = b, gv = b;
    s.relu_mask(a.data(), gs.data(), n);
    v->relu_mask(a.data(), gv.data(), n);
    CHECK(gs == gv);
  }
}

TEST_CASE("gemm variants agree with a naive product on both tables") {
  std::mt19937_64 rng(3);
  const std::size_t shapes[][3] = {{1, 1, 1}, {3, 2, 5}, {4, 4, 4}, {7, 6, 9}, {10, 3, 600},
                                   {2, 8, 1030}, {16, 17, 18}, {5, 600, 4}, {30, 1, 257}};
  std::vector<const kn::KernelTable*> tables{&kn::scalar_table()};
  if (kn::avx2_table() != nullptr) tables.push_back(kn::avx2_table());
  for (const auto& sh : shapes) {
    const std::size_t m = sh[0], k = sh[1], n = sh[2];
    CAPTURE(m);
    CAPTURE(k);
    CAPTURE(n);
    auto a = random_vec(m * k, rng);  // m x k
    auto at = random_vec(k * m, rng); // k x m
    auto b = random_vec(k * n, rng);  // k x n
    auto bt = random_vec(n * k, rng); // n x k
    auto c0 = random_vec(m * n, rng);

    std::vector<double> nn = c0, tn = c0, nt = c0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t l = 0; l < k; ++l) {
          nn[i * n + j] += a[i * k + l] * b[l * n + j];
          tn[i * n + j] += at[l * m + i] * b[l * n + j];
          nt[i * n + j] += a[i * k + l] * bt[j * k + l];
        }
    for (const auto* t : tables) {
      CAPTURE(t->name);
      auto c = c0;
      kn::gemm_nn(a.data(), b.data(), c.data(), m, k, n, *t);
      CHECK(max_rel(c, nn) <= 1e-12);
      c = c0;
      kn::gemm_tn(at.data(), b.data(), c.data(), m, k, n, *t);
      CHECK(max_rel(c, tn) <= 1e-12);
      c = c0;
      kn::gemm_nt(a.data(), bt.data(), c.data(), m, k, n, *t);
      CHECK(max_rel(c, nt) <= 1e-12);
    }
  }
}

TEST_CASE("matmul") {
  Matrix a(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
  Matrix b(3, 2, std::vector<double>{7, 8, 9, 10, 11, 12});
  Matrix c = kn::matmul(a, b);
  CHECK(c(0, 0) == 58);
  CHECK(c(0, 1) == 64);
  CHECK(c(1, 0) == 139);
  CHECK(c(1, 1) == 154);
}

TEST_CASE("active table honours INCA_SIMD") {
  const char* env = std::getenv("INCA_SIMD");
  if (env != nullptr && std::string(env) == "scalar") CHECK(&kn::active() == &kn::scalar_table());
  else if (kn::avx2_table() != nullptr) CHECK(&kn::active() == kn::avx2_table());
  else CHECK(&kn::active() == &kn::scalar_table());
}
