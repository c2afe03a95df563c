#include <doctest.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "inca/causal_graph.hpp"
#include "inca/core/error.hpp"
#include "oracles.hpp"
#include "util.hpp"

using namespace inca;
using namespace inca::causal_graph;

namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

using oracle::random_dag;

}  // namespace

TEST_CASE("adjacency of equal factors is empty") {
  std::mt19937_64 rng(1);
  auto a = testutil::random_matrix(5, 5, rng);
  Matrix w = materialize_adjacency({a, a});
  for (double v : w.flat()) CHECK(v == 0.0);
}

TEST_CASE("adjacency worked example") {
  Matrix wp(2, 2, std::vector<double>{1, 0, 0, 0});
  Matrix wm(2, 2, std::vector<double>{0, 0, 1, 0});
  Matrix w = materialize_adjacency({wp, wm});
  CHECK(w(0, 0) == 0.0);
  CHECK(w(0, 1) == doctest::Approx(std::tanh(1.0)).epsilon(1e-12));
  CHECK(w(1, 0) == 0.0);
  CHECK(w(1, 1) == 0.0);
}

TEST_CASE("adjacency is asymmetric with zero diagonal") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix w = materialize_adjacency({testutil::random_matrix(7, 7, rng, -2, 2), testutil::random_matrix(7, 7, rng, -2, 2)});
    for (std::size_t i = 0; i < 7; ++i) {
      CHECK(w(i, i) == 0.0);
      for (std::size_t j = 0; j < 7; ++j) {
        CHECK(w(i, j) >= 0.0);
        CHECK(w(i, j) < 1.0);
        CHECK(w(i, j) * w(j, i) == 0.0);
      }
    }
  }
}

TEST_CASE("adjacency backward matches finite differences") {
  std::mt19937_64 rng(3);
  AdjacencyParams p{testutil::random_matrix(5, 5, rng), testutil::random_matrix(5, 5, rng)};
  Matrix upstream = testutil::random_matrix(5, 5, rng);
  auto loss = [&](const AdjacencyParams& q) {
    Matrix w = materialize_adjacency(q);
    double s = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) s += w.flat()[k] * upstream.flat()[k];
    return s;
  };
  AdjacencyGrad g = adjacency_backward(p, upstream);
  const double h = 1e-6;
  for (int which = 0; which < 2; ++which) {
    Matrix& target = which == 0 ? p.w_plus : p.w_minus;
    const Matrix& grad = which == 0 ? g.w_plus : g.w_minus;
    for (std::size_t k = 0; k < target.size(); ++k) {
      const double x = target.flat()[k];
      target.flat()[k] = x + h;
      const double fp = loss(p);
      target.flat()[k] = x - h;
      const double fm = loss(p);
      target.flat()[k] = x;
      const double fd = (fp - fm) / (2 * h);
      CHECK(std::abs(fd - grad.flat()[k]) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("matrix exponential closed forms") {
  Matrix z = matrix_exponential(Matrix(3, 3));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(z(i, j) == (i == j ? 1.0 : 0.0));

  Matrix inv = matrix_exponential(Matrix(2, 2, std::vector<double>{0, 1, 1, 0}));
  CHECK(inv(0, 0) == doctest::Approx(std::cosh(1.0)).epsilon(1e-12));
  CHECK(inv(0, 1) == doctest::Approx(std::sinh(1.0)).epsilon(1e-12));
  CHECK(inv(1, 0) == doctest::Approx(std::sinh(1.0)).epsilon(1e-12));
  CHECK(inv(1, 1) == doctest::Approx(std::cosh(1.0)).epsilon(1e-12));

  Matrix diag = matrix_exponential(Matrix(2, 2, std::vector<double>{-1.5, 0, 0, 2.25}));
  CHECK(diag(0, 0) == doctest::Approx(std::exp(-1.5)).epsilon(1e-12));
  CHECK(diag(1, 1) == doctest::Approx(std::exp(2.25)).epsilon(1e-12));
  CHECK(diag(0, 1) == 0.0);
}

TEST_CASE("matrix exponential agrees with Eigen up to norm 10") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t d = 2 + rep % 9;
    Matrix m = testutil::random_matrix(d, d, rng);
    double norm1 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double col = 0.0;
      for (std::size_t i = 0; i < d; ++i) col += std::abs(m(i, j));
      norm1 = std::max(norm1, col);
    }
    const double target = 0.5 + 9.5 * (rep / 39.0);
    for (double& v : m.flat()) v *= target / norm1;
    Eigen::MatrixXd ref = to_eigen(m).exp();
    Matrix e = matrix_exponential(m);
    const double scale = ref.cwiseAbs().maxCoeff();
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(e(i, j) - ref(i, j)) <= 1e-10 * scale);
  }
}

TEST_CASE("matrix exponential rejects non-finite input") {
  Matrix m(2, 2);
  m(0, 1) = std::nan("");
  try {
    matrix_exponential(m);
    FAIL("expected NonFinite");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
  }
}

TEST_CASE("acyclicity worked examples") {
  CHECK(acyclicity_penalty(Matrix(4, 4)).h == 0.0);
  Matrix upper(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) upper(i, j) = 0.3 * double(i + j + 1);
  CHECK(acyclicity_penalty(upper).h == 0.0);
  Matrix cyc(2, 2, std::vector<double>{0, 1, 1, 0});
  CHECK(acyclicity_penalty(cyc).h == doctest::Approx(2 * std::cosh(1.0) - 2).epsilon(1e-12));
}

TEST_CASE("acyclicity is exactly zero on DAGs and positive on cycles") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> dim(3, 12);
  for (int rep = 0; rep < 100; ++rep) {
    Matrix w = random_dag(dim(rng), rng, 0.4);
    CHECK(acyclicity_penalty(w).h == 0.0);
    CHECK(is_acyclic(w));
  }
  for (int rep = 0; rep < 100; ++rep) {
    Matrix w = oracle::random_cyclic(dim(rng), rng, 0.3, 0.1);
    CHECK(acyclicity_penalty(w).h > 1e-6);
    CHECK_FALSE(is_acyclic(w));
  }
  // the lightest admissible cycles: h of a k-cycle at weight 0.1 is about 1e-2k / (k-1)!
  for (std::size_t k = 2; k <= 6; ++k) {
    Matrix w(k, k);
    for (std::size_t i = 0; i < k; ++i) w(i, (i + 1) % k) = 0.1;
    double tail = 1.0;
    for (std::size_t i = 1; i < k; ++i) tail *= double(i);
    CHECK(acyclicity_penalty(w).h == doctest::Approx(std::pow(0.01, double(k)) / tail).epsilon(1e-3));
    CHECK_FALSE(is_acyclic(w));
  }
}

TEST_CASE("acyclicity gradient matches finite differences") {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 5; ++rep) {
    Matrix w = testutil::random_matrix(8, 8, rng, 0.0, 1.0);
    auto res = acyclicity_penalty(w);
    const double h = 1e-5;
    for (std::size_t k = 0; k < w.size(); ++k) {
      Matrix a = w, b = w;
      a.flat()[k] += h;
      b.flat()[k] -= h;
      const double fd = (acyclicity_penalty(a).h - acyclicity_penalty(b).h) / (2 * h);
      CHECK(std::abs(fd - res.grad.flat()[k]) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("pruning thresholds and breaks cycles at the weakest edge") {
  Matrix w(3, 3);
  w(0, 1) = 0.5;
  w(1, 2) = 0.4;
  w(2, 0) = 0.2;   // weakest edge of the 3-cycle
  w(0, 2) = 0.005; // below threshold
  Matrix p = prune_to_dag(w, 0.01);
  CHECK(p(0, 1) == 0.5);
  CHECK(p(1, 2) == 0.4);
  CHECK(p(2, 0) == 0.0);
  CHECK(p(0, 2) == 0.0);
  CHECK(acyclicity_penalty(p).h == 0.0);

  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 30; ++rep) {
    Matrix r = testutil::random_matrix(9, 9, rng, 0.0, 1.0);
    for (std::size_t i = 0; i < 9; ++i) r(i, i) = 0.0;
    Matrix q = prune_to_dag(r, 0.3);
    CHECK(is_acyclic(q));
    for (std::size_t k = 0; k < q.size(); ++k) {
      CHECK((q.flat()[k] == 0.0 || q.flat()[k] == r.flat()[k]));
      if (r.flat()[k] < 0.3) CHECK(q.flat()[k] == 0.0);
    }
  }
}
