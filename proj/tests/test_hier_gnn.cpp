#include <doctest.h>

#include <cmath>

#include "inca/causal_graph.hpp"
#include "inca/core/error.hpp"
#include "inca/core/io.hpp"
#include "inca/hier_gnn/trainer.hpp"
#include "oracles.hpp"
#include "util.hpp"

using namespace inca;
using namespace inca::hier_gnn;

namespace {

using oracle::random_params;

MetricBundle bundle_from(const Matrix& low, const Matrix& high, const TopologyDescriptor& topo) {
  const auto ts = testutil::grid(low.rows());
  return {"m", {"m", topo.low_ids(), ts, low}, {"m", topo.high_ids(), ts, high}};
}

struct ChainData {
  TopologyDescriptor topo;
  MetricBundle metric;
  KpiSeries kpi;
};

// x0 -> x1 -> x2 at lag one plus an unrelated high-level node and KPI.
ChainData chain_data(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 0.05);
  const std::size_t T = 2000;
  Matrix low(T, 3), high(T, 1);
  KpiSeries kpi{testutil::grid(T), std::vector<double>(T)};
  for (std::size_t t = 1; t < T; ++t) {
    low(t, 0) = 0.5 * low(t - 1, 0) + nd(rng);
    low(t, 1) = 0.3 * low(t - 1, 1) + 0.8 * low(t - 1, 0) + nd(rng);
    low(t, 2) = 0.3 * low(t - 1, 2) + 0.8 * low(t - 1, 1) + nd(rng);
    high(t, 0) = 0.4 * high(t - 1, 0) + nd(rng);
    kpi.values[t] = 0.4 * kpi.values[t - 1] + nd(rng);
  }
  auto topo = TopologyDescriptor::create({"h0"}, {{"x0", "h0"}, {"x1", "h0"}, {"x2", "h0"}}, "kpi");
  return {topo, bundle_from(low, high, topo), kpi};
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig c;
  c.layers = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.lambda1 = -1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.restarts = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("config json round trip and unknown values") {
  TrainConfig c;
  c.lambda1 = 0.3;
  c.optimizer = OptimizerKind::Adam;
  c.low_adjacency = LowAdjacency::BlockDiagonal;
  c.inter_level = false;
  TrainConfig d;
  config_from_json(config_to_json(c), d);
  CHECK(config_to_json(d) == config_to_json(c));
  CHECK_THROWS_AS(config_from_json(Json{{"optimizer", "sgd"}}, d), Error);
}

TEST_CASE("pack and unpack are inverse") {
  TrainConfig cfg;
  std::mt19937_64 rng(1);
  auto p = random_params(5, 2, cfg, rng, 1.0);
  auto x = pack(p);
  CHECK(x.size() == param_count(p));
  TrainableParams q = zero_params(5, 2, cfg);
  unpack(x, q);
  CHECK(pack(q) == x);
}

TEST_CASE("zero parameters predict the output bias") {
  TrainConfig cfg;
  std::mt19937_64 rng(2);
  auto lag = lagprep::build_lag_embedding(testutil::random_matrix(30, 3, rng), cfg.p);
  auto params = zero_params(3, 1, cfg).low;
  params.mlp.b2 = {0.5, -1.0, 2.0};
  Matrix out = intra_forward(lag, Matrix(3, 3), params);
  REQUIRE(out.rows() == lag.m());
  REQUIRE(out.cols() == 3);
  for (std::size_t t = 0; t < out.rows(); ++t) {
    CHECK(out(t, 0) == 0.5);
    CHECK(out(t, 1) == -1.0);
    CHECK(out(t, 2) == 2.0);
  }
}

TEST_CASE("an empty adjacency equals ablating the neighbour half") {
  TrainConfig cfg;
  std::mt19937_64 rng(3);
  auto lag = lagprep::build_lag_embedding(testutil::random_matrix(40, 4, rng), cfg.p);
  auto params = random_params(4, 1, cfg, rng, 0.8).low;
  Matrix w = testutil::random_matrix(4, 4, rng, 0.0, 1.0);
  auto ablated = params;
  for (auto& b : ablated.layers)
    for (std::size_t r = b.rows() / 2; r < b.rows(); ++r)
      for (double& v : b.row(r)) v = 0.0;
  Matrix a = intra_forward(lag, Matrix(4, 4), params);
  Matrix b = intra_forward(lag, w, ablated);
  CHECK(a.values() == b.values());
}

TEST_CASE("intra forward rejects mismatched shapes") {
  TrainConfig cfg;
  std::mt19937_64 rng(4);
  auto lag = lagprep::build_lag_embedding(testutil::random_matrix(20, 3, rng), cfg.p);
  auto params = zero_params(3, 1, cfg).low;
  try {
    intra_forward(lag, Matrix(4, 4), params);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("inter aggregation") {
  std::mt19937_64 rng(5);
  const std::size_t n = 5, g = 2, m = 7, c = 3, p = 2;
  Matrix emb = testutil::random_matrix(n, m * c, rng);
  Matrix lag = testutil::random_matrix(g, m * p, rng);

  SUBCASE("zero cross leaves only the lag block") {
    Matrix z = inter_aggregate(emb, Matrix(n, g), lag, m);
    REQUIRE(z.cols() == m * (p + c));
    for (std::size_t h = 0; h < g; ++h)
      for (std::size_t t = 0; t < m; ++t) {
        for (std::size_t k = 0; k < p; ++k) CHECK(z(h, t * (p + c) + k) == lag(h, t * p + k));
        for (std::size_t e = 0; e < c; ++e) CHECK(z(h, t * (p + c) + p + e) == 0.0);
      }
  }
  SUBCASE("one-hot cross selects a node") {
    Matrix cross(n, g);
    cross(3, 0) = 1.0;
    cross(1, 1) = 1.0;
    Matrix z = inter_aggregate(emb, cross, lag, m);
    for (std::size_t t = 0; t < m; ++t)
      for (std::size_t e = 0; e < c; ++e) {
        CHECK(z(0, t * (p + c) + p + e) == emb(3, t * c + e));
        CHECK(z(1, t * (p + c) + p + e) == emb(1, t * c + e));
      }
  }
  SUBCASE("random cross matches a triple loop") {
    Matrix cross = testutil::random_matrix(n, g, rng, 0.0, 1.0);
    Matrix z = inter_aggregate(emb, cross, lag, m);
    for (std::size_t h = 0; h < g; ++h)
      for (std::size_t t = 0; t < m; ++t)
        for (std::size_t e = 0; e < c; ++e) {
          double s = 0.0;
          for (std::size_t i = 0; i < n; ++i) s += cross(i, h) * emb(i, t * c + e);
          CHECK(z(h, t * (p + c) + p + e) == doctest::Approx(s).epsilon(1e-13));
        }
  }
}

TEST_CASE("loss vanishes for a perfect zero predictor") {
  TrainConfig cfg;
  ModelData d{{Matrix(4, 20 * 2), Matrix(4, 20)}, {Matrix(2, 20 * 2), Matrix(2, 20)},
              {Matrix(1, 20 * 2), Matrix(1, 20)}, 2, {0, 0, 1, 1}};
  auto res = total_loss(d, zero_params(4, 2, cfg), cfg, make_masks(d, cfg));
  CHECK(res.parts.total == 0.0);
  CHECK(res.parts.low_mse == 0.0);
  CHECK(res.parts.h_low == 0.0);
}

TEST_CASE("analytic gradients match central differences") {
  TrainConfig cfg;
  std::mt19937_64 rng(6);
  for (int point = 0; point < 5; ++point) {
    CAPTURE(point);
    auto data = oracle::random_model_data(4, 2, 20, 2, rng);
    auto params = random_params(4, 2, cfg, rng, 0.6);
    CHECK(oracle::total_loss_fd_error(data, params, cfg) <= 1e-4);
  }
}

TEST_CASE("gradients stay exact across sample blocks and configurations") {
  std::mt19937_64 rng(7);
  TrainConfig cfg;
  cfg.p = 3;
  cfg.layers = 3;
  cfg.mlp_hidden = 6;
  cfg.low_adjacency = LowAdjacency::BlockDiagonal;
  cfg.cross_support = CrossSupport::Affiliation;
  auto data = oracle::random_model_data(5, 2, 300, 3, rng);
  CHECK(oracle::total_loss_fd_error(data, random_params(5, 2, cfg, rng, 0.5), cfg) <= 1e-4);

  TrainConfig off;
  off.inter_level = false;
  auto small = oracle::random_model_data(4, 2, 20, 2, rng);
  CHECK(oracle::total_loss_fd_error(small, random_params(4, 2, off, rng, 0.5), off) <= 1e-4);
}

TEST_CASE("inter-level switch freezes cross and kpi edges") {
  TrainConfig cfg;
  cfg.inter_level = false;
  std::mt19937_64 rng(8);
  auto data = oracle::random_model_data(4, 2, 20, 2, rng);
  auto params = random_params(4, 2, cfg, rng, 0.5);
  auto masks = make_masks(data, cfg);
  auto mg = materialize(params, masks);
  for (double v : mg.w_cross.flat()) CHECK(v == 0.0);
  for (double v : mg.w_kpi) CHECK(v == 0.0);
  auto g = total_loss(data, params, cfg, masks).grad;
  for (double v : g.cross.flat()) CHECK(v == 0.0);
  for (double v : g.kpi) CHECK(v == 0.0);
}

TEST_CASE("fit recovers a three-node chain") {
  auto cd = chain_data(21);
  TrainConfig cfg;
  auto fit = fit_interdependent(cd.metric, cd.kpi, cd.topo, cfg);
  const Matrix& w = fit.graph.w_low;
  CHECK(w(0, 1) >= cfg.w_min);
  CHECK(w(1, 2) >= cfg.w_min);
  CHECK(w(1, 0) == 0.0);
  CHECK(w(2, 1) == 0.0);
  CHECK(fit.h_low <= cfg.eps_acyc);
  CHECK(fit.h_high <= cfg.eps_acyc);
  for (std::size_t i = 1; i < fit.trace.size(); ++i) CHECK(fit.trace[i] <= fit.trace[i - 1] + 1e-12);
}

TEST_CASE("a heavy L1 weight empties the graph") {
  auto cd = chain_data(22);
  TrainConfig cfg;
  cfg.lambda1 = 100.0;
  cfg.max_iters = 300;
  auto fit = fit_interdependent(cd.metric, cd.kpi, cd.topo, cfg);
  for (double v : fit.graph.w_low.flat()) CHECK(v == 0.0);
  for (double v : fit.graph.w_cross.flat()) CHECK(v == 0.0);
  for (double v : fit.graph.w_kpi) CHECK(v == 0.0);
}

namespace {

int white_noise_runs() {
  int empty = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    std::mt19937_64 rng(100 + s);
    std::normal_distribution<double> nd(0.0, 0.05);
    const std::size_t T = 2000;
    Matrix low(T, 2), high(T, 1);
    KpiSeries kpi{testutil::grid(T), std::vector<double>(T)};
    for (std::size_t t = 0; t < T; ++t) {
      low(t, 0) = nd(rng);
      low(t, 1) = nd(rng);
      if (t > 0) {
        high(t, 0) = 0.4 * high(t - 1, 0) + nd(rng);
        kpi.values[t] = 0.4 * kpi.values[t - 1] + nd(rng);
      }
    }
    auto topo = TopologyDescriptor::create({"h0"}, {{"x0", "h0"}, {"x1", "h0"}}, "kpi");
    TrainConfig cfg;
    cfg.seed = s;
    auto fit = fit_interdependent(bundle_from(low, high, topo), kpi, topo, cfg);
    bool any = false;
    for (double v : fit.graph.w_low.flat()) any = any || v >= cfg.w_min;
    empty += any ? 0 : 1;
  }
  return empty;
}

int white_noise_empty_runs() {
  static const int empty = white_noise_runs();
  return empty;
}

}  // namespace

TEST_CASE("white noise gives an empty graph in most runs") {
  const int empty = white_noise_empty_runs();
  MESSAGE("empty graphs in " << empty << "/20 runs");
  CHECK(empty >= 11);
}

TEST_CASE("white noise gives an empty graph in 90% of runs" * doctest::may_fail()) {
  CHECK(white_noise_empty_runs() >= 18);
}

TEST_CASE("fits are bit-identical for a fixed seed") {
  auto cd = chain_data(23);
  TrainConfig cfg;
  cfg.max_iters = 150;
  cfg.seed = 5;
  auto a = fit_interdependent(cd.metric, cd.kpi, cd.topo, cfg);
  auto b = fit_interdependent(cd.metric, cd.kpi, cd.topo, cfg);
  CHECK(pack(a.params) == pack(b.params));
  CHECK(a.graph == b.graph);
  CHECK(a.trace == b.trace);
  cfg.seed = 6;
  auto c = fit_interdependent(cd.metric, cd.kpi, cd.topo, cfg);
  CHECK(pack(c.params) != pack(a.params));
}

TEST_CASE("graph json carries the acyclicity values and config") {
  auto cd = chain_data(24);
  TrainConfig cfg;
  cfg.max_iters = 50;
  auto fit = fit_interdependent(cd.metric, cd.kpi, cd.topo, cfg);
  Json j = fit_to_json(fit, cd.topo, cfg);
  CHECK(j.at("h_low").get<double>() == fit.h_low);
  CHECK(j.at("config").at("lambda1").get<double>() == cfg.lambda1);
  CHECK(io::graph_from_json(j, cd.topo) == fit.graph);
}
