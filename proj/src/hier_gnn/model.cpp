#include "inca/hier_gnn/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "inca/core/error.hpp"
#include "inca/kernels/kernels.hpp"

namespace inca::hier_gnn {

namespace kn = inca::kernels;

void TrainConfig::validate() const {
  if (p < 1) fail(ErrorCode::InvalidArgument, "lag order p must be >= 1");
  if (layers < 1) fail(ErrorCode::InvalidArgument, "layer count L must be >= 1");
  if (embed_width < 1 || mlp_hidden < 1) fail(ErrorCode::InvalidArgument, "widths must be >= 1");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))
    fail(ErrorCode::InvalidArgument, "lambda1 and lambda2 must be >= 0");
  if (!(init_scale >= 0.0)) fail(ErrorCode::InvalidArgument, "init_scale must be >= 0");
  if (lbfgs_memory < 1) fail(ErrorCode::InvalidArgument, "lbfgs memory must be >= 1");
  if (restarts < 1) fail(ErrorCode::InvalidArgument, "restarts must be >= 1");
}

// ---------------------------------------------------------------------------
// Parameter shapes and flattening

namespace {

Mlp zero_mlp(std::size_t in, std::size_t hidden, std::size_t nodes) {
  return {Matrix(in, hidden), std::vector<double>(hidden, 0.0), std::vector<double>(hidden, 0.0),
          std::vector<double>(nodes, 0.0)};
}

LevelParams zero_level(std::size_t d, std::size_t first_in, const TrainConfig& cfg) {
  LevelParams lp;
  lp.adj = {Matrix(d, d), Matrix(d, d)};
  lp.temporal = Matrix(d, cfg.p * cfg.p);
  std::size_t in = first_in;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    lp.layers.emplace_back(2 * in, cfg.embed_width);
    in = cfg.embed_width;
  }
  lp.mlp = zero_mlp(cfg.embed_width, cfg.mlp_hidden, d);
  return lp;
}

template <class Params, class Fn>
void visit_blocks(Params& params, Fn&& fn) {
  auto level = [&](auto& lp) {
    fn(lp.adj.w_plus.flat());
    fn(lp.adj.w_minus.flat());
    fn(lp.temporal.flat());
    for (auto& layer : lp.layers) fn(layer.flat());
    fn(lp.mlp.w1.flat());
    fn(std::span(lp.mlp.b1));
    fn(std::span(lp.mlp.w2));
    fn(std::span(lp.mlp.b2));
  };
  level(params.low);
  level(params.high);
  fn(params.cross.flat());
  fn(std::span(params.kpi));
  fn(params.kpi_head.w1.flat());
  fn(std::span(params.kpi_head.b1));
  fn(std::span(params.kpi_head.w2));
  fn(std::span(params.kpi_head.b2));
}

}  // namespace

TrainableParams zero_params(std::size_t n_low, std::size_t g, const TrainConfig& cfg) {
  TrainableParams tp;
  tp.low = zero_level(n_low, cfg.p, cfg);
  tp.high = zero_level(g, cfg.p + cfg.embed_width, cfg);
  tp.cross = Matrix(n_low, g);
  tp.kpi.assign(g, 0.0);
  tp.kpi_head = zero_mlp(cfg.p + cfg.embed_width, cfg.mlp_hidden, 1);
  return tp;
}

TrainableParams init_params(std::size_t n_low, std::size_t g, const TrainConfig& cfg) {
  TrainableParams tp = zero_params(n_low, g, cfg);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(-cfg.init_scale, cfg.init_scale);
  visit_blocks(tp, [&](std::span<double> block) {
    for (double& v : block) v = unif(rng);
  });
  // Edge weights live on [0, inf); start them on the feasible side.
  for (double& v : tp.cross.flat()) v = std::abs(v);
  for (double& v : tp.kpi) v = std::abs(v);
  // Dense weights: fan-scaled range.
  auto glorot = [&](std::span<double> w, std::size_t fan_in, std::size_t fan_out) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    for (double& v : w) v = u(rng);
  };
  // output layer stays at init_scale
  auto dense = [&](Mlp& mlp) { glorot(mlp.w1.flat(), mlp.w1.rows(), mlp.w1.cols()); };
  for (LevelParams* lp : {&tp.low, &tp.high}) {
    glorot(lp->temporal.flat(), cfg.p, cfg.p);
    for (Matrix& b : lp->layers) glorot(b.flat(), b.rows(), b.cols());
    dense(lp->mlp);
  }
  dense(tp.kpi_head);
  return tp;
}

void for_each_block(TrainableParams& params, const std::function<void(std::span<double>)>& fn) {
  visit_blocks(params, fn);
}

std::size_t param_count(const TrainableParams& params) {
  std::size_t n = 0;
  visit_blocks(const_cast<TrainableParams&>(params), [&](std::span<double> b) { n += b.size(); });
  return n;
}

std::vector<double> pack(const TrainableParams& params) {
  std::vector<double> flat;
  flat.reserve(param_count(params));
  visit_blocks(const_cast<TrainableParams&>(params),
               [&](std::span<double> b) { flat.insert(flat.end(), b.begin(), b.end()); });
  return flat;
}

void unpack(std::span<const double> flat, TrainableParams& params) {
  std::size_t off = 0;
  visit_blocks(params, [&](std::span<double> b) {
    if (off + b.size() > flat.size()) fail(ErrorCode::ShapeMismatch, "flat parameter vector too short");
    std::copy(flat.begin() + off, flat.begin() + off + b.size(), b.begin());
    off += b.size();
  });
  if (off != flat.size()) fail(ErrorCode::ShapeMismatch, "flat parameter vector too long");
}

// ---------------------------------------------------------------------------
// Data preparation

LevelInput to_level_input(const lagprep::LagTensor& lag) {
  const std::size_t m = lag.m();
  const std::size_t d = lag.d();
  const std::size_t p = lag.p;
  LevelInput in{Matrix(d, m * p), Matrix(d, m)};
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t t = 0; t < m; ++t) {
      in.targets(i, t) = lag.targets(t, i);
      for (std::size_t k = 0; k < p; ++k) in.lags(i, t * p + k) = lag.lagged(t, k * d + i);
    }
  return in;
}

ModelData prepare_data(const MetricBundle& metric, const KpiSeries& kpi,
                       const TopologyDescriptor& topo, std::size_t p) {
  auto low = lagprep::standardize(metric.low).panel;
  auto high = lagprep::standardize(metric.high).panel;
  auto y = lagprep::standardize_series(kpi.values);
  Matrix ymat(y.size(), 1, y);
  ModelData data;
  data.p = p;
  data.low = to_level_input(lagprep::build_lag_embedding(low.values, p));
  data.high = to_level_input(lagprep::build_lag_embedding(high.values, p));
  data.kpi = to_level_input(lagprep::build_lag_embedding(ymat, p));
  data.affiliation = topo.affiliation();
  return data;
}

SupportMasks make_masks(const ModelData& data, const TrainConfig& cfg) {
  const std::size_t n = data.low.d();
  const std::size_t g = data.high.d();
  SupportMasks masks{Matrix(n, n, 1.0), Matrix(n, g, cfg.inter_level ? 1.0 : 0.0),
                     std::vector<double>(g, cfg.inter_level ? 1.0 : 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    masks.low(i, i) = 0.0;
    if (cfg.low_adjacency == LowAdjacency::BlockDiagonal)
      for (std::size_t j = 0; j < n; ++j)
        if (data.affiliation.at(i) != data.affiliation.at(j)) masks.low(i, j) = 0.0;
    if (cfg.inter_level && cfg.cross_support == CrossSupport::Affiliation)
      for (std::size_t h = 0; h < g; ++h)
        if (data.affiliation.at(i) != h) masks.cross(i, h) = 0.0;
  }
  return masks;
}

// ---------------------------------------------------------------------------
// Forward / backward building blocks. Embeddings are node-major: a d x (m*c)
// matrix whose row i is node i's m embeddings of width c back to back, which
// also reads as a (d*m) x c row-major matrix.

namespace {

struct GnnCache {
  std::vector<Matrix> z_in;  // input of layer l, d x (m * in_l)
  std::vector<Matrix> nbr;   // W^T z_in
  std::vector<Matrix> pre;   // pre-activation, d x (m * c)
  Matrix z_out;              // d x (m * c)
};

std::size_t width_of(const Matrix& z, std::size_t m) { return z.cols() / m; }

GnnCache gnn_forward(const Matrix& z0, const Matrix& w, const std::vector<Matrix>& layers,
                     std::size_t m) {
  const std::size_t d = z0.rows();
  GnnCache cache;
  Matrix z = z0;
  for (const Matrix& b : layers) {
    const std::size_t in = width_of(z, m);
    const std::size_t out = b.cols();
    if (b.rows() != 2 * in) fail(ErrorCode::ShapeMismatch, "layer weight does not match embedding width");
    Matrix nbr(d, m * in);
    // nbr_j = sum_i W(i, j) z_i : messages flow along edge direction.
    kn::gemm_tn(w.data(), z.data(), nbr.data(), d, d, m * in);
    Matrix pre(d, m * out);
    kn::gemm_nn(z.data(), b.data(), pre.data(), d * m, in, out);
    kn::gemm_nn(nbr.data(), b.data() + in * out, pre.data(), d * m, in, out);
    Matrix act(d, m * out);
    kn::active().relu(pre.data(), act.data(), pre.size());
    cache.z_in.push_back(std::move(z));
    cache.nbr.push_back(std::move(nbr));
    cache.pre.push_back(std::move(pre));
    z = std::move(act);
  }
  cache.z_out = std::move(z);
  return cache;
}

// Returns dL/dz0; accumulates into layer grads and grad_w.
Matrix gnn_backward(const GnnCache& cache, const Matrix& w, const std::vector<Matrix>& layers,
                    Matrix dz, std::size_t m, std::vector<Matrix>& grad_layers, Matrix& grad_w) {
  const std::size_t d = w.rows();
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Matrix& b = layers[l];
    const Matrix& z_in = cache.z_in[l];
    const Matrix& nbr = cache.nbr[l];
    const std::size_t in = width_of(z_in, m);
    const std::size_t out = b.cols();

    kn::active().relu_mask(cache.pre[l].data(), dz.data(), dz.size());
    Matrix& gb = grad_layers[l];
    kn::gemm_tn(z_in.data(), dz.data(), gb.data(), in, d * m, out);
    kn::gemm_tn(nbr.data(), dz.data(), gb.data() + in * out, in, d * m, out);

    Matrix dz_in(d, m * in);
    Matrix dnbr(d, m * in);
    kn::gemm_nt(dz.data(), b.data(), dz_in.data(), d * m, out, in);
    kn::gemm_nt(dz.data(), b.data() + in * out, dnbr.data(), d * m, out, in);
    kn::gemm_nn(w.data(), dnbr.data(), dz_in.data(), d, d, m * in);
    kn::gemm_nt(z_in.data(), dnbr.data(), grad_w.data(), d, m * in, d);
    dz = std::move(dz_in);
  }
  return dz;
}

struct MlpCache {
  Matrix pre;  // d x (m * hidden)
  Matrix act;
  Matrix out;  // d x m
};

MlpCache mlp_forward(const Matrix& z, const Mlp& mlp, std::size_t m) {
  const std::size_t d = z.rows();
  const std::size_t in = width_of(z, m);
  const std::size_t h = mlp.w1.cols();
  if (mlp.w1.rows() != in) fail(ErrorCode::ShapeMismatch, "mlp input width does not match embedding");
  if (mlp.b2.size() != d) fail(ErrorCode::ShapeMismatch, "mlp output bias does not match node count");
  MlpCache c{Matrix(d, m * h), Matrix(d, m * h), Matrix(d, m)};
  for (std::size_t r = 0; r < d * m; ++r)
    std::copy(mlp.b1.begin(), mlp.b1.end(), c.pre.data() + r * h);
  kn::gemm_nn(z.data(), mlp.w1.data(), c.pre.data(), d * m, in, h);
  kn::active().relu(c.pre.data(), c.act.data(), c.pre.size());
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t t = 0; t < m; ++t) {
      const double* a = c.act.data() + (i * m + t) * h;
      double s = mlp.b2[i];
      for (std::size_t u = 0; u < h; ++u) s += a[u] * mlp.w2[u];
      c.out(i, t) = s;
    }
  return c;
}

// dout is d x m; returns dL/dz.
Matrix mlp_backward(const Matrix& z, const MlpCache& c, const Mlp& mlp, const Matrix& dout,
                    std::size_t m, Mlp& grad) {
  const std::size_t d = z.rows();
  const std::size_t in = width_of(z, m);
  const std::size_t h = mlp.w1.cols();
  const auto& kt = kn::active();
  Matrix dpre(d, m * h);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t t = 0; t < m; ++t) {
      const double g = dout(i, t);
      grad.b2[i] += g;
      if (g == 0.0) continue;
      const double* a = c.act.data() + (i * m + t) * h;
      double* dp = dpre.data() + (i * m + t) * h;
      for (std::size_t u = 0; u < h; ++u) {
        grad.w2[u] += g * a[u];
        dp[u] = g * mlp.w2[u];
      }
    }
  kt.relu_mask(c.pre.data(), dpre.data(), dpre.size());
  for (std::size_t r = 0; r < d * m; ++r)
    for (std::size_t u = 0; u < h; ++u) grad.b1[u] += dpre.data()[r * h + u];
  kn::gemm_tn(z.data(), dpre.data(), grad.w1.data(), in, d * m, h);
  Matrix dz(d, m * in);
  kn::gemm_nt(dpre.data(), mlp.w1.data(), dz.data(), d * m, h, in);
  return dz;
}

std::size_t lag_order(const Matrix& temporal) {
  return static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(temporal.cols()))));
}

// z0_i = lags_i * temporal_i, one p x p block per node.
Matrix temporal_mix(const Matrix& lags, const Matrix& temporal, std::size_t m) {
  const std::size_t d = lags.rows();
  const std::size_t p = lag_order(temporal);
  Matrix z0(d, m * p);
  for (std::size_t i = 0; i < d; ++i)
    kn::gemm_nn(lags.data() + i * m * p, temporal.data() + i * p * p, z0.data() + i * m * p, m, p, p);
  return z0;
}

void temporal_backward(const Matrix& lags, const Matrix& dz0, std::size_t m, Matrix& grad_temporal) {
  const std::size_t d = lags.rows();
  const std::size_t p = lag_order(grad_temporal);
  for (std::size_t i = 0; i < d; ++i)
    kn::gemm_tn(lags.data() + i * m * p, dz0.data() + i * m * p, grad_temporal.data() + i * p * p, p, m, p);
}

// Interleaves per-row blocks: out row i, sample t = [a(i, t) | b(i, t)].
Matrix concat_rows(const Matrix& a, const Matrix& b, std::size_t m) {
  const std::size_t d = a.rows();
  const std::size_t wa = width_of(a, m);
  const std::size_t wb = width_of(b, m);
  Matrix out(d, m * (wa + wb));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t t = 0; t < m; ++t) {
      double* dst = out.data() + (i * m + t) * (wa + wb);
      std::copy_n(a.data() + (i * m + t) * wa, wa, dst);
      std::copy_n(b.data() + (i * m + t) * wb, wb, dst + wa);
    }
  return out;
}

void split_rows(const Matrix& src, std::size_t m, std::size_t wa, Matrix& a, Matrix& b) {
  const std::size_t d = src.rows();
  const std::size_t w = width_of(src, m);
  const std::size_t wb = w - wa;
  a = Matrix(d, m * wa);
  b = Matrix(d, m * wb);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t t = 0; t < m; ++t) {
      const double* s = src.data() + (i * m + t) * w;
      std::copy_n(s, wa, a.data() + (i * m + t) * wa);
      std::copy_n(s + wa, wb, b.data() + (i * m + t) * wb);
    }
}

double mse_and_grad(const Matrix& pred, const Matrix& target, double inv_m, Matrix& dpred) {
  dpred = Matrix(pred.rows(), pred.cols());
  double loss = kn::active().sq_diff(pred.data(), target.data(), pred.size()) * inv_m;
  for (std::size_t k = 0; k < pred.size(); ++k)
    dpred.flat()[k] = 2.0 * inv_m * (pred.flat()[k] - target.flat()[k]);
  return loss;
}

Matrix masked_adjacency(const causal_graph::AdjacencyParams& adj, const Matrix* mask) {
  Matrix w = causal_graph::materialize_adjacency(adj);
  if (mask != nullptr)
    for (std::size_t k = 0; k < w.size(); ++k) w.flat()[k] *= mask->flat()[k];
  return w;
}

void check_level(const LevelInput& in, const LevelParams& lp, std::size_t p, const char* name) {
  if (in.lags.rows() != lp.adj.dim() || in.lags.cols() != in.m() * p)
    fail(ErrorCode::ShapeMismatch, std::string(name) + " input does not match parameter dimension");
  if (lp.temporal.rows() != in.d() || lp.temporal.cols() != p * p)
    fail(ErrorCode::ShapeMismatch, std::string(name) + " temporal weights are not one p x p block per node");
}

}  // namespace

// ---------------------------------------------------------------------------
// Public forward pieces

Matrix intra_forward(const lagprep::LagTensor& lag, const Matrix& w, const LevelParams& params) {
  const LevelInput in = to_level_input(lag);
  if (w.rows() != lag.d() || w.cols() != lag.d() || params.adj.dim() != lag.d())
    fail(ErrorCode::ShapeMismatch, "adjacency dimension does not match the lag tensor");
  check_level(in, params, lag.p, "level");
  const std::size_t m = in.m();
  const Matrix z0 = temporal_mix(in.lags, params.temporal, m);
  const GnnCache gc = gnn_forward(z0, w, params.layers, m);
  const MlpCache mc = mlp_forward(gc.z_out, params.mlp, m);
  return mc.out.transposed();
}

Matrix inter_aggregate(const Matrix& low_embed, const Matrix& cross, const Matrix& high_lag,
                       std::size_t m) {
  const std::size_t n = low_embed.rows();
  const std::size_t g = high_lag.rows();
  if (cross.rows() != n || cross.cols() != g)
    fail(ErrorCode::ShapeMismatch, "cross weights must be n_low x g");
  if (m == 0 || low_embed.cols() % m != 0 || high_lag.cols() % m != 0)
    fail(ErrorCode::ShapeMismatch, "embedding widths are not multiples of m");
  Matrix agg(g, low_embed.cols());
  kn::gemm_tn(cross.data(), low_embed.data(), agg.data(), g, n, low_embed.cols());
  return concat_rows(high_lag, agg, m);
}

MaterializedGraph materialize(const TrainableParams& params, const SupportMasks& masks) {
  MaterializedGraph mg;
  mg.w_low = masked_adjacency(params.low.adj, &masks.low);
  mg.w_high = masked_adjacency(params.high.adj, nullptr);
  mg.w_cross = Matrix(params.cross.rows(), params.cross.cols());
  for (std::size_t k = 0; k < mg.w_cross.size(); ++k)
    mg.w_cross.flat()[k] = masks.cross.flat()[k] * std::tanh(std::max(params.cross.flat()[k], 0.0));
  mg.w_kpi.resize(params.kpi.size());
  for (std::size_t k = 0; k < params.kpi.size(); ++k)
    mg.w_kpi[k] = masks.kpi[k] * std::tanh(std::max(params.kpi[k], 0.0));
  return mg;
}

// ---------------------------------------------------------------------------
// Objective

namespace {

// Columns [t0, t1) of a node-major input.
LevelInput slice(const LevelInput& in, std::size_t p, std::size_t t0, std::size_t t1) {
  const std::size_t d = in.d();
  const std::size_t m = in.m();
  const std::size_t len = t1 - t0;
  LevelInput out{Matrix(d, len * p), Matrix(d, len)};
  for (std::size_t i = 0; i < d; ++i) {
    std::copy_n(in.lags.data() + i * m * p + t0 * p, len * p, out.lags.data() + i * len * p);
    std::copy_n(in.targets.data() + i * m + t0, len, out.targets.data() + i * len);
  }
  return out;
}

// Gradients with respect to the materialized edge weights.
struct EdgeGrads {
  Matrix low;
  Matrix high;
  Matrix cross;
  std::vector<double> kpi;
};

// Prediction losses and gradients over one block of samples, added to the
// running totals. inv_m is the reciprocal of the full sample count.
void accumulate_block(const LevelInput& low_in, const LevelInput& high_in, const LevelInput& kpi_in,
                      std::size_t p, std::size_t c, double inv_m, const TrainableParams& params,
                      const MaterializedGraph& mg, LossBreakdown& parts, TrainableParams& grad,
                      EdgeGrads& eg) {
  const std::size_t m = low_in.m();

  // Low level.
  const Matrix z0_low = temporal_mix(low_in.lags, params.low.temporal, m);
  const GnnCache low_gnn = gnn_forward(z0_low, mg.w_low, params.low.layers, m);
  const MlpCache low_mlp = mlp_forward(low_gnn.z_out, params.low.mlp, m);

  // High level, fed by aggregated low-level embeddings.
  const Matrix lag_high = temporal_mix(high_in.lags, params.high.temporal, m);
  const Matrix z0_high = inter_aggregate(low_gnn.z_out, mg.w_cross, lag_high, m);
  const GnnCache high_gnn = gnn_forward(z0_high, mg.w_high, params.high.layers, m);
  const MlpCache high_mlp = mlp_forward(high_gnn.z_out, params.high.mlp, m);

  // KPI head over kpi lags and KPI-weighted high-level embeddings.
  Matrix kpi_agg(1, m * c);
  for (std::size_t h = 0; h < params.g(); ++h)
    if (mg.w_kpi[h] != 0.0)
      kn::active().axpy(mg.w_kpi[h], high_gnn.z_out.data() + h * m * c, kpi_agg.data(), m * c);
  const Matrix z_kpi = concat_rows(kpi_in.lags, kpi_agg, m);
  const MlpCache kpi_mlp = mlp_forward(z_kpi, params.kpi_head, m);

  Matrix d_low_out, d_high_out, d_kpi_out;
  parts.low_mse += mse_and_grad(low_mlp.out, low_in.targets, inv_m, d_low_out);
  parts.high_mse += mse_and_grad(high_mlp.out, high_in.targets, inv_m, d_high_out);
  parts.kpi_mse += mse_and_grad(kpi_mlp.out, kpi_in.targets, inv_m, d_kpi_out);

  // Backward: KPI head.
  const Matrix dz_kpi = mlp_backward(z_kpi, kpi_mlp, params.kpi_head, d_kpi_out, m, grad.kpi_head);
  Matrix dz_kpi_lag, d_kpi_agg;
  split_rows(dz_kpi, m, p, dz_kpi_lag, d_kpi_agg);

  // High level.
  Matrix dz_high = mlp_backward(high_gnn.z_out, high_mlp, params.high.mlp, d_high_out, m, grad.high.mlp);
  for (std::size_t h = 0; h < params.g(); ++h) {
    const double* zh = high_gnn.z_out.data() + h * m * c;
    eg.kpi[h] += kn::active().dot(zh, d_kpi_agg.data(), m * c);
    if (mg.w_kpi[h] != 0.0)
      kn::active().axpy(mg.w_kpi[h], d_kpi_agg.data(), dz_high.data() + h * m * c, m * c);
  }
  const Matrix dz0_high = gnn_backward(high_gnn, mg.w_high, params.high.layers, std::move(dz_high), m,
                                       grad.high.layers, eg.high);
  Matrix d_lag_high, d_agg;
  split_rows(dz0_high, m, p, d_lag_high, d_agg);
  temporal_backward(high_in.lags, d_lag_high, m, grad.high.temporal);

  // Cross aggregation: agg = cross^T z_low.
  const std::size_t n = params.n_low();
  kn::gemm_nt(low_gnn.z_out.data(), d_agg.data(), eg.cross.data(), n, m * c, params.g());
  Matrix dz_low = mlp_backward(low_gnn.z_out, low_mlp, params.low.mlp, d_low_out, m, grad.low.mlp);
  kn::gemm_nn(mg.w_cross.data(), d_agg.data(), dz_low.data(), n, params.g(), m * c);

  const Matrix dz0_low = gnn_backward(low_gnn, mg.w_low, params.low.layers, std::move(dz_low), m,
                                      grad.low.layers, eg.low);
  temporal_backward(low_in.lags, dz0_low, m, grad.low.temporal);
}

// Samples per block: small enough that a block's activations stay in cache.
constexpr std::size_t block_samples = 128;

}  // namespace

LossResult total_loss(const ModelData& data, const TrainableParams& params,
                      const TrainConfig& cfg, const SupportMasks& masks) {
  const std::size_t m = data.m();
  const std::size_t p = data.p;
  const std::size_t c = cfg.embed_width;
  check_level(data.low, params.low, p, "low-level");
  check_level(data.high, params.high, p, "high-level");
  if (data.high.m() != m || data.kpi.m() != m)
    fail(ErrorCode::ShapeMismatch, "levels disagree on sample count");
  if (m == 0) fail(ErrorCode::ShapeMismatch, "no samples");

  LossResult res{{}, zero_params(params.n_low(), params.g(), cfg)};
  TrainableParams& grad = res.grad;
  auto& parts = res.parts;
  const MaterializedGraph mg = materialize(params, masks);
  const std::size_t n = params.n_low();
  EdgeGrads eg{Matrix(n, n), Matrix(params.g(), params.g()), Matrix(n, params.g()),
               std::vector<double>(params.g(), 0.0)};
  const double inv_m = 1.0 / static_cast<double>(m);

  if (m <= block_samples) {
    accumulate_block(data.low, data.high, data.kpi, p, c, inv_m, params, mg, parts, grad, eg);
  } else {
    for (std::size_t t0 = 0; t0 < m; t0 += block_samples) {
      const std::size_t t1 = std::min(m, t0 + block_samples);
      accumulate_block(slice(data.low, p, t0, t1), slice(data.high, p, t0, t1), slice(data.kpi, p, t0, t1), p,
                       c, inv_m, params, mg, parts, grad, eg);
    }
  }

  const auto acyc_low = causal_graph::acyclicity_penalty(mg.w_low);
  const auto acyc_high = causal_graph::acyclicity_penalty(mg.w_high);
  parts.h_low = acyc_low.h;
  parts.h_high = acyc_high.h;
  double l1 = 0.0;
  for (double v : mg.w_low.flat()) l1 += v;
  for (double v : mg.w_high.flat()) l1 += v;
  for (double v : mg.w_cross.flat()) l1 += v;
  for (double v : mg.w_kpi) l1 += v;
  parts.l1 = l1;
  parts.total = parts.low_mse + parts.high_mse + parts.kpi_mse + cfg.lambda1 * l1 +
                cfg.lambda2 * (parts.h_low + parts.h_high);
  if (!std::isfinite(parts.total)) fail(ErrorCode::NonFiniteLoss, "objective evaluated to a non-finite value");

  Matrix& dw_low = eg.low;
  Matrix& dw_high = eg.high;
  const Matrix& dw_cross = eg.cross;
  const std::vector<double>& dw_kpi = eg.kpi;
  // Regularizers on the materialized weights.
  for (std::size_t k = 0; k < dw_low.size(); ++k)
    dw_low.flat()[k] += cfg.lambda1 + cfg.lambda2 * acyc_low.grad.flat()[k];
  for (std::size_t k = 0; k < dw_high.size(); ++k)
    dw_high.flat()[k] += cfg.lambda1 + cfg.lambda2 * acyc_high.grad.flat()[k];
  for (std::size_t k = 0; k < dw_low.size(); ++k) dw_low.flat()[k] *= masks.low.flat()[k];

  auto gl = causal_graph::adjacency_backward(params.low.adj, dw_low);
  grad.low.adj.w_plus = std::move(gl.w_plus);
  grad.low.adj.w_minus = std::move(gl.w_minus);
  auto gh = causal_graph::adjacency_backward(params.high.adj, dw_high);
  grad.high.adj.w_plus = std::move(gh.w_plus);
  grad.high.adj.w_minus = std::move(gh.w_minus);

  for (std::size_t k = 0; k < dw_cross.size(); ++k) {
    const double x = params.cross.flat()[k];
    if (masks.cross.flat()[k] == 0.0 || x < 0.0) continue;
    const double t = std::tanh(x);
    grad.cross.flat()[k] = (dw_cross.flat()[k] + cfg.lambda1) * (1.0 - t * t);
  }
  for (std::size_t h = 0; h < params.g(); ++h) {
    const double x = params.kpi[h];
    if (masks.kpi[h] == 0.0 || x < 0.0) continue;
    const double t = std::tanh(x);
    grad.kpi[h] = (dw_kpi[h] + cfg.lambda1) * (1.0 - t * t);
  }
  return res;
}

}  // namespace inca::hier_gnn
