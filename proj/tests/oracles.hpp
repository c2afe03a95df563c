#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance run. Written from the definitions, not from the library code.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "inca/core/matrix.hpp"
#include "inca/eval_metrics.hpp"
#include "inca/evt.hpp"
#include "inca/hier_gnn/model.hpp"
#include "inca/causal_graph.hpp"
#include "inca/propagation.hpp"

namespace oracle {

using inca::Matrix;

// Random weights >= 0.05 on the upper triangle of a random node order.
inline Matrix random_dag(std::size_t d, std::mt19937_64& rng, double density) {
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix w(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a + 1; b < d; ++b)
      if (u(rng) < density) w(order[a], order[b]) = 0.05 + u(rng);
  return w;
}

// A DAG plus one directed cycle of random length; cycle edges are drawn from
// [min_weight, 1].
inline Matrix random_cyclic(std::size_t d, std::mt19937_64& rng, double density, double min_weight) {
  Matrix w = random_dag(d, rng, density);
  std::vector<std::size_t> nodes(d);
  std::iota(nodes.begin(), nodes.end(), 0);
  std::shuffle(nodes.begin(), nodes.end(), rng);
  const std::size_t len = std::uniform_int_distribution<std::size_t>(2, d)(rng);
  std::uniform_real_distribution<double> cw(min_weight, 1.0);
  for (std::size_t k = 0; k < len; ++k) w(nodes[k], nodes[(k + 1) % len]) = cw(rng);
  return w;
}

// p = (1 - varphi) H'^T p + varphi r by LU, where H' returns the mass of
// dangling rows through r.
inline std::vector<double> rwr_dense(const inca::propagation::TransitionMatrix& tm, const std::vector<double>& r,
                                     double varphi) {
  const std::size_t n = tm.size();
  Eigen::MatrixXd h(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) h(i, j) = tm.dangling[i] ? r[j] : tm.h(i, j);
  Eigen::VectorXd rv(n);
  for (std::size_t i = 0; i < n; ++i) rv(i) = r[i];
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - (1.0 - varphi) * h.transpose();
  const Eigen::VectorXd p = a.partialPivLu().solve(varphi * rv);
  return {p.data(), p.data() + n};
}

inline inca::InterdependentCausalGraph random_graph(std::size_t n, std::size_t g, std::mt19937_64& rng,
                                                    double density) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  inca::InterdependentCausalGraph gr{"m", Matrix(n, n), Matrix(g, g), Matrix(n, g), std::vector<double>(g, 0.0)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u(rng) < density) (u(rng) < 0.5 ? gr.w_low(i, j) : gr.w_low(j, i)) = 0.05 + u(rng);
  for (std::size_t i = 0; i < g; ++i)
    for (std::size_t j = i + 1; j < g; ++j)
      if (u(rng) < density) gr.w_high(i, j) = 0.05 + u(rng);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t h = 0; h < g; ++h)
      if (u(rng) < density) gr.w_cross(b, h) = 0.05 + u(rng);
  for (std::size_t h = 0; h < g; ++h)
    if (u(rng) < 0.7) gr.w_kpi[h] = 0.05 + u(rng);
  gr.w_kpi[0] = std::max(gr.w_kpi[0], 0.3);
  return gr;
}

inline double naive_pr(const std::vector<inca::eval_metrics::FaultOutcome>& fs, std::size_t k) {
  double total = 0.0;
  for (const auto& f : fs) {
    int hits = 0;
    for (std::size_t i = 0; i < k && i < f.ranking.size(); ++i) hits += f.truth.count(f.ranking[i]) ? 1 : 0;
    total += double(hits) / double(std::min(k, f.truth.size()));
  }
  return total / double(fs.size());
}

inline double naive_map(const std::vector<inca::eval_metrics::FaultOutcome>& fs, std::size_t k) {
  double total = 0.0;
  for (std::size_t j = 1; j <= k; ++j) total += naive_pr(fs, j);
  return total / double(k);
}

inline double naive_mrr(const std::vector<inca::eval_metrics::FaultOutcome>& fs) {
  double total = 0.0;
  for (const auto& f : fs)
    for (std::size_t i = 0; i < f.ranking.size(); ++i)
      if (f.truth.count(f.ranking[i])) {
        total += 1.0 / double(i + 1);
        break;
      }
  return total / double(fs.size());
}

inline std::vector<inca::eval_metrics::FaultOutcome> random_outcomes(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nf(1, 6), ne(1, 12);
  std::vector<inca::eval_metrics::FaultOutcome> out(nf(rng));
  for (auto& f : out) {
    const int n = ne(rng);
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back("e" + std::to_string(i));
    std::shuffle(ids.begin(), ids.end(), rng);
    f.ranking.assign(ids.begin(), ids.begin() + std::uniform_int_distribution<int>(0, n)(rng));
    std::shuffle(ids.begin(), ids.end(), rng);
    f.truth.insert(ids.begin(), ids.begin() + std::uniform_int_distribution<int>(1, n)(rng));
  }
  return out;
}

inline std::vector<double> gpd_sample(std::size_t n, double zeta, double delta, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) {
    const double w = 1.0 - u(rng);
    v = zeta == 0.0 ? -delta * std::log(w) : delta / zeta * (std::pow(w, -zeta) - 1.0);
  }
  return x;
}

inline double boundary_formula(double eta, double zeta, double delta, double q, double n, double n_eta) {
  if (zeta == 0.0) return eta + delta * std::log(n_eta / (q * n));
  return eta + delta / zeta * (std::pow(q * n / n_eta, -zeta) - 1.0);
}

struct Replay {
  std::vector<double> anomalies;
  std::vector<double> peaks;
  double boundary = 0.0;
};

// Streams the segment, refitting the tail from the full peak set and
// recomputing the boundary from scratch after every new peak.
inline Replay replay_detection(const std::vector<double>& segment, const inca::evt::EvtState& s0,
                               const inca::evt::EvtConfig& cfg) {
  Replay out{{}, s0.peaks, s0.boundary};
  double n = double(s0.n);
  for (double v : segment) {
    n += 1.0;
    if (v > out.boundary) {
      out.anomalies.push_back(v);
    } else if (v > s0.eta) {
      out.peaks.push_back(v - s0.eta);
      double zeta = 0.0, delta = 0.0;
      if (out.peaks.size() >= cfg.min_peaks) {
        const auto f = inca::evt::fit_gpd(out.peaks);
        zeta = f.zeta;
        delta = f.delta;
      } else {
        delta = std::accumulate(out.peaks.begin(), out.peaks.end(), 0.0) / double(out.peaks.size());
      }
      out.boundary = boundary_formula(s0.eta, zeta, delta, cfg.q, n, double(out.peaks.size()));
    }
  }
  return out;
}

// Worst relative error of the analytic gradient against central differences;
// magnitudes below 1e-4 compare absolutely.
inline double total_loss_fd_error(const inca::hier_gnn::ModelData& data, const inca::hier_gnn::TrainableParams& params,
                                  const inca::hier_gnn::TrainConfig& cfg) {
  using namespace inca::hier_gnn;
  const SupportMasks masks = make_masks(data, cfg);
  const std::vector<double> grad = pack(total_loss(data, params, cfg, masks).grad);
  std::vector<double> x = pack(params);
  TrainableParams probe = params;
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double x0 = x[k];
    x[k] = x0 + h;
    unpack(x, probe);
    const double fp = total_loss(data, probe, cfg, masks).parts.total;
    x[k] = x0 - h;
    unpack(x, probe);
    const double fm = total_loss(data, probe, cfg, masks).parts.total;
    x[k] = x0;
    const double fd = (fp - fm) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad[k]) / std::max({std::abs(fd), std::abs(grad[k]), 1e-4}));
  }
  return worst;
}

inline double acyclicity_fd_error(const Matrix& w) {
  const auto res = inca::causal_graph::acyclicity_penalty(w);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    Matrix a = w, b = w;
    a.flat()[k] += h;
    b.flat()[k] -= h;
    const double fd =
        (inca::causal_graph::acyclicity_penalty(a).h - inca::causal_graph::acyclicity_penalty(b).h) / (2 * h);
    worst = std::max(worst, std::abs(fd - res.grad.flat()[k]) / std::max({std::abs(fd), 1e-4}));
  }
  return worst;
}

inline inca::hier_gnn::LevelInput random_input(std::size_t d, std::size_t m, std::size_t p, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  inca::hier_gnn::LevelInput in{Matrix(d, m * p), Matrix(d, m)};
  for (double& v : in.lags.flat()) v = nd(rng);
  for (double& v : in.targets.flat()) v = nd(rng);
  return in;
}

inline inca::hier_gnn::ModelData random_model_data(std::size_t n, std::size_t g, std::size_t m, std::size_t p,
                                                   std::mt19937_64& rng) {
  inca::hier_gnn::ModelData d{random_input(n, m, p, rng), random_input(g, m, p, rng), random_input(1, m, p, rng), p,
                              {}};
  for (std::size_t i = 0; i < n; ++i) d.affiliation.push_back(i * g / n);
  return d;
}

inline inca::hier_gnn::TrainableParams random_params(std::size_t n, std::size_t g,
                                                     const inca::hier_gnn::TrainConfig& cfg, std::mt19937_64& rng,
                                                     double scale) {
  auto p = inca::hier_gnn::zero_params(n, g, cfg);
  std::uniform_real_distribution<double> u(-scale, scale);
  inca::hier_gnn::for_each_block(p, [&](std::span<double> b) {
    for (double& v : b) v = u(rng);
  });
  for (double& v : p.cross.flat()) v = std::abs(v) + 0.05;
  for (double& v : p.kpi) v = std::abs(v) + 0.05;
  return p;
}

}  // namespace oracle
