#include "inca/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "inca/core/error.hpp"
#include "inca/kernels/kernels.hpp"

namespace inca::propagation {

void PropagationConfig::validate() const {
  if (!(phi >= 0.0 && phi <= 1.0)) fail(ErrorCode::InvalidArgument, "phi must lie in [0, 1]");
  if (!(varphi >= 0.0 && varphi <= 1.0)) fail(ErrorCode::InvalidArgument, "varphi must lie in [0, 1]");
  if (!(tol > 0.0)) fail(ErrorCode::InvalidArgument, "tol must be positive");
}

namespace {

// Writes one row given the unnormalized same-level and cross-level weights.
void fill_row(Matrix& h, std::size_t row, std::span<const double> same, std::size_t same_off,
              std::span<const double> cross, std::size_t cross_off, double phi) {
  double s_same = 0.0, s_cross = 0.0;
  for (double v : same) s_same += v;
  for (double v : cross) s_cross += v;
  double share_same = 0.0, share_cross = 0.0;
  if (s_same > 0.0 && s_cross > 0.0) {
    share_same = 1.0 - phi;
    share_cross = phi;
  } else if (s_same > 0.0) {
    share_same = 1.0;
  } else if (s_cross > 0.0) {
    share_cross = 1.0;
  }
  for (std::size_t k = 0; k < same.size(); ++k)
    if (same[k] > 0.0) h(row, same_off + k) = share_same * same[k] / s_same;
  for (std::size_t k = 0; k < cross.size(); ++k)
    if (cross[k] > 0.0) h(row, cross_off + k) = share_cross * cross[k] / s_cross;
}

}  // namespace

Transition build_transition(const InterdependentCausalGraph& graph, double phi) {
  if (!(phi >= 0.0 && phi <= 1.0)) fail(ErrorCode::InvalidArgument, "phi must lie in [0, 1]");
  const std::size_t g = graph.g();
  const std::size_t n = graph.n_low();
  if (graph.w_cross.rows() != n || graph.w_cross.cols() != g || graph.w_kpi.size() != g)
    fail(ErrorCode::ShapeMismatch, "graph blocks disagree on dimensions");

  bool any = false;
  auto scan = [&](std::span<const double> vals) {
    for (double v : vals) {
      if (v < 0.0 || !std::isfinite(v)) fail(ErrorCode::InvalidArgument, "graph weights must be finite and >= 0");
      any = any || v > 0.0;
    }
  };
  scan(graph.w_low.flat());
  scan(graph.w_high.flat());
  scan(graph.w_cross.flat());
  scan(graph.w_kpi);
  if (!any) fail(ErrorCode::EmptyGraph, "every edge weight is zero");

  Transition out;
  TransitionMatrix& tm = out.matrix;
  tm.h = Matrix(g + n, g + n);
  tm.phi = phi;
  tm.g = g;
  tm.n_low = n;
  std::vector<double> same, cross;

  // High-level node i: transposed intra edges go to its parents j (w_high(j, i));
  // transposed cross edges go to the low-level nodes b feeding it (w_cross(b, i)).
  for (std::size_t i = 0; i < g; ++i) {
    same.assign(g, 0.0);
    cross.assign(n, 0.0);
    for (std::size_t j = 0; j < g; ++j) same[j] = graph.w_high(j, i);
    for (std::size_t b = 0; b < n; ++b) cross[b] = graph.w_cross(b, i);
    fill_row(tm.h, i, same, 0, cross, g, phi);
  }
  // Low-level node a: transposed intra edges go to its parents b. Cross edges
  // point from low to high, so after transposition no low-level node has a
  // cross-level exit and H_AG stays zero.
  for (std::size_t a = 0; a < n; ++a) {
    same.assign(n, 0.0);
    cross.assign(g, 0.0);
    for (std::size_t b = 0; b < n; ++b) same[b] = graph.w_low(b, a);
    fill_row(tm.h, g + a, same, g, cross, 0, phi);
  }
  tm.dangling.resize(g + n);
  for (std::size_t r = 0; r < g + n; ++r) {
    double s = 0.0;
    for (double v : tm.h.row(r)) s += v;
    tm.dangling[r] = !(s > 0.0);
  }

  out.restart.assign(g + n, 0.0);
  double total = 0.0;
  for (double v : graph.w_kpi) total += v;
  for (std::size_t i = 0; i < g; ++i)
    out.restart[i] = total > 0.0 ? graph.w_kpi[i] / total : 1.0 / static_cast<double>(g);
  return out;
}

RwrResult rwr(const TransitionMatrix& transition, std::span<const double> restart,
              const PropagationConfig& cfg) {
  cfg.validate();
  const std::size_t n = transition.size();
  if (restart.size() != n) fail(ErrorCode::ShapeMismatch, "restart vector length does not match H");
  double rsum = 0.0;
  for (double v : restart) {
    if (v < 0.0) fail(ErrorCode::InvalidArgument, "restart vector has negative mass");
    rsum += v;
  }
  if (std::abs(rsum - 1.0) > 1e-9) fail(ErrorCode::InvalidArgument, "restart vector must sum to 1");

  const auto& kt = kernels::active();
  const double walk = 1.0 - cfg.varphi;
  RwrResult res{std::vector<double>(restart.begin(), restart.end()), 0};
  std::vector<double> next(n);
  for (res.iterations = 1; res.iterations <= cfg.max_iters; ++res.iterations) {
    std::fill(next.begin(), next.end(), 0.0);
    double leaked = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double pi = res.p[i];
      if (pi == 0.0) continue;
      if (transition.dangling[i]) {
        leaked += pi;
        continue;
      }
      kt.axpy(walk * pi, transition.h.row(i).data(), next.data(), n);
    }
    for (std::size_t i = 0; i < n; ++i) next[i] += (walk * leaked + cfg.varphi) * restart[i];
    // Rounding guard only; the update preserves total mass exactly in theory.
    double s = 0.0;
    for (double v : next) s += v;
    if (std::abs(s - 1.0) > 1e-12)
      for (double& v : next) v /= s;
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff += std::abs(next[i] - res.p[i]);
    res.p.swap(next);
    if (diff <= cfg.tol) return res;
  }
  fail(ErrorCode::NoConvergence, "random walk did not converge in " + std::to_string(cfg.max_iters) + " iterations");
}

std::vector<double> min_max_normalize(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  if (out.empty()) return out;
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double a = *lo, b = *hi;
  if (!(b - a > 1e-15 * std::max(1.0, std::abs(b)))) {
    std::fill(out.begin(), out.end(), 0.5);
    return out;
  }
  for (double& x : out) x = (x - a) / (b - a);
  return out;
}

std::vector<double> topological_scores(const InterdependentCausalGraph& graph,
                                       const PropagationConfig& cfg) {
  const Transition t = build_transition(graph, cfg.phi);
  const RwrResult r = rwr(t.matrix, t.restart, cfg);
  return min_max_normalize(std::span(r.p).subspan(graph.g()));
}

}  // namespace inca::propagation
