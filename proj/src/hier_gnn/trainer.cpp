#include "inca/hier_gnn/trainer.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <string>
#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "inca/core/error.hpp"
#include "inca/core/io.hpp"
#include "inca/core/rng.hpp"

namespace inca::hier_gnn {

Bounds make_bounds(const TrainableParams& shape, const SupportMasks& masks) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Mark the nonnegative blocks by packing a sentinel copy of the shape.
  TrainableParams lo = shape;
  TrainableParams hi = shape;
  for_each_block(lo, [&](std::span<double> b) { std::fill(b.begin(), b.end(), -inf); });
  for_each_block(hi, [&](std::span<double> b) { std::fill(b.begin(), b.end(), inf); });
  for (std::size_t k = 0; k < lo.cross.size(); ++k) {
    lo.cross.flat()[k] = 0.0;
    if (masks.cross.flat()[k] == 0.0) hi.cross.flat()[k] = 0.0;
  }
  for (std::size_t h = 0; h < lo.kpi.size(); ++h) {
    lo.kpi[h] = 0.0;
    if (masks.kpi[h] == 0.0) hi.kpi[h] = 0.0;
  }
  return {pack(lo), pack(hi)};
}

namespace {

// Large per-evaluation buffers stay on the heap.
void tune_allocator() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
  });
#endif
}

}  // namespace

FitResult fit_prepared(const ModelData& data, const std::string& metric_name, const TrainConfig& cfg) {
  cfg.validate();
  tune_allocator();
  const std::size_t n = data.low.d();
  const std::size_t g = data.high.d();
  const SupportMasks masks = make_masks(data, cfg);
  TrainableParams params = init_params(n, g, cfg);
  const Bounds bounds = make_bounds(params, masks);

  TrainableParams scratch = params;
  Objective objective = [&](std::span<const double> x, std::span<double> grad) {
    unpack(x, scratch);
    LossResult r = total_loss(data, scratch, cfg, masks);
    const std::vector<double> flat = pack(r.grad);
    std::copy(flat.begin(), flat.end(), grad.begin());
    return r.parts.total;
  };

  OptimizerOptions opts;
  opts.max_iters = cfg.max_iters;
  opts.grad_tol = cfg.grad_tol;
  opts.ftol = cfg.ftol;
  opts.memory = cfg.lbfgs_memory;
  opts.adam_step = cfg.adam_step;
  auto run = [&](std::vector<double> x0, std::size_t iters) {
    OptimizerOptions o = opts;
    o.max_iters = iters;
    return cfg.optimizer == OptimizerKind::Lbfgs ? minimize_lbfgs_box(objective, std::move(x0), bounds, o)
                                                 : minimize_adam(objective, std::move(x0), bounds, o);
  };

  OptimizerResult opt;
  const std::size_t screen = std::min(cfg.screen_iters, cfg.max_iters);
  if (cfg.restarts <= 1 || screen == 0) {
    opt = run(pack(params), cfg.max_iters);
  } else {
    bool have = false;
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
      TrainConfig rc = cfg;
      if (r > 0) rc.seed = stream_seed(cfg.seed, "restart/" + std::to_string(r));
      OptimizerResult cand = run(pack(init_params(n, g, rc)), screen);
      if (!have || cand.f < opt.f) {
        opt = std::move(cand);
        have = true;
      }
    }
    if (!opt.converged && cfg.max_iters > screen) {
      OptimizerResult rest = run(opt.x, cfg.max_iters - screen);
      rest.iterations += opt.iterations;
      opt.trace.insert(opt.trace.end(), rest.trace.begin(), rest.trace.end());
      rest.trace = std::move(opt.trace);
      opt = std::move(rest);
    }
  }

  unpack(opt.x, params);
  FitResult fit;
  fit.final_loss = total_loss(data, params, cfg, masks).parts;
  fit.raw = materialize(params, masks);
  fit.params = std::move(params);
  fit.trace = std::move(opt.trace);
  fit.iterations = opt.iterations;
  fit.converged = opt.converged;

  auto& graph = fit.graph;
  graph.metric_name = metric_name;
  graph.w_low = causal_graph::prune_to_dag(fit.raw.w_low, cfg.w_min);
  graph.w_high = causal_graph::prune_to_dag(fit.raw.w_high, cfg.w_min);
  graph.w_cross = fit.raw.w_cross;
  for (double& v : graph.w_cross.flat())
    if (v < cfg.w_min) v = 0.0;
  graph.w_kpi = fit.raw.w_kpi;
  for (double& v : graph.w_kpi)
    if (v < cfg.w_min) v = 0.0;
  fit.h_low = causal_graph::acyclicity_penalty(graph.w_low).h;
  fit.h_high = causal_graph::acyclicity_penalty(graph.w_high).h;
  if (fit.h_low > cfg.eps_acyc || fit.h_high > cfg.eps_acyc)
    fail(ErrorCode::NonFinite, "pruned graph still violates the acyclicity threshold");
  return fit;
}

FitResult fit_interdependent(const MetricBundle& metric, const KpiSeries& kpi,
                             const TopologyDescriptor& topo, const TrainConfig& cfg) {
  cfg.validate();
  const ModelData data = prepare_data(metric, kpi, topo, cfg.p);
  return fit_prepared(data, metric.metric_name, cfg);
}

Json config_to_json(const TrainConfig& cfg) {
  Json j;
  j["p"] = cfg.p;
  j["layers"] = cfg.layers;
  j["embed_width"] = cfg.embed_width;
  j["mlp_hidden"] = cfg.mlp_hidden;
  j["lambda1"] = cfg.lambda1;
  j["lambda2"] = cfg.lambda2;
  j["optimizer"] = cfg.optimizer == OptimizerKind::Lbfgs ? "lbfgs" : "adam";
  j["max_iters"] = cfg.max_iters;
  j["grad_tol"] = cfg.grad_tol;
  j["ftol"] = cfg.ftol;
  j["lbfgs_memory"] = cfg.lbfgs_memory;
  j["adam_step"] = cfg.adam_step;
  j["seed"] = cfg.seed;
  j["init_scale"] = cfg.init_scale;
  j["restarts"] = cfg.restarts;
  j["screen_iters"] = cfg.screen_iters;
  j["cross_support"] = cfg.cross_support == CrossSupport::Dense ? "dense" : "affiliation";
  j["low_adjacency"] = cfg.low_adjacency == LowAdjacency::Global ? "global" : "block_diagonal";
  j["inter_level"] = cfg.inter_level;
  j["w_min"] = cfg.w_min;
  j["eps_acyc"] = cfg.eps_acyc;
  return j;
}

void config_from_json(const Json& j, TrainConfig& cfg) {
  try {
    if (j.contains("p")) cfg.p = j.at("p").get<std::size_t>();
    if (j.contains("layers")) cfg.layers = j.at("layers").get<std::size_t>();
    if (j.contains("embed_width")) cfg.embed_width = j.at("embed_width").get<std::size_t>();
    if (j.contains("mlp_hidden")) cfg.mlp_hidden = j.at("mlp_hidden").get<std::size_t>();
    if (j.contains("lambda1")) cfg.lambda1 = j.at("lambda1").get<double>();
    if (j.contains("lambda2")) cfg.lambda2 = j.at("lambda2").get<double>();
    if (j.contains("optimizer")) {
      const auto s = j.at("optimizer").get<std::string>();
      if (s == "lbfgs") cfg.optimizer = OptimizerKind::Lbfgs;
      else if (s == "adam") cfg.optimizer = OptimizerKind::Adam;
      else fail(ErrorCode::Parse, "optimizer must be 'lbfgs' or 'adam'");
    }
    if (j.contains("max_iters")) cfg.max_iters = j.at("max_iters").get<std::size_t>();
    if (j.contains("grad_tol")) cfg.grad_tol = j.at("grad_tol").get<double>();
    if (j.contains("ftol")) cfg.ftol = j.at("ftol").get<double>();
    if (j.contains("lbfgs_memory")) cfg.lbfgs_memory = j.at("lbfgs_memory").get<std::size_t>();
    if (j.contains("adam_step")) cfg.adam_step = j.at("adam_step").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("init_scale")) cfg.init_scale = j.at("init_scale").get<double>();
    if (j.contains("restarts")) cfg.restarts = j.at("restarts").get<std::size_t>();
    if (j.contains("screen_iters")) cfg.screen_iters = j.at("screen_iters").get<std::size_t>();
    if (j.contains("cross_support")) {
      const auto s = j.at("cross_support").get<std::string>();
      if (s == "dense") cfg.cross_support = CrossSupport::Dense;
      else if (s == "affiliation") cfg.cross_support = CrossSupport::Affiliation;
      else fail(ErrorCode::Parse, "cross_support must be 'dense' or 'affiliation'");
    }
    if (j.contains("low_adjacency")) {
      const auto s = j.at("low_adjacency").get<std::string>();
      if (s == "global") cfg.low_adjacency = LowAdjacency::Global;
      else if (s == "block_diagonal") cfg.low_adjacency = LowAdjacency::BlockDiagonal;
      else fail(ErrorCode::Parse, "low_adjacency must be 'global' or 'block_diagonal'");
    }
    if (j.contains("inter_level")) cfg.inter_level = j.at("inter_level").get<bool>();
    if (j.contains("w_min")) cfg.w_min = j.at("w_min").get<double>();
    if (j.contains("eps_acyc")) cfg.eps_acyc = j.at("eps_acyc").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("train config: ") + e.what());
  }
}

Json fit_to_json(const FitResult& fit, const TopologyDescriptor& topo, const TrainConfig& cfg) {
  Json j = io::graph_to_json(fit.graph, topo);
  j["h_low"] = fit.h_low;
  j["h_high"] = fit.h_high;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["final_loss"] = fit.final_loss.total;
  j["config"] = config_to_json(cfg);
  return j;
}

}  // namespace inca::hier_gnn
