#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "inca/causal_graph.hpp"
#include "inca/core/matrix.hpp"
#include "inca/core/validate.hpp"
#include "inca/lagprep.hpp"

namespace inca::hier_gnn {

enum class OptimizerKind { Lbfgs, Adam };
enum class CrossSupport { Dense, Affiliation };
enum class LowAdjacency { Global, BlockDiagonal };

struct TrainConfig {
  std::size_t p = 2;
  std::size_t layers = 2;
  std::size_t embed_width = 4;
  std::size_t mlp_hidden = 4;  // 2 * p
  double lambda1 = 0.02;
  double lambda2 = 10.0;
  OptimizerKind optimizer = OptimizerKind::Lbfgs;
  std::size_t max_iters = 2000;
  double grad_tol = 1e-6;
  double ftol = 2.2e-9;
  std::size_t lbfgs_memory = 10;
  double adam_step = 1e-2;
  std::uint64_t seed = 0;
  double init_scale = 0.1;
  // Independent initializations screened for screen_iters iterations each;
  // the one with the lowest objective is trained to max_iters.
  std::size_t restarts = 3;
  std::size_t screen_iters = 200;
  CrossSupport cross_support = CrossSupport::Dense;
  LowAdjacency low_adjacency = LowAdjacency::Global;
  // When false the cross-level and KPI edges are frozen at zero.
  bool inter_level = true;
  double w_min = 0.01;
  double eps_acyc = 1e-8;

  void validate() const;
};

// Shared two-layer perceptron applied row-wise: out = relu(z w1 + b1) . w2 + b2[node].
struct Mlp {
  Matrix w1;                // in x hidden
  std::vector<double> b1;   // hidden
  std::vector<double> w2;   // hidden
  std::vector<double> b2;   // one output bias per node
};

struct LevelParams {
  causal_graph::AdjacencyParams adj;
  Matrix temporal;            // d x (p * p): row i is node i's p x p lag mixing
  std::vector<Matrix> layers; // layer l: (2 * in_l) x embed_width
  Mlp mlp;
};

struct TrainableParams {
  LevelParams low;
  LevelParams high;
  Matrix cross;              // n_low x g, nonnegative; materialized as tanh(cross)
  std::vector<double> kpi;   // g, nonnegative; materialized as tanh(kpi)
  Mlp kpi_head;

  std::size_t n_low() const noexcept { return low.adj.dim(); }
  std::size_t g() const noexcept { return high.adj.dim(); }
};

// Shape of every trainable block for a system with n_low / g entities.
TrainableParams zero_params(std::size_t n_low, std::size_t g, const TrainConfig& cfg);
TrainableParams init_params(std::size_t n_low, std::size_t g, const TrainConfig& cfg);

// Flat views over all blocks in a fixed order, for the optimizer.
std::size_t param_count(const TrainableParams& params);
std::vector<double> pack(const TrainableParams& params);
void unpack(std::span<const double> flat, TrainableParams& params);
void for_each_block(TrainableParams& params, const std::function<void(std::span<double>)>& fn);

// Node-major inputs: row i holds node i's lag vectors for all m samples,
// i.e. entry [t * p + k] is x_{t-1-k, i}.
struct LevelInput {
  Matrix lags;     // d x (m * p)
  Matrix targets;  // d x m

  std::size_t d() const noexcept { return lags.rows(); }
  std::size_t m() const noexcept { return targets.cols(); }
};

LevelInput to_level_input(const lagprep::LagTensor& lag);

struct ModelData {
  LevelInput low;
  LevelInput high;
  LevelInput kpi;  // one row
  std::size_t p = 0;
  std::vector<std::size_t> affiliation;

  std::size_t m() const noexcept { return low.m(); }
};

// Standardizes both panels and the KPI, then builds the lag inputs.
ModelData prepare_data(const MetricBundle& metric, const KpiSeries& kpi,
                       const TopologyDescriptor& topo, std::size_t p);

// Entry masks restricting which adjacency / cross entries may be nonzero.
struct SupportMasks {
  Matrix low;    // n_low x n_low, 1 = allowed
  Matrix cross;  // n_low x g
  std::vector<double> kpi;
};
SupportMasks make_masks(const ModelData& data, const TrainConfig& cfg);

// Intra-level forward for one level: m x d predictions.
Matrix intra_forward(const lagprep::LagTensor& lag, const Matrix& w, const LevelParams& params);

// z_high^(0) for every high-level node: per time row, the temporally mixed
// lag block (width p) followed by sum_i cross(i, g) * low_embed_i (width c).
// low_embed is n_low x (m * c), high_lag is g x (m * p); result g x (m * (p + c)).
Matrix inter_aggregate(const Matrix& low_embed, const Matrix& cross, const Matrix& high_lag,
                       std::size_t m);

struct LossBreakdown {
  double low_mse = 0.0;
  double high_mse = 0.0;
  double kpi_mse = 0.0;
  double l1 = 0.0;
  double h_low = 0.0;
  double h_high = 0.0;
  double total = 0.0;
};

struct LossResult {
  LossBreakdown parts;
  TrainableParams grad;
};

// Materialized adjacency matrices implied by a parameter set.
struct MaterializedGraph {
  Matrix w_low;
  Matrix w_high;
  Matrix w_cross;
  std::vector<double> w_kpi;
};
MaterializedGraph materialize(const TrainableParams& params, const SupportMasks& masks);

// Full objective: the three prediction errors, L1 on all four edge sets and
// the acyclicity penalty on both intra-level adjacencies, with gradients.
LossResult total_loss(const ModelData& data, const TrainableParams& params,
                      const TrainConfig& cfg, const SupportMasks& masks);

}  // namespace inca::hier_gnn
