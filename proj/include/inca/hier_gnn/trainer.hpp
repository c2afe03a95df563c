#pragma once

#include <vector>

#include "inca/core/report.hpp"
#include "inca/core/types.hpp"
#include "inca/core/validate.hpp"
#include "inca/hier_gnn/model.hpp"
#include "inca/hier_gnn/optimizer.hpp"

namespace inca::hier_gnn {

struct FitResult {
  InterdependentCausalGraph graph;  // pruned, acyclic
  MaterializedGraph raw;            // before pruning
  TrainableParams params;
  LossBreakdown final_loss;
  std::vector<double> trace;
  std::size_t iterations = 0;
  bool converged = false;
  double h_low = 0.0;   // after pruning
  double h_high = 0.0;
};

// Learns the interdependent causal graph of one metric.
FitResult fit_interdependent(const MetricBundle& metric, const KpiSeries& kpi,
                             const TopologyDescriptor& topo, const TrainConfig& cfg);
FitResult fit_prepared(const ModelData& data, const std::string& metric_name, const TrainConfig& cfg);

Bounds make_bounds(const TrainableParams& shape, const SupportMasks& masks);

Json config_to_json(const TrainConfig& cfg);
void config_from_json(const Json& j, TrainConfig& cfg);

// Graph JSON plus the config snapshot and post-pruning acyclicity values.
Json fit_to_json(const FitResult& fit, const TopologyDescriptor& topo, const TrainConfig& cfg);

}  // namespace inca::hier_gnn
