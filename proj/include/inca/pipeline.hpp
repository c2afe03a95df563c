#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "inca/core/report.hpp"
#include "inca/core/types.hpp"
#include "inca/core/validate.hpp"
#include "inca/eval_metrics.hpp"
#include "inca/evt.hpp"
#include "inca/hier_gnn/model.hpp"
#include "inca/hier_gnn/trainer.hpp"
#include "inca/propagation.hpp"
#include "inca/ranking.hpp"

namespace inca::pipeline {

struct LocalizeConfig {
  hier_gnn::TrainConfig train;
  propagation::PropagationConfig propagation;
  evt::EvtConfig evt;
  ranking::IntegrationConfig integration;
  bool allow_nonconverged = false;
  std::size_t threads = 0;  // 0: INCA_THREADS or hardware concurrency

  void validate() const;
};

Json config_to_json(const LocalizeConfig& cfg);
// Overlays the fields present in `j`; unknown keys raise Parse.
void config_from_json(const Json& j, LocalizeConfig& cfg);

// Worker cap: explicit value, else INCA_THREADS, else hardware concurrency.
std::size_t worker_count(std::size_t requested);

struct MetricFit {
  std::string metric_name;
  hier_gnn::FitResult fit;
  std::vector<double> topological;  // per low-level entity, min-max normalized
};

// One graph per metric, fitted in parallel.
std::vector<MetricFit> fit_all(const ValidatedBundle& data, const LocalizeConfig& cfg);

// Per-entity individual scores for one fault, averaged across metrics and
// min-max normalized. Detection covers the fault window when one is given.
std::vector<double> individual_scores(const ValidatedBundle& data, const LocalizeConfig& cfg,
                                      const std::optional<TimeWindow>& window);

// Mean of the per-metric topological vectors, min-max normalized.
std::vector<double> fused_topological(const std::vector<MetricFit>& fits);

RcaReport build_report(const std::string& fault_id, const TopologyDescriptor& topo,
                       const std::vector<double>& topological, const std::vector<double>& individual,
                       const LocalizeConfig& cfg);

struct LocalizeResult {
  std::vector<RcaReport> reports;
  std::vector<MetricFit> fits;
};

// Full pipeline; one report per fault label (or a single "all" report over the
// whole series when there are none). Throws DidNotConverge unless allowed.
LocalizeResult localize(const ValidatedBundle& data, const std::vector<FaultLabel>& faults,
                        const LocalizeConfig& cfg);

Json reports_to_json(const std::vector<RcaReport>& reports);
std::vector<RcaReport> reports_from_json(const Json& j);
Json graphs_to_json(const std::vector<MetricFit>& fits, const TopologyDescriptor& topo,
                    const hier_gnn::TrainConfig& cfg);

// Pairs reports with labels by fault id; throws InvalidArgument on any mismatch.
std::vector<eval_metrics::FaultOutcome> match_outcomes(const std::vector<RcaReport>& reports,
                                                       const std::vector<FaultLabel>& labels);
Json evaluate_outcomes(const std::vector<eval_metrics::FaultOutcome>& outcomes);

std::string render_markdown(const std::vector<RcaReport>& reports);

}  // namespace inca::pipeline
