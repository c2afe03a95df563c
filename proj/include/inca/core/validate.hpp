#pragma once

#include <string>
#include <vector>

#include "inca/core/types.hpp"

namespace inca {

// Both level panels of one metric, columns reordered to topology index order.
struct MetricBundle {
  std::string metric_name;
  MetricPanel low;
  MetricPanel high;

  friend bool operator==(const MetricBundle&, const MetricBundle&) = default;
};

struct ValidatedBundle {
  TopologyDescriptor topology;
  std::vector<MetricBundle> metrics;  // sorted by metric name
  KpiSeries kpi;

  std::vector<MetricPanel> panels() const;
  std::size_t steps() const noexcept { return kpi.values.size(); }

  friend bool operator==(const ValidatedBundle&, const ValidatedBundle&) = default;
};

// Checks that every panel references known entities of a single level, that
// each metric covers both levels completely, and that all series share one
// strictly increasing uniform time grid.
ValidatedBundle validate_topology(const TopologyDescriptor& topo,
                                  const std::vector<MetricPanel>& panels, const KpiSeries& kpi);

void check_time_grid(const std::vector<std::int64_t>& timestamps);

}  // namespace inca
