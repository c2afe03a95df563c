#include "inca/core/validate.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "inca/core/error.hpp"

namespace inca {

std::vector<MetricPanel> ValidatedBundle::panels() const {
  std::vector<MetricPanel> out;
  for (const auto& m : metrics) {
    out.push_back(m.low);
    out.push_back(m.high);
  }
  return out;
}

void check_time_grid(const std::vector<std::int64_t>& timestamps) {
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (timestamps[i] <= timestamps[i - 1])
      fail(ErrorCode::NonMonotoneTimestamps,
           "timestamp " + std::to_string(timestamps[i]) + " at row " + std::to_string(i) +
               " does not increase");
  }
  if (timestamps.size() < 3) return;
  const std::int64_t step = timestamps[1] - timestamps[0];
  for (std::size_t i = 2; i < timestamps.size(); ++i) {
    if (timestamps[i] - timestamps[i - 1] != step)
      fail(ErrorCode::NonUniformTimestamps,
           "grid step changes at row " + std::to_string(i) + "; resample before loading");
  }
}

namespace {

MetricPanel reorder(const MetricPanel& panel, const std::vector<std::string>& ids,
                    const std::vector<std::size_t>& source_col) {
  MetricPanel out{panel.metric_name, ids, panel.timestamps, Matrix(panel.steps(), ids.size())};
  for (std::size_t r = 0; r < panel.steps(); ++r)
    for (std::size_t j = 0; j < ids.size(); ++j) out.values(r, j) = panel.values(r, source_col[j]);
  return out;
}

}  // namespace

ValidatedBundle validate_topology(const TopologyDescriptor& topo,
                                  const std::vector<MetricPanel>& panels, const KpiSeries& kpi) {
  if (kpi.timestamps.size() != kpi.values.size())
    fail(ErrorCode::LengthMismatch, "kpi timestamps and values differ in length");
  check_time_grid(kpi.timestamps);
  for (double v : kpi.values)
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "kpi contains a non-finite value");

  struct Pair {
    const MetricPanel* low = nullptr;
    const MetricPanel* high = nullptr;
  };
  std::map<std::string, Pair> by_metric;

  for (const auto& panel : panels) {
    if (panel.values.cols() != panel.entity_ids.size())
      fail(ErrorCode::LengthMismatch, "panel '" + panel.metric_name + "' header/column count differ");
    if (panel.values.rows() != panel.timestamps.size())
      fail(ErrorCode::LengthMismatch, "panel '" + panel.metric_name + "' row/timestamp count differ");
    if (panel.entity_ids.empty())
      fail(ErrorCode::LengthMismatch, "panel '" + panel.metric_name + "' has no entities");

    std::optional<Level> level;
    for (const auto& id : panel.entity_ids) {
      auto l = topo.level_of(id);
      if (!l) fail(ErrorCode::UnknownEntity, "panel '" + panel.metric_name + "' references '" + id + "'");
      if (level && *level != *l)
        fail(ErrorCode::UnknownEntity,
             "panel '" + panel.metric_name + "' mixes levels at '" + id + "'");
      level = l;
    }
    if (panel.steps() != kpi.values.size())
      fail(ErrorCode::LengthMismatch, "panel '" + panel.metric_name + "' has " +
                                          std::to_string(panel.steps()) + " rows, kpi has " +
                                          std::to_string(kpi.values.size()));
    check_time_grid(panel.timestamps);
    if (panel.timestamps != kpi.timestamps)
      fail(ErrorCode::LengthMismatch, "panel '" + panel.metric_name + "' is not aligned with the kpi grid");
    for (double v : panel.values.flat())
      if (!std::isfinite(v))
        fail(ErrorCode::NonFinite, "panel '" + panel.metric_name + "' contains a non-finite value");

    auto& slot = by_metric[panel.metric_name];
    auto& target = *level == Level::Low ? slot.low : slot.high;
    if (target != nullptr)
      fail(ErrorCode::InvalidTopology, "duplicate " + std::string(to_string(*level)) +
                                           "-level panel for metric '" + panel.metric_name + "'");
    target = &panel;
  }
  if (by_metric.empty()) fail(ErrorCode::InvalidTopology, "no metric panels");

  ValidatedBundle bundle{topo, {}, kpi};
  for (const auto& [name, pair] : by_metric) {
    if (pair.low == nullptr || pair.high == nullptr)
      fail(ErrorCode::InvalidTopology, "metric '" + name + "' needs both a low- and a high-level panel");

    auto columns = [&](const MetricPanel& p, const std::vector<std::string>& ids) {
      std::vector<std::size_t> src(ids.size(), ids.size());
      for (std::size_t c = 0; c < p.entity_ids.size(); ++c) {
        auto it = std::find(ids.begin(), ids.end(), p.entity_ids[c]);
        auto k = static_cast<std::size_t>(it - ids.begin());
        if (src[k] != ids.size())
          fail(ErrorCode::InvalidTopology, "metric '" + name + "' repeats column '" + p.entity_ids[c] + "'");
        src[k] = c;
      }
      for (std::size_t k = 0; k < ids.size(); ++k)
        if (src[k] == ids.size())
          fail(ErrorCode::LengthMismatch, "metric '" + name + "' lacks entity '" + ids[k] + "'");
      return src;
    };
    bundle.metrics.push_back({name, reorder(*pair.low, topo.low_ids(), columns(*pair.low, topo.low_ids())),
                              reorder(*pair.high, topo.high_ids(), columns(*pair.high, topo.high_ids()))});
  }
  return bundle;
}

}  // namespace inca
