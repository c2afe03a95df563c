#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "inca/core/report.hpp"
#include "inca/core/types.hpp"
#include "inca/core/validate.hpp"

namespace inca::io {

namespace fs = std::filesystem;

// Fills NaN gaps by linear interpolation between observed neighbours; leading
// and trailing gaps take the nearest observed value. An all-missing series
// becomes zeros.
void interpolate_missing(std::vector<double>& series);

// CSV telemetry: header `timestamp,<id_1>,...,<id_d>`, integer epoch seconds in
// the first column. Empty cells and NaN/NA tokens are treated as missing.
MetricPanel read_panel_csv(const fs::path& path, const std::string& metric_name);
void write_panel_csv(const fs::path& path, const MetricPanel& panel);

struct KpiFile {
  std::string kpi_id;
  KpiSeries series;
};
KpiFile read_kpi_csv(const fs::path& path);
void write_kpi_csv(const fs::path& path, const std::string& kpi_id, const KpiSeries& kpi);

std::string format_double(double v);

struct TopologyDocument {
  TopologyDescriptor topology;
  std::vector<FaultLabel> faults;

  friend bool operator==(const TopologyDocument&, const TopologyDocument&) = default;
};

Json topology_to_json(const TopologyDocument& doc);
TopologyDocument topology_from_json(const Json& j);
// Fault list alone; root causes are not checked against a topology.
std::vector<FaultLabel> fault_labels_from_json(const Json& j);

Json graph_to_json(const InterdependentCausalGraph& graph, const TopologyDescriptor& topo);
InterdependentCausalGraph graph_from_json(const Json& j, const TopologyDescriptor& topo);

Json report_to_json(const RcaReport& report);
RcaReport report_from_json(const Json& j);

Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& j);
void write_text(const fs::path& path, const std::string& text);

// Dataset directory: topology.json, kpi.csv and one `<level>_<metric>.csv`
// per level and metric (level is `low` or `high`).
struct Dataset {
  TopologyDocument doc;
  std::vector<MetricPanel> panels;
  KpiSeries kpi;
};

Dataset load_dataset(const fs::path& dir);
ValidatedBundle load_validated(const fs::path& dir, std::vector<FaultLabel>* faults = nullptr);
void write_dataset(const fs::path& dir, const TopologyDocument& doc,
                   const std::vector<MetricPanel>& panels, const KpiSeries& kpi);

}  // namespace inca::io
