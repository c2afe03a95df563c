#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "inca/core/matrix.hpp"

namespace inca {

enum class Level { Low, High };

std::string_view to_string(Level level);

// Entity inventory of an interdependent system: g high-level nodes, each
// owning a domain of low-level nodes, plus one KPI. Low-level entities of all
// domains share one flat index space ordered domain by domain.
class TopologyDescriptor {
 public:
  TopologyDescriptor() = default;

  // `affiliation` lists (low id, high id) pairs in the order low-level ids
  // should appear inside their domain. Throws InvalidTopology / UnknownEntity.
  static TopologyDescriptor create(std::vector<std::string> high_level_ids,
                                   const std::vector<std::pair<std::string, std::string>>& affiliation,
                                   std::string kpi_id);

  std::size_t g() const noexcept { return high_ids_.size(); }
  std::size_t n_low() const noexcept { return low_ids_.size(); }

  const std::vector<std::string>& high_ids() const noexcept { return high_ids_; }
  const std::vector<std::string>& low_ids() const noexcept { return low_ids_; }
  const std::string& kpi_id() const noexcept { return kpi_id_; }
  // Index of the owning high-level node for each low-level index.
  const std::vector<std::size_t>& affiliation() const noexcept { return affiliation_; }
  std::vector<std::size_t> domain_sizes() const;

  std::optional<std::size_t> low_index(const std::string& id) const;
  std::optional<std::size_t> high_index(const std::string& id) const;
  std::optional<Level> level_of(const std::string& id) const;

  friend bool operator==(const TopologyDescriptor& a, const TopologyDescriptor& b) {
    return a.high_ids_ == b.high_ids_ && a.low_ids_ == b.low_ids_ &&
           a.affiliation_ == b.affiliation_ && a.kpi_id_ == b.kpi_id_;
  }

 private:
  std::vector<std::string> high_ids_;
  std::vector<std::string> low_ids_;
  std::vector<std::size_t> affiliation_;
  std::string kpi_id_;
  std::unordered_map<std::string, std::size_t> low_lookup_;
  std::unordered_map<std::string, std::size_t> high_lookup_;
};

// One metric observed over the entities of one level; rows are time steps.
struct MetricPanel {
  std::string metric_name;
  std::vector<std::string> entity_ids;
  std::vector<std::int64_t> timestamps;
  Matrix values;  // (T+1) x d

  std::size_t steps() const noexcept { return values.rows(); }
  std::size_t width() const noexcept { return values.cols(); }
  std::vector<double> column(std::size_t j) const;

  friend bool operator==(const MetricPanel&, const MetricPanel&) = default;
};

struct KpiSeries {
  std::vector<std::int64_t> timestamps;
  std::vector<double> values;

  friend bool operator==(const KpiSeries&, const KpiSeries&) = default;
};

// Learned (or ground-truth) causal structure for one metric. Entry (i, j) of
// an adjacency is the strength of the edge i -> j.
struct InterdependentCausalGraph {
  std::string metric_name;
  Matrix w_low;                // n_low x n_low
  Matrix w_high;               // g x g
  Matrix w_cross;              // n_low x g, low -> high
  std::vector<double> w_kpi;   // g, high -> KPI

  std::size_t n_low() const noexcept { return w_low.rows(); }
  std::size_t g() const noexcept { return w_high.rows(); }

  friend bool operator==(const InterdependentCausalGraph&,
                         const InterdependentCausalGraph&) = default;
};

struct TimeWindow {
  std::int64_t begin = 0;  // inclusive
  std::int64_t end = 0;    // inclusive

  bool contains(std::int64_t t) const noexcept { return t >= begin && t <= end; }
  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

struct FaultLabel {
  std::string fault_id;
  std::set<std::string> true_root_causes;
  std::optional<TimeWindow> fault_window;

  friend bool operator==(const FaultLabel&, const FaultLabel&) = default;
};

struct EntityScore {
  double topological = 0.0;
  double individual = 0.0;
  double final_score = 0.0;

  friend bool operator==(const EntityScore&, const EntityScore&) = default;
};

}  // namespace inca
