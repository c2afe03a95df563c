#include "inca/core/types.hpp"

#include <unordered_set>

#include "inca/core/error.hpp"

namespace inca {

std::string_view to_string(Level level) { return level == Level::Low ? "low" : "high"; }

TopologyDescriptor TopologyDescriptor::create(
    std::vector<std::string> high_level_ids,
    const std::vector<std::pair<std::string, std::string>>& affiliation, std::string kpi_id) {
  if (high_level_ids.empty()) fail(ErrorCode::InvalidTopology, "no high-level entities");
  if (affiliation.empty()) fail(ErrorCode::InvalidTopology, "no low-level entities");
  if (kpi_id.empty()) fail(ErrorCode::InvalidTopology, "empty kpi id");

  TopologyDescriptor t;
  t.kpi_id_ = std::move(kpi_id);
  std::unordered_set<std::string> seen{t.kpi_id_};
  for (std::size_t i = 0; i < high_level_ids.size(); ++i) {
    if (!seen.insert(high_level_ids[i]).second)
      fail(ErrorCode::InvalidTopology, "duplicate entity id '" + high_level_ids[i] + "'");
    t.high_lookup_.emplace(high_level_ids[i], i);
  }
  t.high_ids_ = std::move(high_level_ids);

  // Group low-level nodes by domain so each domain occupies a contiguous range.
  std::vector<std::vector<std::string>> domains(t.high_ids_.size());
  for (const auto& [low, high] : affiliation) {
    auto it = t.high_lookup_.find(high);
    if (it == t.high_lookup_.end())
      fail(ErrorCode::UnknownEntity, "low-level '" + low + "' affiliated to unknown '" + high + "'");
    if (!seen.insert(low).second)
      fail(ErrorCode::InvalidTopology, "duplicate entity id '" + low + "'");
    domains[it->second].push_back(low);
  }
  for (std::size_t h = 0; h < domains.size(); ++h) {
    for (auto& low : domains[h]) {
      t.low_lookup_.emplace(low, t.low_ids_.size());
      t.low_ids_.push_back(std::move(low));
      t.affiliation_.push_back(h);
    }
  }
  return t;
}

std::vector<std::size_t> TopologyDescriptor::domain_sizes() const {
  std::vector<std::size_t> sizes(g(), 0);
  for (auto h : affiliation_) ++sizes[h];
  return sizes;
}

std::optional<std::size_t> TopologyDescriptor::low_index(const std::string& id) const {
  auto it = low_lookup_.find(id);
  if (it == low_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> TopologyDescriptor::high_index(const std::string& id) const {
  auto it = high_lookup_.find(id);
  if (it == high_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<Level> TopologyDescriptor::level_of(const std::string& id) const {
  if (low_lookup_.contains(id)) return Level::Low;
  if (high_lookup_.contains(id)) return Level::High;
  return std::nullopt;
}

std::vector<double> MetricPanel::column(std::size_t j) const {
  std::vector<double> out(values.rows());
  for (std::size_t r = 0; r < values.rows(); ++r) out[r] = values(r, j);
  return out;
}

}  // namespace inca
