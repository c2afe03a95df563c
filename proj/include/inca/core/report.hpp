#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "inca/core/types.hpp"

namespace inca {

using Json = nlohmann::ordered_json;

struct RcaReport {
  std::string fault_id;
  std::map<std::string, EntityScore> per_entity;
  std::vector<std::string> ranked;
  std::size_t k = 10;
  Json config_snapshot = Json::object();

  friend bool operator==(const RcaReport&, const RcaReport&) = default;
};

}  // namespace inca
