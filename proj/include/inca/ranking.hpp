#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace inca::ranking {

struct IntegrationConfig {
  double gamma = 0.1;
  std::size_t k = 10;

  void validate() const;
};

// gamma * indiv + (1 - gamma) * topol, elementwise. Throws LengthMismatch.
std::vector<double> combine_scores(std::span<const double> indiv, std::span<const double> topol,
                                   double gamma);

// Highest scores first; equal scores ordered by id. Returns min(k, size) ids.
std::vector<std::string> rank_top_k(const std::map<std::string, double>& scores, std::size_t k);

}  // namespace inca::ranking
