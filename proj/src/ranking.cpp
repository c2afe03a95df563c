#include "inca/ranking.hpp"

#include <algorithm>

#include "inca/core/error.hpp"

namespace inca::ranking {

void IntegrationConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail(ErrorCode::InvalidArgument, "gamma must lie in [0, 1]");
  if (k < 1) fail(ErrorCode::InvalidArgument, "k must be >= 1");
}

std::vector<double> combine_scores(std::span<const double> indiv, std::span<const double> topol,
                                   double gamma) {
  if (indiv.size() != topol.size())
    fail(ErrorCode::LengthMismatch, "individual and topological score vectors differ in length");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail(ErrorCode::InvalidArgument, "gamma must lie in [0, 1]");
  std::vector<double> out(indiv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Endpoints return the input unchanged, bit for bit.
    if (gamma == 0.0) out[i] = topol[i];
    else if (gamma == 1.0) out[i] = indiv[i];
    else out[i] = gamma * indiv[i] + (1.0 - gamma) * topol[i];
  }
  return out;
}

std::vector<std::string> rank_top_k(const std::map<std::string, double>& scores, std::size_t k) {
  std::vector<std::pair<std::string, double>> items(scores.begin(), scores.end());
  const std::size_t take = std::min(k, items.size());
  std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(take), items.end(),
                    [](const auto& a, const auto& b) {
                      if (a.second != b.second) return a.second > b.second;
                      return a.first < b.first;
                    });
  std::vector<std::string> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(items[i].first);
  return out;
}

}  // namespace inca::ranking
