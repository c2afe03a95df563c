#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "inca/core/matrix.hpp"
#include "inca/core/types.hpp"

namespace testutil {

namespace fs = std::filesystem;

// Fresh empty directory under the system temp dir, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("inca_test_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline inca::Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0,
                                  double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  inca::Matrix m(r, c);
  for (double& v : m.flat()) v = u(rng);
  return m;
}

// g = 2 with two low-level nodes each.
inline inca::TopologyDescriptor small_topology() {
  return inca::TopologyDescriptor::create({"h0", "h1"},
                                          {{"a0", "h0"}, {"a1", "h0"}, {"b0", "h1"}, {"b1", "h1"}}, "kpi");
}

inline std::vector<std::int64_t> grid(std::size_t n, std::int64_t t0 = 1000, std::int64_t step = 60) {
  std::vector<std::int64_t> ts(n);
  for (std::size_t i = 0; i < n; ++i) ts[i] = t0 + static_cast<std::int64_t>(i) * step;
  return ts;
}

inline inca::MetricPanel random_panel(const std::string& metric, std::vector<std::string> ids, std::size_t n,
                                      std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  inca::MetricPanel p{metric, std::move(ids), grid(n), inca::Matrix(n, 0)};
  p.values = inca::Matrix(n, p.entity_ids.size());
  for (double& v : p.values.flat()) v = nd(rng);
  return p;
}

}  // namespace testutil
