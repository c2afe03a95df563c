#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "inca/core/io.hpp"
#include "inca/core/report.hpp"
#include "inca/core/types.hpp"

namespace inca::synth {

struct FaultSpec {
  std::string fault_id;
  std::optional<std::string> root_cause;  // chosen among KPI-connected low-level nodes if absent
  std::optional<std::size_t> onset;       // time index; defaults to 3/4 of the series
  double magnitude = 5.0;                 // in units of the node's nominal stdev
  double decay = 0.9;
  std::size_t hop_delay = 2;
};

struct SynthSpec {
  std::size_t g = 0;
  std::vector<std::size_t> low_per_high;
  std::size_t p = 2;
  std::size_t edge_lag = 1;    // lag of every non-self edge; 0 draws one per edge from 1..p
  double edge_density = 0.2;   // intra-level edges, within each domain for low level
  double cross_density = 0.5;  // low-level node -> its own high-level node
  double kpi_density = 1.0;    // high-level node -> KPI
  double weight_min = 0.3;
  double weight_max = 0.8;
  double self_min = 0.2;       // own-lag autoregression
  double self_max = 0.6;
  double noise_sigma = 0.05;
  double student_t_dof = 0.0;  // > 0 switches the noise to scaled Student-t
  double max_radius = 0.95;
  std::size_t T = 0;
  std::size_t burn_in = 200;
  std::uint64_t seed = 0;
  std::string metric_name = "metric";
  std::int64_t t0 = 1700000000;
  std::int64_t step = 60;
  std::vector<FaultSpec> faults;

  void validate() const;
};

// Throws Parse naming the first missing required field (g, low_per_high, T).
SynthSpec spec_from_json(const Json& j);
Json spec_to_json(const SynthSpec& spec);

// Ground truth over N = n_low + g + 1 variables ordered [low | high | KPI].
struct SynthSystem {
  TopologyDescriptor topology;
  InterdependentCausalGraph truth;
  std::vector<Matrix> coeffs;  // lag k = 1..p, each N x N, entry (i, j): effect of x_i on x_j
  double spectral_radius = 0.0;

  std::size_t n_vars() const noexcept { return coeffs.empty() ? 0 : coeffs.front().rows(); }
};

SynthSystem generate_system(const SynthSpec& spec);

struct Simulation {
  std::vector<MetricPanel> panels;  // low then high
  KpiSeries kpi;
  std::vector<FaultLabel> labels;
  Matrix nominal;  // T x N fault-free trajectory
  Matrix observed; // T x N with fault shocks
};

Simulation simulate(const SynthSystem& system, const SynthSpec& spec,
                    const std::vector<FaultSpec>& faults);

// Low-level nodes with a directed path to the KPI.
std::vector<std::size_t> kpi_connected_low(const SynthSystem& system);

// generate_system + simulate + files: topology.json, kpi.csv, the level CSVs
// and truth.json.
void write_synthetic_dataset(const io::fs::path& dir, const SynthSpec& spec);

}  // namespace inca::synth
