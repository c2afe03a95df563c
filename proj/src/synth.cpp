#include "inca/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "inca/core/error.hpp"
#include "inca/core/rng.hpp"

namespace inca::synth {

void SynthSpec::validate() const {
  auto bad = [](const std::string& msg) { fail(ErrorCode::InvalidArgument, "synth spec: " + msg); };
  if (g < 1) bad("g must be >= 1");
  if (low_per_high.size() != g) bad("low_per_high needs one entry per high-level node");
  for (auto s : low_per_high)
    if (s < 1) bad("every domain needs at least one low-level node");
  if (p < 1) bad("p must be >= 1");
  if (edge_lag > p) bad("edge_lag must be 0 or at most p");
  if (T < p + 2) bad("T too short for the lag order");
  for (double d : {edge_density, cross_density, kpi_density})
    if (!(d >= 0.0 && d <= 1.0)) bad("densities must lie in [0, 1]");
  if (!(weight_min > 0.0 && weight_min <= weight_max)) bad("weight range must satisfy 0 < min <= max");
  if (!(self_min >= 0.0 && self_min <= self_max)) bad("self range must satisfy 0 <= min <= max");
  if (!(noise_sigma >= 0.0)) bad("noise_sigma must be >= 0");
  if (!(max_radius > 0.0 && max_radius < 1.0)) bad("max_radius must lie in (0, 1)");
  for (const auto& f : faults) {
    if (!(f.magnitude > 0.0)) bad("fault magnitude must be > 0");
    if (!(f.decay >= 0.0 && f.decay < 1.0)) bad("fault decay must lie in [0, 1)");
    if (f.onset && *f.onset >= T) bad("fault onset outside the series");
  }
}

namespace {

const Json& need(const Json& j, const char* key) {
  if (!j.contains(key)) fail(ErrorCode::Parse, std::string("synth spec: missing required field '") + key + "'");
  return j.at(key);
}

std::string low_id(std::size_t i, std::size_t n) {
  std::string digits = std::to_string(i);
  const std::size_t width = std::to_string(n > 0 ? n - 1 : 0).size();
  return "a" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

double spectral_radius(const std::vector<Matrix>& coeffs) {
  const std::size_t n = coeffs.front().rows();
  const std::size_t p = coeffs.size();
  // Companion form for x_t^T = sum_k x_{t-k}^T B_k, acting on column vectors.
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n * p), static_cast<Eigen::Index>(n * p));
  for (std::size_t k = 0; k < p; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        comp(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k * n + i)) = coeffs[k](i, j);
  for (std::size_t k = 1; k < p; ++k)
    for (std::size_t i = 0; i < n; ++i)
      comp(static_cast<Eigen::Index>(k * n + i), static_cast<Eigen::Index>((k - 1) * n + i)) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

SynthSpec spec_from_json(const Json& j) {
  try {
    if (!j.is_object()) fail(ErrorCode::Parse, "synth spec must be a JSON object");
    SynthSpec s;
    s.g = need(j, "g").get<std::size_t>();
    s.low_per_high = need(j, "low_per_high").get<std::vector<std::size_t>>();
    s.T = need(j, "T").get<std::size_t>();
    auto opt = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    opt("p", s.p);
    opt("edge_lag", s.edge_lag);
    opt("edge_density", s.edge_density);
    opt("cross_density", s.cross_density);
    opt("kpi_density", s.kpi_density);
    if (j.contains("weight_range")) {
      auto w = j.at("weight_range").get<std::vector<double>>();
      if (w.size() != 2) fail(ErrorCode::Parse, "synth spec: weight_range must be [min, max]");
      s.weight_min = w[0];
      s.weight_max = w[1];
    }
    if (j.contains("self_range")) {
      auto w = j.at("self_range").get<std::vector<double>>();
      if (w.size() != 2) fail(ErrorCode::Parse, "synth spec: self_range must be [min, max]");
      s.self_min = w[0];
      s.self_max = w[1];
    }
    opt("noise_sigma", s.noise_sigma);
    opt("student_t_dof", s.student_t_dof);
    opt("max_radius", s.max_radius);
    opt("burn_in", s.burn_in);
    opt("seed", s.seed);
    opt("metric_name", s.metric_name);
    opt("t0", s.t0);
    opt("step", s.step);
    if (j.contains("faults")) {
      std::size_t idx = 0;
      for (const auto& fj : j.at("faults")) {
        FaultSpec f;
        f.fault_id = fj.contains("fault_id") ? fj.at("fault_id").get<std::string>() : "fault" + std::to_string(idx);
        if (fj.contains("root_cause")) f.root_cause = fj.at("root_cause").get<std::string>();
        if (fj.contains("onset")) f.onset = fj.at("onset").get<std::size_t>();
        if (fj.contains("magnitude")) f.magnitude = fj.at("magnitude").get<double>();
        if (fj.contains("decay")) f.decay = fj.at("decay").get<double>();
        if (fj.contains("hop_delay")) f.hop_delay = fj.at("hop_delay").get<std::size_t>();
        s.faults.push_back(std::move(f));
        ++idx;
      }
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("synth spec: ") + e.what());
  }
}

Json spec_to_json(const SynthSpec& s) {
  Json j;
  j["g"] = s.g;
  j["low_per_high"] = s.low_per_high;
  j["p"] = s.p;
  j["edge_lag"] = s.edge_lag;
  j["edge_density"] = s.edge_density;
  j["cross_density"] = s.cross_density;
  j["kpi_density"] = s.kpi_density;
  j["weight_range"] = {s.weight_min, s.weight_max};
  j["self_range"] = {s.self_min, s.self_max};
  j["noise_sigma"] = s.noise_sigma;
  j["student_t_dof"] = s.student_t_dof;
  j["max_radius"] = s.max_radius;
  j["T"] = s.T;
  j["burn_in"] = s.burn_in;
  j["seed"] = s.seed;
  j["metric_name"] = s.metric_name;
  j["t0"] = s.t0;
  j["step"] = s.step;
  Json faults = Json::array();
  for (const auto& f : s.faults) {
    Json fj;
    fj["fault_id"] = f.fault_id;
    if (f.root_cause) fj["root_cause"] = *f.root_cause;
    if (f.onset) fj["onset"] = *f.onset;
    fj["magnitude"] = f.magnitude;
    fj["decay"] = f.decay;
    fj["hop_delay"] = f.hop_delay;
    faults.push_back(std::move(fj));
  }
  j["faults"] = std::move(faults);
  return j;
}

SynthSystem generate_system(const SynthSpec& spec) {
  spec.validate();
  auto rng = make_stream(spec.seed, "system");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto weight = [&] { return spec.weight_min + (spec.weight_max - spec.weight_min) * unit(rng); };
  std::uniform_int_distribution<std::size_t> lag_pick(0, spec.p - 1);

  const std::size_t g = spec.g;
  const std::size_t n = std::accumulate(spec.low_per_high.begin(), spec.low_per_high.end(), std::size_t{0});
  const std::size_t nv = n + g + 1;
  const std::size_t kpi = n + g;

  std::vector<std::string> high_ids;
  for (std::size_t h = 0; h < g; ++h) high_ids.push_back("h" + std::to_string(h));
  std::vector<std::pair<std::string, std::string>> aff;
  std::vector<std::size_t> domain_of;
  for (std::size_t h = 0, idx = 0; h < g; ++h)
    for (std::size_t k = 0; k < spec.low_per_high[h]; ++k, ++idx) {
      aff.emplace_back(low_id(idx, n), high_ids[h]);
      domain_of.push_back(h);
    }

  SynthSystem sys;
  sys.topology = TopologyDescriptor::create(high_ids, aff, "kpi");
  sys.coeffs.assign(spec.p, Matrix(nv, nv));
  auto add_edge = [&](std::size_t from, std::size_t to) {
    const std::size_t lag = spec.edge_lag == 0 ? lag_pick(rng) : spec.edge_lag - 1;
    sys.coeffs[lag](from, to) = weight();
  };

  // Random topological order per domain guarantees a DAG.
  auto sample_dag = [&](const std::vector<std::size_t>& nodes) {
    std::vector<std::size_t> order = nodes;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t a = 0; a < order.size(); ++a)
      for (std::size_t b = a + 1; b < order.size(); ++b)
        if (unit(rng) < spec.edge_density) add_edge(order[a], order[b]);
  };
  for (std::size_t h = 0, start = 0; h < g; start += spec.low_per_high[h], ++h) {
    std::vector<std::size_t> nodes(spec.low_per_high[h]);
    std::iota(nodes.begin(), nodes.end(), start);
    sample_dag(nodes);
  }
  std::vector<std::size_t> high_nodes(g);
  std::iota(high_nodes.begin(), high_nodes.end(), n);
  sample_dag(high_nodes);
  for (std::size_t i = 0; i < n; ++i)
    if (unit(rng) < spec.cross_density) add_edge(i, n + domain_of[i]);
  bool any_kpi = false;
  for (std::size_t h = 0; h < g; ++h)
    if (unit(rng) < spec.kpi_density) {
      add_edge(n + h, kpi);
      any_kpi = true;
    }
  if (!any_kpi) add_edge(n + std::uniform_int_distribution<std::size_t>(0, g - 1)(rng), kpi);
  for (std::size_t v = 0; v < nv; ++v)
    sys.coeffs[0](v, v) = spec.self_min + (spec.self_max - spec.self_min) * unit(rng);

  // Scaling lag k by c^k scales every companion eigenvalue by c.
  sys.spectral_radius = spectral_radius(sys.coeffs);
  if (sys.spectral_radius > spec.max_radius) {
    const double c = spec.max_radius / sys.spectral_radius;
    for (std::size_t k = 0; k < spec.p; ++k) {
      const double f = std::pow(c, static_cast<double>(k + 1));
      for (double& v : sys.coeffs[k].flat()) v *= f;
    }
    sys.spectral_radius = spectral_radius(sys.coeffs);
  }

  auto strength = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (const auto& b : sys.coeffs) s += std::abs(b(i, j));
    return s;
  };
  auto& t = sys.truth;
  t.metric_name = spec.metric_name;
  t.w_low = Matrix(n, n);
  t.w_high = Matrix(g, g);
  t.w_cross = Matrix(n, g);
  t.w_kpi.assign(g, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) t.w_low(i, j) = strength(i, j);
    for (std::size_t h = 0; h < g; ++h) t.w_cross(i, h) = strength(i, n + h);
  }
  for (std::size_t a = 0; a < g; ++a) {
    for (std::size_t b = 0; b < g; ++b)
      if (a != b) t.w_high(a, b) = strength(n + a, n + b);
    t.w_kpi[a] = strength(n + a, kpi);
  }
  return sys;
}

namespace {

// Edge weights of the full causal graph (lags collapsed), self-loops excluded.
Matrix collapsed_edges(const SynthSystem& sys) {
  const std::size_t nv = sys.n_vars();
  Matrix a(nv, nv);
  for (const auto& b : sys.coeffs)
    for (std::size_t i = 0; i < nv; ++i)
      for (std::size_t j = 0; j < nv; ++j)
        if (i != j) a(i, j) += std::abs(b(i, j));
  return a;
}

}  // namespace

std::vector<std::size_t> kpi_connected_low(const SynthSystem& sys) {
  const Matrix a = collapsed_edges(sys);
  const std::size_t nv = sys.n_vars();
  const std::size_t n = sys.topology.n_low();
  // Reverse reachability from the KPI.
  std::vector<char> reach(nv, 0);
  std::vector<std::size_t> stack{nv - 1};
  reach[nv - 1] = 1;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t u = 0; u < nv; ++u)
      if (a(u, v) > 0.0 && !reach[u]) {
        reach[u] = 1;
        stack.push_back(u);
      }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (reach[i]) out.push_back(i);
  return out;
}

Simulation simulate(const SynthSystem& sys, const SynthSpec& spec, const std::vector<FaultSpec>& faults) {
  spec.validate();
  const std::size_t nv = sys.n_vars();
  const std::size_t n = sys.topology.n_low();
  const std::size_t g = sys.topology.g();
  const std::size_t p = sys.coeffs.size();
  const std::size_t total = spec.T + spec.burn_in;

  auto noise_rng = make_stream(spec.seed, "noise");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::student_t_distribution<double> student(spec.student_t_dof > 0.0 ? spec.student_t_dof : 1.0);
  const double t_scale = spec.student_t_dof > 2.0 ? std::sqrt((spec.student_t_dof - 2.0) / spec.student_t_dof) : 1.0;
  auto draw = [&] {
    if (spec.student_t_dof > 0.0) return spec.noise_sigma * t_scale * student(noise_rng);
    return spec.noise_sigma * gauss(noise_rng);
  };

  Matrix full(total, nv);
  for (std::size_t t = 0; t < total; ++t) {
    for (std::size_t j = 0; j < nv; ++j) {
      double v = draw();
      for (std::size_t k = 1; k <= p && k <= t; ++k) {
        const Matrix& b = sys.coeffs[k - 1];
        for (std::size_t i = 0; i < nv; ++i) v += full(t - k, i) * b(i, j);
      }
      full(t, j) = v;
    }
  }
  Simulation sim;
  sim.nominal = Matrix(spec.T, nv);
  for (std::size_t t = 0; t < spec.T; ++t)
    for (std::size_t j = 0; j < nv; ++j) sim.nominal(t, j) = full(spec.burn_in + t, j);

  std::vector<double> sd(nv, 0.0);
  for (std::size_t j = 0; j < nv; ++j) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t t = 0; t < spec.T; ++t) mean += sim.nominal(t, j);
    mean /= static_cast<double>(spec.T);
    for (std::size_t t = 0; t < spec.T; ++t) sq += (sim.nominal(t, j) - mean) * (sim.nominal(t, j) - mean);
    sd[j] = std::sqrt(sq / static_cast<double>(spec.T));
  }

  // Observation-level shocks: the root deviates from onset on, a descendant
  // reached by a path of h hops deviates hop_delay * h steps later, scaled by
  // the product of edge weights along the path (summed over paths).
  sim.observed = sim.nominal;
  const Matrix edges = collapsed_edges(sys);
  const auto connected = kpi_connected_low(sys);
  auto fault_rng = make_stream(spec.seed, "faults");
  std::vector<std::int64_t> stamps(spec.T);
  for (std::size_t t = 0; t < spec.T; ++t) stamps[t] = spec.t0 + spec.step * static_cast<std::int64_t>(t);

  for (std::size_t fi = 0; fi < faults.size(); ++fi) {
    const FaultSpec& f = faults[fi];
    std::size_t root = 0;
    if (f.root_cause) {
      auto idx = sys.topology.low_index(*f.root_cause);
      if (!idx) fail(ErrorCode::UnknownEntity, "fault root cause '" + *f.root_cause + "' is not a low-level node");
      root = *idx;
    } else {
      const auto& pool = connected.empty() ? std::vector<std::size_t>{} : connected;
      if (pool.empty()) {
        root = std::uniform_int_distribution<std::size_t>(0, n - 1)(fault_rng);
      } else {
        root = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(fault_rng)];
      }
    }
    const std::size_t onset = f.onset.value_or(spec.T * 3 / 4);

    std::vector<double> layer(nv, 0.0);
    layer[root] = 1.0;
    std::size_t max_hops = 0;
    for (std::size_t hops = 0; hops <= nv; ++hops) {
      bool any = false;
      for (std::size_t v = 0; v < nv; ++v) {
        if (layer[v] == 0.0) continue;
        any = true;
        max_hops = hops;
        const std::size_t start = onset + hops * f.hop_delay;
        double amp = f.magnitude * layer[v] * (sd[v] > 0.0 ? sd[v] : 1.0);
        for (std::size_t t = start; t < spec.T; ++t, amp *= f.decay) sim.observed(t, v) += amp;
      }
      if (!any) break;
      std::vector<double> next(nv, 0.0);
      for (std::size_t u = 0; u < nv; ++u)
        if (layer[u] != 0.0)
          for (std::size_t v = 0; v < nv; ++v) next[v] += layer[u] * edges(u, v);
      layer = std::move(next);
    }
    const double tail = f.decay > 0.0 ? std::ceil(std::log(0.01) / std::log(f.decay)) : 1.0;
    const std::size_t end = std::min(spec.T - 1, onset + max_hops * f.hop_delay + static_cast<std::size_t>(tail));
    FaultLabel label;
    label.fault_id = f.fault_id.empty() ? "fault" + std::to_string(fi) : f.fault_id;
    label.true_root_causes = {sys.topology.low_ids()[root]};
    label.fault_window = TimeWindow{stamps[onset], stamps[end]};
    sim.labels.push_back(std::move(label));
  }

  MetricPanel low{spec.metric_name, sys.topology.low_ids(), stamps, Matrix(spec.T, n)};
  MetricPanel high{spec.metric_name, sys.topology.high_ids(), stamps, Matrix(spec.T, g)};
  sim.kpi.timestamps = stamps;
  sim.kpi.values.resize(spec.T);
  for (std::size_t t = 0; t < spec.T; ++t) {
    for (std::size_t i = 0; i < n; ++i) low.values(t, i) = sim.observed(t, i);
    for (std::size_t h = 0; h < g; ++h) high.values(t, h) = sim.observed(t, n + h);
    sim.kpi.values[t] = sim.observed(t, nv - 1);
  }
  sim.panels = {std::move(low), std::move(high)};
  return sim;
}

void write_synthetic_dataset(const io::fs::path& dir, const SynthSpec& spec) {
  const SynthSystem sys = generate_system(spec);
  const Simulation sim = simulate(sys, spec, spec.faults);
  io::write_dataset(dir, {sys.topology, sim.labels}, sim.panels, sim.kpi);
  Json truth = io::graph_to_json(sys.truth, sys.topology);
  truth["spectral_radius"] = sys.spectral_radius;
  truth["spec"] = spec_to_json(spec);
  io::write_json(dir / "truth.json", truth);
}

}  // namespace inca::synth
