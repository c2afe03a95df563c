#include "inca/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <map>
#include <sstream>
#include <thread>

#include "inca/core/error.hpp"
#include "inca/core/io.hpp"
#include "inca/core/rng.hpp"
#include "inca/lagprep.hpp"

namespace inca::pipeline {

void LocalizeConfig::validate() const {
  train.validate();
  propagation.validate();
  evt.validate();
  integration.validate();
}

namespace {

void reject_unknown(const Json& j, const Json& known, const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::Parse, where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) fail(ErrorCode::Parse, where + ": unknown key '" + key + "'");
}

template <typename T>
void maybe(const Json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

// Parallel map over [0, count); results land at their own index so the
// outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::size_t index_at_or_after(const std::vector<std::int64_t>& ts, std::int64_t t) {
  return static_cast<std::size_t>(std::lower_bound(ts.begin(), ts.end(), t) - ts.begin());
}

}  // namespace

Json config_to_json(const LocalizeConfig& cfg) {
  Json j;
  j["train"] = hier_gnn::config_to_json(cfg.train);
  j["propagation"] = {{"phi", cfg.propagation.phi},
                      {"varphi", cfg.propagation.varphi},
                      {"tol", cfg.propagation.tol},
                      {"max_iters", cfg.propagation.max_iters}};
  j["evt"] = {{"q", cfg.evt.q},
              {"init_fraction", cfg.evt.init_fraction},
              {"eta_quantile", cfg.evt.eta_quantile},
              {"refit_every", cfg.evt.refit_every},
              {"min_peaks", cfg.evt.min_peaks}};
  j["integration"] = {{"gamma", cfg.integration.gamma}, {"k", cfg.integration.k}};
  j["allow_nonconverged"] = cfg.allow_nonconverged;
  return j;
}

void config_from_json(const Json& j, LocalizeConfig& cfg) {
  const LocalizeConfig defaults;
  Json known = config_to_json(defaults);
  known["threads"] = 0;
  reject_unknown(j, known, "config");
  try {
    if (j.contains("train")) {
      reject_unknown(j.at("train"), known.at("train"), "config.train");
      hier_gnn::config_from_json(j.at("train"), cfg.train);
    }
    if (j.contains("propagation")) {
      const Json& s = j.at("propagation");
      reject_unknown(s, known.at("propagation"), "config.propagation");
      maybe(s, "phi", cfg.propagation.phi);
      maybe(s, "varphi", cfg.propagation.varphi);
      maybe(s, "tol", cfg.propagation.tol);
      maybe(s, "max_iters", cfg.propagation.max_iters);
    }
    if (j.contains("evt")) {
      const Json& s = j.at("evt");
      reject_unknown(s, known.at("evt"), "config.evt");
      maybe(s, "q", cfg.evt.q);
      maybe(s, "init_fraction", cfg.evt.init_fraction);
      maybe(s, "eta_quantile", cfg.evt.eta_quantile);
      maybe(s, "refit_every", cfg.evt.refit_every);
      maybe(s, "min_peaks", cfg.evt.min_peaks);
    }
    if (j.contains("integration")) {
      const Json& s = j.at("integration");
      reject_unknown(s, known.at("integration"), "config.integration");
      maybe(s, "gamma", cfg.integration.gamma);
      maybe(s, "k", cfg.integration.k);
    }
    maybe(j, "allow_nonconverged", cfg.allow_nonconverged);
    maybe(j, "threads", cfg.threads);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("config: ") + e.what());
  }
}

std::size_t worker_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("INCA_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<MetricFit> fit_all(const ValidatedBundle& data, const LocalizeConfig& cfg) {
  std::vector<MetricFit> out(data.metrics.size());
  parallel_for(out.size(), worker_count(cfg.threads), [&](std::size_t i) {
    const MetricBundle& metric = data.metrics[i];
    hier_gnn::TrainConfig train = cfg.train;
    train.seed = stream_seed(cfg.train.seed, "fit/" + metric.metric_name);
    out[i].metric_name = metric.metric_name;
    out[i].fit = hier_gnn::fit_interdependent(metric, data.kpi, data.topology, train);
    out[i].topological = propagation::topological_scores(out[i].fit.graph, cfg.propagation);
  });
  return out;
}

std::vector<double> fused_topological(const std::vector<MetricFit>& fits) {
  if (fits.empty()) fail(ErrorCode::InvalidArgument, "no fitted metrics");
  std::vector<double> sum(fits.front().topological.size(), 0.0);
  for (const auto& f : fits)
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += f.topological[i];
  for (double& v : sum) v /= static_cast<double>(fits.size());
  return propagation::min_max_normalize(sum);
}

std::vector<double> individual_scores(const ValidatedBundle& data, const LocalizeConfig& cfg,
                                      const std::optional<TimeWindow>& window) {
  const std::size_t n = data.topology.n_low();
  const auto& ts = data.kpi.timestamps;
  std::optional<evt::SegmentRange> range;
  if (window) {
    const std::size_t b = index_at_or_after(ts, window->begin);
    const std::size_t e = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), window->end) - ts.begin());
    if (b >= e) fail(ErrorCode::InvalidArgument, "fault window does not overlap the series");
    range = evt::SegmentRange{b, e};
  }
  std::vector<double> sum(n, 0.0);
  std::vector<std::vector<double>> per(data.metrics.size(), std::vector<double>(n, 0.0));
  parallel_for(data.metrics.size() * n, worker_count(cfg.threads), [&](std::size_t job) {
    const std::size_t mi = job / n;
    const std::size_t i = job % n;
    const std::vector<double> col = data.metrics[mi].low.column(i);
    const std::vector<double> z = lagprep::standardize_series(col, nullptr);
    per[mi][i] = evt::individual_score(z, cfg.evt, range);
  });
  for (const auto& v : per)
    for (std::size_t i = 0; i < n; ++i) sum[i] += v[i];
  for (double& v : sum) v /= static_cast<double>(data.metrics.size());
  return propagation::min_max_normalize(sum);
}

RcaReport build_report(const std::string& fault_id, const TopologyDescriptor& topo,
                       const std::vector<double>& topological, const std::vector<double>& individual,
                       const LocalizeConfig& cfg) {
  const std::vector<double> final_scores =
      ranking::combine_scores(individual, topological, cfg.integration.gamma);
  RcaReport report;
  report.fault_id = fault_id;
  report.k = cfg.integration.k;
  std::map<std::string, double> flat;
  for (std::size_t i = 0; i < topo.n_low(); ++i) {
    const std::string& id = topo.low_ids()[i];
    report.per_entity[id] = EntityScore{topological[i], individual[i], final_scores[i]};
    flat[id] = final_scores[i];
  }
  report.ranked = ranking::rank_top_k(flat, cfg.integration.k);
  Json snap = config_to_json(cfg);
  report.config_snapshot = std::move(snap);
  return report;
}

LocalizeResult localize(const ValidatedBundle& data, const std::vector<FaultLabel>& faults,
                        const LocalizeConfig& cfg) {
  cfg.validate();
  LocalizeResult res;
  res.fits = fit_all(data, cfg);
  if (!cfg.allow_nonconverged)
    for (const auto& f : res.fits)
      if (!f.fit.converged)
        fail(ErrorCode::DidNotConverge, "fit for metric '" + f.metric_name + "' did not converge after " +
                                            std::to_string(f.fit.iterations) + " iterations");
  const std::vector<double> topo = fused_topological(res.fits);
  if (faults.empty()) {
    res.reports.push_back(build_report("all", data.topology, topo, individual_scores(data, cfg, std::nullopt), cfg));
    return res;
  }
  for (const auto& f : faults)
    res.reports.push_back(build_report(f.fault_id, data.topology, topo,
                                       individual_scores(data, cfg, f.fault_window), cfg));
  return res;
}

Json reports_to_json(const std::vector<RcaReport>& reports) {
  Json arr = Json::array();
  for (const auto& r : reports) arr.push_back(io::report_to_json(r));
  return Json{{"reports", std::move(arr)}};
}

std::vector<RcaReport> reports_from_json(const Json& j) {
  std::vector<RcaReport> out;
  try {
    if (j.is_object() && j.contains("reports")) {
      for (const auto& r : j.at("reports")) out.push_back(io::report_from_json(r));
    } else if (j.is_array()) {
      for (const auto& r : j) out.push_back(io::report_from_json(r));
    } else {
      out.push_back(io::report_from_json(j));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("report: ") + e.what());
  }
  return out;
}

Json graphs_to_json(const std::vector<MetricFit>& fits, const TopologyDescriptor& topo,
                    const hier_gnn::TrainConfig& cfg) {
  Json arr = Json::array();
  for (const auto& f : fits) arr.push_back(hier_gnn::fit_to_json(f.fit, topo, cfg));
  return Json{{"graphs", std::move(arr)}};
}

std::vector<eval_metrics::FaultOutcome> match_outcomes(const std::vector<RcaReport>& reports,
                                                       const std::vector<FaultLabel>& labels) {
  std::map<std::string, const FaultLabel*> by_id;
  for (const auto& l : labels) by_id[l.fault_id] = &l;
  std::set<std::string> seen;
  std::vector<eval_metrics::FaultOutcome> out;
  for (const auto& r : reports) {
    auto it = by_id.find(r.fault_id);
    if (it == by_id.end()) fail(ErrorCode::InvalidArgument, "report fault '" + r.fault_id + "' has no label");
    if (!seen.insert(r.fault_id).second)
      fail(ErrorCode::InvalidArgument, "duplicate report for fault '" + r.fault_id + "'");
    out.push_back({r.ranked, it->second->true_root_causes});
  }
  for (const auto& l : labels)
    if (!seen.count(l.fault_id)) fail(ErrorCode::InvalidArgument, "label '" + l.fault_id + "' has no report");
  return out;
}

Json evaluate_outcomes(const std::vector<eval_metrics::FaultOutcome>& outcomes) {
  Json m;
  for (std::size_t k : {1, 3, 5, 7, 10}) m["PR@" + std::to_string(k)] = eval_metrics::pr_at_k(outcomes, k);
  for (std::size_t k : {3, 5, 7, 10}) m["MAP@" + std::to_string(k)] = eval_metrics::map_at_k(outcomes, k);
  m["MRR"] = eval_metrics::mrr(outcomes);
  return Json{{"faults", outcomes.size()}, {"metrics", std::move(m)}};
}

std::string render_markdown(const std::vector<RcaReport>& reports) {
  std::ostringstream os;
  for (const auto& r : reports) {
    os << "## Fault " << r.fault_id << "\n\n";
    os << "| rank | entity | final | topological | individual |\n";
    os << "|---:|---|---:|---:|---:|\n";
    for (std::size_t i = 0; i < r.ranked.size(); ++i) {
      const auto& s = r.per_entity.at(r.ranked[i]);
      os << "| " << i + 1 << " | " << r.ranked[i] << " | " << io::format_double(s.final_score) << " | "
         << io::format_double(s.topological) << " | " << io::format_double(s.individual) << " |\n";
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace inca::pipeline
