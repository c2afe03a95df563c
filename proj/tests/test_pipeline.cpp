#include <doctest.h>

#include <cstdlib>

#include "inca/core/error.hpp"
#include "inca/pipeline.hpp"
#include "inca/synth.hpp"
#include "util.hpp"

using namespace inca;
using namespace inca::pipeline;

namespace {

struct Scenario {
  ValidatedBundle data;
  std::vector<FaultLabel> faults;
};

Scenario small_scenario(std::uint64_t seed) {
  synth::SynthSpec spec;
  spec.g = 2;
  spec.low_per_high = {3, 3};
  spec.T = 500;
  spec.seed = seed;
  spec.faults.push_back({});
  spec.faults.back().fault_id = "f0";
  auto sys = synth::generate_system(spec);
  auto sim = synth::simulate(sys, spec, spec.faults);
  // a second metric: same system, different noise
  auto spec2 = spec;
  spec2.seed = seed + 1000;
  spec2.metric_name = "other";
  auto sim2 = synth::simulate(sys, spec2, {});
  auto panels = sim.panels;
  panels.insert(panels.end(), sim2.panels.begin(), sim2.panels.end());
  return {validate_topology(sys.topology, panels, sim.kpi), sim.labels};
}

LocalizeConfig quick_config() {
  LocalizeConfig cfg;
  cfg.train.max_iters = 60;
  cfg.train.restarts = 1;
  cfg.allow_nonconverged = true;
  return cfg;
}

}  // namespace

TEST_CASE("config json overlay and strict keys") {
  LocalizeConfig cfg;
  config_from_json(Json{{"integration", {{"gamma", 0.4}, {"k", 3}}}, {"train", {{"layers", 3}}}}, cfg);
  CHECK(cfg.integration.gamma == 0.4);
  CHECK(cfg.integration.k == 3);
  CHECK(cfg.train.layers == 3);
  CHECK(cfg.propagation.phi == 0.5);
  LocalizeConfig back;
  config_from_json(config_to_json(cfg), back);
  CHECK(config_to_json(back) == config_to_json(cfg));
  CHECK_THROWS_AS(config_from_json(Json{{"integration", {{"gama", 0.4}}}}, cfg), Error);
  CHECK_THROWS_AS(config_from_json(Json{{"bogus", 1}}, cfg), Error);
  LocalizeConfig bad;
  bad.integration.gamma = 2.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("worker count precedence") {
  CHECK(worker_count(3) == 3);
  setenv("INCA_THREADS", "2", 1);
  CHECK(worker_count(0) == 2);
  CHECK(worker_count(5) == 5);
  setenv("INCA_THREADS", "junk", 1);
  CHECK(worker_count(0) >= 1);
  unsetenv("INCA_THREADS");
}

TEST_CASE("localize produces one ranked report per fault") {
  auto sc = small_scenario(1);
  auto cfg = quick_config();
  cfg.integration.k = 4;
  auto res = localize(sc.data, sc.faults, cfg);
  REQUIRE(res.reports.size() == 1);
  REQUIRE(res.fits.size() == 2);
  const auto& r = res.reports[0];
  CHECK(r.fault_id == "f0");
  CHECK(r.ranked.size() == 4);
  CHECK(r.per_entity.size() == 6);
  for (const auto& [id, s] : r.per_entity) {
    CHECK(s.final_score >= 0.0);
    CHECK(s.final_score <= 1.0);
    CHECK(s.topological >= 0.0);
    CHECK(s.individual <= 1.0);
  }
  for (std::size_t i = 1; i < r.ranked.size(); ++i)
    CHECK(r.per_entity.at(r.ranked[i - 1]).final_score >= r.per_entity.at(r.ranked[i]).final_score);
  CHECK(r.config_snapshot.at("integration").at("k") == 4);

  auto none = localize(sc.data, {}, cfg);
  REQUIRE(none.reports.size() == 1);
  CHECK(none.reports[0].fault_id == "all");
}

TEST_CASE("gamma endpoints give the pure rankings") {
  auto sc = small_scenario(2);
  auto cfg = quick_config();
  auto fits = fit_all(sc.data, cfg);
  const auto topo = fused_topological(fits);
  const auto indiv = individual_scores(sc.data, cfg, sc.faults[0].fault_window);
  std::map<std::string, double> pure_t, pure_i;
  for (std::size_t i = 0; i < topo.size(); ++i) {
    pure_t[sc.data.topology.low_ids()[i]] = topo[i];
    pure_i[sc.data.topology.low_ids()[i]] = indiv[i];
  }
  cfg.integration.gamma = 0.0;
  CHECK(build_report("f0", sc.data.topology, topo, indiv, cfg).ranked == ranking::rank_top_k(pure_t, cfg.integration.k));
  cfg.integration.gamma = 1.0;
  CHECK(build_report("f0", sc.data.topology, topo, indiv, cfg).ranked == ranking::rank_top_k(pure_i, cfg.integration.k));
}

TEST_CASE("results do not depend on the worker count") {
  auto sc = small_scenario(3);
  auto cfg = quick_config();
  cfg.threads = 1;
  auto a = localize(sc.data, sc.faults, cfg);
  cfg.threads = 3;
  auto b = localize(sc.data, sc.faults, cfg);
  CHECK(reports_to_json(a.reports).dump() == reports_to_json(b.reports).dump());
}

TEST_CASE("non-converged fits are rejected unless allowed") {
  auto sc = small_scenario(4);
  auto cfg = quick_config();
  cfg.train.max_iters = 3;
  cfg.allow_nonconverged = false;
  try {
    localize(sc.data, sc.faults, cfg);
    FAIL("expected DidNotConverge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DidNotConverge);
  }
}

TEST_CASE("report json round trip and evaluation") {
  RcaReport r1{"f1", {{"a", {1, 0, 0.9}}, {"b", {0, 1, 0.1}}}, {"a", "b"}, 2, Json::object()};
  RcaReport r2{"f2", {{"a", {0, 0, 0.2}}, {"b", {1, 1, 1.0}}}, {"b", "a"}, 2, Json::object()};
  auto back = reports_from_json(Json::parse(reports_to_json({r1, r2}).dump()));
  REQUIRE(back.size() == 2);
  CHECK(back[0] == r1);
  CHECK(back[1] == r2);

  std::vector<FaultLabel> labels{{"f1", {"a"}, std::nullopt}, {"f2", {"b"}, std::nullopt}};
  auto m = evaluate_outcomes(match_outcomes({r1, r2}, labels));
  CHECK(m.at("faults") == 2);
  for (const auto& [k, v] : m.at("metrics").items()) CHECK(v.get<double>() == 1.0);

  std::vector<FaultLabel> wrong{{"f1", {"b"}, std::nullopt}, {"f2", {"a"}, std::nullopt}};
  auto w = evaluate_outcomes(match_outcomes({r1, r2}, wrong));
  CHECK(w.at("metrics").at("PR@1") == 0.0);
  CHECK(w.at("metrics").at("MRR") == 0.5);

  CHECK_THROWS_AS(match_outcomes({r1}, labels), Error);
  CHECK_THROWS_AS(match_outcomes({r1, r1, r2}, labels), Error);
  CHECK_THROWS_AS(match_outcomes({r1, r2}, {labels[0]}), Error);
}

TEST_CASE("markdown lists the ranked entities") {
  RcaReport r{"f9", {{"a", {1, 0, 0.9}}, {"b", {0, 1, 0.1}}}, {"a", "b"}, 2, Json::object()};
  const auto md = render_markdown({r});
  CHECK(md.find("## Fault f9") != std::string::npos);
  CHECK(md.find("| 1 | a | 0.9 |") != std::string::npos);
  CHECK(md.find("| 2 | b |") != std::string::npos);
}
