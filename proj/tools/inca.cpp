#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "inca/core/error.hpp"
#include "inca/core/io.hpp"
#include "inca/pipeline.hpp"
#include "inca/synth.hpp"

namespace fs = std::filesystem;
using namespace inca;

namespace {

enum Exit { Ok = 0, Failure = 1, BadSpec = 2, BadInput = 3, NotConverged = 4, IdMismatch = 5 };

int run_synth(const fs::path& spec_path, const fs::path& out) {
  synth::SynthSpec spec;
  try {
    spec = synth::spec_from_json(io::read_json(spec_path));
    spec.validate();
  } catch (const Error& e) {
    std::cerr << "invalid spec: " << e.what() << "\n";
    return BadSpec;
  }
  try {
    synth::write_synthetic_dataset(out, spec);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnknownEntity) throw;
    std::cerr << "invalid spec: " << e.what() << "\n";
    return BadSpec;
  }
  std::cout << "wrote " << out.string() << "\n";
  return Ok;
}

struct Overrides {
  std::optional<double> gamma, phi, varphi, lambda1, lambda2;
  std::optional<std::size_t> k, layers, lag;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_iters;
  bool allow_nonconverged = false;
};

int run_localize(const fs::path& data_dir, const std::optional<fs::path>& config_path, const fs::path& out,
                 const Overrides& ov) {
  pipeline::LocalizeConfig cfg;
  ValidatedBundle data;
  std::vector<FaultLabel> faults;
  try {
    if (config_path) pipeline::config_from_json(io::read_json(*config_path), cfg);
    if (ov.gamma) cfg.integration.gamma = *ov.gamma;
    if (ov.k) cfg.integration.k = *ov.k;
    if (ov.phi) cfg.propagation.phi = *ov.phi;
    if (ov.varphi) cfg.propagation.varphi = *ov.varphi;
    if (ov.lambda1) cfg.train.lambda1 = *ov.lambda1;
    if (ov.lambda2) cfg.train.lambda2 = *ov.lambda2;
    if (ov.layers) cfg.train.layers = *ov.layers;
    if (ov.lag) {
      cfg.train.p = *ov.lag;
      cfg.train.mlp_hidden = 2 * *ov.lag;
    }
    if (ov.seed) cfg.train.seed = *ov.seed;
    if (ov.max_iters) cfg.train.max_iters = *ov.max_iters;
    if (ov.allow_nonconverged) cfg.allow_nonconverged = true;
    cfg.validate();
    data = io::load_validated(data_dir, &faults);
  } catch (const Error& e) {
    std::cerr << "validation failed: " << e.what() << "\n";
    return BadInput;
  }
  pipeline::LocalizeResult res;
  try {
    res = pipeline::localize(data, faults, cfg);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DidNotConverge) {
      std::cerr << e.what() << " (rerun with --allow-nonconverged to accept)\n";
      return NotConverged;
    }
    throw;
  }
  fs::create_directories(out);
  io::write_json(out / "report.json", pipeline::reports_to_json(res.reports));
  io::write_json(out / "graphs.json", pipeline::graphs_to_json(res.fits, data.topology, cfg.train));
  for (const auto& r : res.reports) {
    std::cout << r.fault_id << ":";
    for (const auto& id : r.ranked) std::cout << " " << id;
    std::cout << "\n";
  }
  return Ok;
}

std::vector<FaultLabel> read_labels(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "topology.json" : path;
  const Json j = io::read_json(file);
  if (j.contains("high_level")) return io::topology_from_json(j).faults;
  return io::fault_labels_from_json(j.contains("faults") ? j.at("faults") : j);
}

int run_evaluate(const std::vector<fs::path>& report_paths, const fs::path& labels_path,
                 const std::optional<fs::path>& out) {
  std::vector<RcaReport> reports;
  for (const auto& p : report_paths) {
    auto part = pipeline::reports_from_json(io::read_json(p));
    reports.insert(reports.end(), part.begin(), part.end());
  }
  std::vector<FaultLabel> labels;
  try {
    labels = read_labels(labels_path);
  } catch (const Error& e) {
    std::cerr << "invalid labels: " << e.what() << "\n";
    return BadInput;
  }
  std::vector<eval_metrics::FaultOutcome> outcomes;
  try {
    outcomes = pipeline::match_outcomes(reports, labels);
  } catch (const Error& e) {
    std::cerr << "fault id mismatch: " << e.what() << "\n";
    return IdMismatch;
  }
  const Json metrics = pipeline::evaluate_outcomes(outcomes);
  if (out) io::write_json(*out, metrics);
  std::cout << metrics.dump(2) << "\n";
  return Ok;
}

int run_report(const fs::path& report_path, const std::optional<fs::path>& out) {
  const std::string md = pipeline::render_markdown(pipeline::reports_from_json(io::read_json(report_path)));
  if (out) io::write_text(*out, md);
  else std::cout << md;
  return Ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"inca: root cause localization over interdependent causal networks"};
  app.require_subcommand(1);

  fs::path synth_spec, synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset from a JSON spec");
  synth->add_option("spec", synth_spec, "spec file")->required();
  synth->add_option("-o,--out", synth_out, "output directory")->required();

  fs::path loc_data, loc_out;
  std::optional<fs::path> loc_config;
  Overrides ov;
  auto* loc = app.add_subcommand("localize", "learn graphs and rank root causes");
  loc->add_option("data", loc_data, "dataset directory")->required();
  loc->add_option("-c,--config", loc_config, "config JSON");
  loc->add_option("-o,--out", loc_out, "output directory")->required();
  loc->add_option("--gamma", ov.gamma);
  loc->add_option("--k", ov.k);
  loc->add_option("--phi", ov.phi);
  loc->add_option("--varphi", ov.varphi);
  loc->add_option("--lambda1", ov.lambda1);
  loc->add_option("--lambda2", ov.lambda2);
  loc->add_option("--layers", ov.layers);
  loc->add_option("--lag", ov.lag);
  loc->add_option("--seed", ov.seed);
  loc->add_option("--max-iters", ov.max_iters);
  loc->add_flag("--allow-nonconverged", ov.allow_nonconverged);

  std::vector<fs::path> ev_reports;
  fs::path ev_labels;
  std::optional<fs::path> ev_out;
  auto* ev = app.add_subcommand("evaluate", "score reports against labelled faults");
  ev->add_option("reports", ev_reports, "report JSON files")->required();
  ev->add_option("-l,--labels", ev_labels, "dataset directory, topology.json or label file")->required();
  ev->add_option("-o,--out", ev_out, "metrics JSON");

  fs::path rep_in;
  std::optional<fs::path> rep_out;
  auto* rep = app.add_subcommand("report", "render a markdown score table");
  rep->add_option("report", rep_in, "report JSON")->required();
  rep->add_option("-o,--out", rep_out, "markdown file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return run_synth(synth_spec, synth_out);
    if (*loc) return run_localize(loc_data, loc_config, loc_out, ov);
    if (*ev) return run_evaluate(ev_reports, ev_labels, ev_out);
    if (*rep) return run_report(rep_in, rep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Failure;
  }
  return Failure;
}
