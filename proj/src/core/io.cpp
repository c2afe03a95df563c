#include "inca/core/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "inca/core/error.hpp"

namespace inca::io {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t b = 0;
    while (b < cell.size() && cell[b] == ' ') ++b;
    out.push_back(cell.substr(b));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& cell, const fs::path& path, std::size_t line_no) {
  if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null")
    return kMissing;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    fail(ErrorCode::Parse, path.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
  return v;
}

std::int64_t parse_timestamp(const std::string& cell, const fs::path& path, std::size_t line_no) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    fail(ErrorCode::Parse,
         path.string() + ":" + std::to_string(line_no) + ": bad timestamp '" + cell + "'");
  return v;
}

struct RawCsv {
  std::vector<std::string> header;
  std::vector<std::int64_t> timestamps;
  std::vector<std::vector<double>> columns;
};

RawCsv read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  RawCsv csv;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::Parse, path.string() + ": empty file");
  csv.header = split_csv_line(line);
  if (csv.header.size() < 2 || csv.header[0] != "timestamp")
    fail(ErrorCode::Parse, path.string() + ": header must be `timestamp,<entity ids>`");
  csv.header.erase(csv.header.begin());
  csv.columns.resize(csv.header.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != csv.header.size() + 1)
      fail(ErrorCode::Parse, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                 std::to_string(csv.header.size() + 1) + " cells");
    csv.timestamps.push_back(parse_timestamp(cells[0], path, line_no));
    for (std::size_t j = 0; j < csv.header.size(); ++j)
      csv.columns[j].push_back(parse_cell(cells[j + 1], path, line_no));
  }
  return csv;
}

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (double v : m.row(r)) row.push_back(v);
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, std::size_t rows, std::size_t cols, const char* name) {
  if (!j.is_array() || j.size() != rows)
    fail(ErrorCode::Parse, std::string(name) + ": expected " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      fail(ErrorCode::Parse, std::string(name) + ": row " + std::to_string(r) + " needs " +
                                 std::to_string(cols) + " entries");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    fail(ErrorCode::Parse, std::string("missing required field '") + key + "'");
  return j.at(key);
}

}  // namespace

void interpolate_missing(std::vector<double>& series) {
  const std::size_t n = series.size();
  std::size_t first = n;
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isnan(series[i])) {
      first = i;
      break;
    }
  if (first == n) {
    std::fill(series.begin(), series.end(), 0.0);
    return;
  }
  for (std::size_t i = 0; i < first; ++i) series[i] = series[first];
  std::size_t prev = first;
  for (std::size_t i = first + 1; i < n; ++i) {
    if (std::isnan(series[i])) continue;
    const double span = static_cast<double>(i - prev);
    for (std::size_t k = prev + 1; k < i; ++k) {
      const double w = static_cast<double>(k - prev) / span;
      series[k] = (1.0 - w) * series[prev] + w * series[i];
    }
    prev = i;
  }
  for (std::size_t i = prev + 1; i < n; ++i) series[i] = series[prev];
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

MetricPanel read_panel_csv(const fs::path& path, const std::string& metric_name) {
  RawCsv csv = read_csv(path);
  MetricPanel panel{metric_name, csv.header, csv.timestamps,
                    Matrix(csv.timestamps.size(), csv.header.size())};
  for (std::size_t j = 0; j < csv.columns.size(); ++j) {
    interpolate_missing(csv.columns[j]);
    for (std::size_t r = 0; r < csv.timestamps.size(); ++r) panel.values(r, j) = csv.columns[j][r];
  }
  return panel;
}

void write_panel_csv(const fs::path& path, const MetricPanel& panel) {
  std::string out = "timestamp";
  for (const auto& id : panel.entity_ids) out += "," + id;
  out += "\n";
  for (std::size_t r = 0; r < panel.steps(); ++r) {
    out += std::to_string(panel.timestamps[r]);
    for (double v : panel.values.row(r)) {
      out += ",";
      out += format_double(v);
    }
    out += "\n";
  }
  write_text(path, out);
}

KpiFile read_kpi_csv(const fs::path& path) {
  RawCsv csv = read_csv(path);
  if (csv.header.size() != 1) fail(ErrorCode::Parse, path.string() + ": kpi file needs exactly one series");
  interpolate_missing(csv.columns[0]);
  return {csv.header[0], {csv.timestamps, csv.columns[0]}};
}

void write_kpi_csv(const fs::path& path, const std::string& kpi_id, const KpiSeries& kpi) {
  std::string out = "timestamp," + kpi_id + "\n";
  for (std::size_t r = 0; r < kpi.values.size(); ++r)
    out += std::to_string(kpi.timestamps[r]) + "," + format_double(kpi.values[r]) + "\n";
  write_text(path, out);
}

Json topology_to_json(const TopologyDocument& doc) {
  const auto& t = doc.topology;
  Json j;
  j["high_level"] = t.high_ids();
  Json aff = Json::object();
  for (std::size_t i = 0; i < t.n_low(); ++i) aff[t.low_ids()[i]] = t.high_ids()[t.affiliation()[i]];
  j["affiliation"] = std::move(aff);
  j["kpi_id"] = t.kpi_id();
  Json faults = Json::array();
  for (const auto& f : doc.faults) {
    Json fj;
    fj["fault_id"] = f.fault_id;
    fj["root_causes"] = std::vector<std::string>(f.true_root_causes.begin(), f.true_root_causes.end());
    if (f.fault_window) fj["window"] = {f.fault_window->begin, f.fault_window->end};
    faults.push_back(std::move(fj));
  }
  j["faults"] = std::move(faults);
  return j;
}

std::vector<FaultLabel> fault_labels_from_json(const Json& j) {
  std::vector<FaultLabel> out;
  try {
    if (!j.is_array()) fail(ErrorCode::Parse, "faults must be an array");
    for (const auto& fj : j) {
      FaultLabel f;
      f.fault_id = require(fj, "fault_id").get<std::string>();
      for (const auto& id : require(fj, "root_causes")) f.true_root_causes.insert(id.get<std::string>());
      if (f.true_root_causes.empty()) fail(ErrorCode::EmptyTruth, "fault '" + f.fault_id + "' has no root causes");
      if (fj.contains("window")) {
        const auto& w = fj.at("window");
        if (!w.is_array() || w.size() != 2) fail(ErrorCode::Parse, "fault window must be [begin, end]");
        f.fault_window = TimeWindow{w[0].get<std::int64_t>(), w[1].get<std::int64_t>()};
      }
      out.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("faults: ") + e.what());
  }
  return out;
}

TopologyDocument topology_from_json(const Json& j) {
  try {
    std::vector<std::string> high = require(j, "high_level").get<std::vector<std::string>>();
    std::vector<std::pair<std::string, std::string>> aff;
    const Json& affj = require(j, "affiliation");
    if (!affj.is_object()) fail(ErrorCode::Parse, "'affiliation' must be an object");
    for (const auto& [low, hi] : affj.items()) aff.emplace_back(low, hi.get<std::string>());
    TopologyDocument doc{TopologyDescriptor::create(std::move(high), aff,
                                                    require(j, "kpi_id").get<std::string>()),
                         {}};
    if (j.contains("faults")) doc.faults = fault_labels_from_json(j.at("faults"));
    for (const auto& f : doc.faults)
      for (const auto& id : f.true_root_causes)
        if (!doc.topology.low_index(id))
          fail(ErrorCode::UnknownEntity, "fault '" + f.fault_id + "' names unknown low-level '" + id + "'");
    return doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("topology: ") + e.what());
  }
}

Json graph_to_json(const InterdependentCausalGraph& graph, const TopologyDescriptor& topo) {
  Json j;
  j["metric"] = graph.metric_name;
  j["low_ids"] = topo.low_ids();
  j["high_ids"] = topo.high_ids();
  j["kpi_id"] = topo.kpi_id();
  j["w_low"] = matrix_to_json(graph.w_low);
  j["w_high"] = matrix_to_json(graph.w_high);
  j["w_cross"] = matrix_to_json(graph.w_cross);
  j["w_kpi"] = graph.w_kpi;
  return j;
}

InterdependentCausalGraph graph_from_json(const Json& j, const TopologyDescriptor& topo) {
  try {
    if (require(j, "low_ids").get<std::vector<std::string>>() != topo.low_ids() ||
        require(j, "high_ids").get<std::vector<std::string>>() != topo.high_ids())
      fail(ErrorCode::UnknownEntity, "graph entity headers do not match the topology");
    InterdependentCausalGraph g;
    g.metric_name = require(j, "metric").get<std::string>();
    g.w_low = matrix_from_json(require(j, "w_low"), topo.n_low(), topo.n_low(), "w_low");
    g.w_high = matrix_from_json(require(j, "w_high"), topo.g(), topo.g(), "w_high");
    g.w_cross = matrix_from_json(require(j, "w_cross"), topo.n_low(), topo.g(), "w_cross");
    g.w_kpi = require(j, "w_kpi").get<std::vector<double>>();
    if (g.w_kpi.size() != topo.g()) fail(ErrorCode::Parse, "w_kpi: expected " + std::to_string(topo.g()) + " entries");
    return g;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("graph: ") + e.what());
  }
}

Json report_to_json(const RcaReport& report) {
  Json j;
  j["fault_id"] = report.fault_id;
  j["k"] = report.k;
  j["ranked"] = report.ranked;
  Json scores = Json::object();
  for (const auto& [id, s] : report.per_entity)
    scores[id] = {{"topological", s.topological}, {"individual", s.individual}, {"final", s.final_score}};
  j["scores"] = std::move(scores);
  j["config"] = report.config_snapshot;
  return j;
}

RcaReport report_from_json(const Json& j) {
  try {
    RcaReport r;
    r.fault_id = require(j, "fault_id").get<std::string>();
    r.k = require(j, "k").get<std::size_t>();
    r.ranked = require(j, "ranked").get<std::vector<std::string>>();
    for (const auto& [id, s] : require(j, "scores").items())
      r.per_entity[id] = {s.at("topological").get<double>(), s.at("individual").get<double>(),
                          s.at("final").get<double>()};
    if (j.contains("config")) r.config_snapshot = j.at("config");
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("report: ") + e.what());
  }
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_all(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::Io, dir.string() + " is not a directory");
  Dataset ds{topology_from_json(read_json(dir / "topology.json")), {}, {}};
  KpiFile kpi = read_kpi_csv(dir / "kpi.csv");
  if (kpi.kpi_id != ds.doc.topology.kpi_id())
    fail(ErrorCode::UnknownEntity, "kpi.csv column '" + kpi.kpi_id + "' does not match kpi_id");
  ds.kpi = std::move(kpi.series);

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    const std::string stem = path.stem().string();
    std::string metric;
    if (stem.rfind("low_", 0) == 0) metric = stem.substr(4);
    else if (stem.rfind("high_", 0) == 0) metric = stem.substr(5);
    else continue;
    ds.panels.push_back(read_panel_csv(path, metric));
  }
  return ds;
}

ValidatedBundle load_validated(const fs::path& dir, std::vector<FaultLabel>* faults) {
  Dataset ds = load_dataset(dir);
  if (faults != nullptr) *faults = ds.doc.faults;
  return validate_topology(ds.doc.topology, ds.panels, ds.kpi);
}

void write_dataset(const fs::path& dir, const TopologyDocument& doc,
                   const std::vector<MetricPanel>& panels, const KpiSeries& kpi) {
  fs::create_directories(dir);
  write_json(dir / "topology.json", topology_to_json(doc));
  write_kpi_csv(dir / "kpi.csv", doc.topology.kpi_id(), kpi);
  for (const auto& p : panels) {
    const auto level = doc.topology.level_of(p.entity_ids.at(0));
    if (!level) fail(ErrorCode::UnknownEntity, "panel entity '" + p.entity_ids[0] + "' not in topology");
    write_panel_csv(dir / (std::string(to_string(*level)) + "_" + p.metric_name + ".csv"), p);
  }
}

}  // namespace inca::io
