#include "leorsma/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "leorsma/io.hpp"

#ifndef LEORSMA_VERSION
#define LEORSMA_VERSION "0.0.0"
#endif
#ifndef LEORSMA_GIT_REV
#define LEORSMA_GIT_REV "unknown"
#endif

namespace leorsma::experiments {

using nlohmann::json;

namespace {

constexpr std::uint64_t kDropStream = 0xd4090000ULL;
constexpr const char* kPowerSweep = "power_dbw";
constexpr const char* kSatelliteSweep = "num_satellites";

}  // namespace

std::string version_string() { return std::string(LEORSMA_VERSION) + "+" + LEORSMA_GIT_REV; }

void ExperimentConfig::validate() const {
  scenario.validate();
  arrays.validate();
  if (power_grid_dbw.empty()) throw InvalidInput("power_grid_dbw must not be empty");
  if (satellite_grid.empty()) throw InvalidInput("satellite_grid must not be empty");
  for (double p : power_grid_dbw) {
    if (!std::isfinite(p)) throw InvalidInput("power grid entries must be finite");
  }
  for (int s : satellite_grid) {
    if (s < 1) throw InvalidInput("satellite grid entries must be >= 1");
  }
  if (!std::isfinite(sat_sweep_power_dbw)) throw InvalidInput("sat_sweep_power_dbw must be finite");
  if (variants.empty()) throw InvalidInput("at least one variant is required");
  std::set<wmmse::Variant> seen(variants.begin(), variants.end());
  if (seen.size() != variants.size()) throw InvalidInput("duplicate variant");
  if (mc_samples < 100) throw InvalidInput("mc_samples must be >= 100");
  if (design_realizations < 1) throw InvalidInput("design_realizations must be >= 1");
  if (num_drops < 1) throw InvalidInput("num_drops must be >= 1");
  if (max_iters < 1) throw InvalidInput("optimizer.max_iters must be >= 1");
  if (!(rel_obj_tol > 0.0) || !(solver_tol > 0.0)) throw InvalidInput("optimizer tolerances must be positive");
  if (threads < 0) throw InvalidInput("threads must be >= 0");
}

json to_json(const ExperimentConfig& c) {
  json scenario = io::to_json(c.scenario);
  scenario.erase("rng_seed");
  json variants = json::array();
  for (auto v : c.variants) variants.push_back(wmmse::to_string(v));
  return {{"scenario", std::move(scenario)},
          {"arrays", io::to_json(c.arrays)},
          {"power_grid_dbw", c.power_grid_dbw},
          {"satellite_grid", c.satellite_grid},
          {"sat_sweep_power_dbw", c.sat_sweep_power_dbw},
          {"variants", std::move(variants)},
          {"mc_samples", c.mc_samples},
          {"design_realizations", c.design_realizations},
          {"num_drops", c.num_drops},
          {"seed", c.seed},
          {"output_dir", c.output_dir},
          {"optimizer",
           {{"max_iters", c.max_iters},
            {"rel_obj_tol", c.rel_obj_tol},
            {"solver_tol", c.solver_tol},
            {"reduce_basis", c.reduce_basis}}},
          {"threads", c.threads},
          {"record_wall_time", c.record_wall_time}};
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw InvalidInput(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  io::reject_unknown_keys(j,
                          {"scenario", "arrays", "power_grid_dbw", "satellite_grid", "sat_sweep_power_dbw",
                           "variants", "mc_samples", "design_realizations", "num_drops", "seed", "output_dir",
                           "optimizer", "threads", "record_wall_time"},
                          "config");
  ExperimentConfig c;
  if (j.contains("scenario")) c.scenario = io::scenario_config_from_json(j.at("scenario"));
  if (j.contains("arrays")) c.arrays = io::array_config_from_json(j.at("arrays"));
  read(j, "power_grid_dbw", c.power_grid_dbw);
  read(j, "satellite_grid", c.satellite_grid);
  read(j, "sat_sweep_power_dbw", c.sat_sweep_power_dbw);
  if (j.contains("variants")) {
    std::vector<std::string> names;
    read(j, "variants", names);
    c.variants.clear();
    for (const auto& n : names) c.variants.push_back(wmmse::variant_from_string(n));
  }
  read(j, "mc_samples", c.mc_samples);
  read(j, "design_realizations", c.design_realizations);
  read(j, "num_drops", c.num_drops);
  read(j, "seed", c.seed);
  read(j, "output_dir", c.output_dir);
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    io::reject_unknown_keys(o, {"max_iters", "rel_obj_tol", "solver_tol", "reduce_basis"}, "optimizer");
    read(o, "max_iters", c.max_iters);
    read(o, "rel_obj_tol", c.rel_obj_tol);
    read(o, "solver_tol", c.solver_tol);
    read(o, "reduce_basis", c.reduce_basis);
  }
  read(j, "threads", c.threads);
  read(j, "record_wall_time", c.record_wall_time);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidInput("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

int ResultTable::failures() const {
  return static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const ResultRow& r) { return !r.ok(); }));
}

std::uint64_t drop_seed(std::uint64_t seed, int drop) {
  Rng rng = substream(seed, kDropStream + static_cast<std::uint64_t>(drop));
  return rng();
}

namespace {

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == ';') c = ' ';
    if (c == '\n' || c == '\r' || c == '"') c = ' ';
  }
  return s;
}

ResultRow failed_row(const std::string& sweep, double value, wmmse::Variant v, int drop, const std::string& why) {
  ResultRow r;
  r.sweep = sweep;
  r.sweep_value = value;
  r.variant = wmmse::to_string(v);
  r.drop = drop;
  r.mmfr_ub = std::numeric_limits<double>::quiet_NaN();
  r.mmfr_true = r.mmfr_ub;
  r.mmfr_stderr = r.mmfr_ub;
  r.status = "error: " + sanitize(why);
  return r;
}

}  // namespace

DropOutcome run_drop(const ExperimentConfig& config, int num_satellites, double power_dbw, int drop,
                     const std::string& sweep, double sweep_value) {
  DropOutcome out;
  const std::uint64_t seed = drop_seed(config.seed, drop);
  try {
    geometry::ScenarioConfig sc = config.scenario;
    sc.num_satellites = num_satellites;
    sc.rng_seed = seed;
    out.scenario = geometry::build_scenario(sc);
    out.stats = channel::build_statistics(out.scenario, config.arrays, seed);
  } catch (const std::exception& e) {
    for (auto v : config.variants) out.rows.push_back(failed_row(sweep, sweep_value, v, drop, e.what()));
    return out;
  }
  const auto inputs = wmmse::VariantInputs::from(out.stats, out.scenario);

  for (auto v : config.variants) {
    wmmse::OptimizerSettings s;
    s.variant = v;
    s.power_budget = db2lin(power_dbw);
    s.max_iters = config.max_iters;
    s.rel_obj_tol = config.rel_obj_tol;
    s.solver_tol = config.solver_tol;
    s.reduce_basis = config.reduce_basis;
    s.design_realizations = config.design_realizations;
    s.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      auto design = wmmse::optimize_variant(inputs, s);
      ResultRow row;
      row.sweep = sweep;
      row.sweep_value = sweep_value;
      row.variant = wmmse::to_string(v);
      row.drop = drop;
      row.mmfr_ub = design.mmfr_ub;
      row.iterations = design.iterations;
      rates::RateReport report;
      if (wmmse::uses_statistics(v)) {
        rates::MonteCarloOptions mc;
        mc.num_samples = config.mc_samples;
        mc.seed = seed;
        mc.threads = 1;
        report = rates::ergodic_rates_mc(inputs.stats, design.q, mc);
        row.mmfr_true = report.mmfr;
        row.mmfr_stderr = report.mmfr_stderr;
      } else {
        row.mmfr_true = design.icsi_mmfr;
        row.mmfr_stderr = design.icsi_stderr;
      }
      if (config.record_wall_time) {
        row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
      out.designs.push_back(std::move(design));
      out.reports.push_back(std::move(report));
      out.rows.push_back(std::move(row));
    } catch (const wmmse::SolverFailure& e) {
      out.rows.push_back(failed_row(sweep, sweep_value, v, drop,
                                    std::string(e.what()) + " (iteration " + std::to_string(e.iteration()) + ")"));
    } catch (const std::exception& e) {
      out.rows.push_back(failed_row(sweep, sweep_value, v, drop, e.what()));
    }
  }
  return out;
}

namespace {

struct Point {
  int num_satellites;
  double power_dbw;
  double value;
};

ResultTable run_sweep(const ExperimentConfig& config, const std::string& sweep, const std::vector<Point>& points) {
  config.validate();
  const int drops = config.num_drops;
  const int tasks = static_cast<int>(points.size()) * drops;
  std::vector<std::vector<ResultRow>> slots(static_cast<std::size_t>(tasks));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next++; t < tasks; t = next++) {
      const auto& p = points[static_cast<std::size_t>(t / drops)];
      slots[static_cast<std::size_t>(t)] =
          run_drop(config, p.num_satellites, p.power_dbw, t % drops, sweep, p.value).rows;
    }
  };
  int workers = config.threads > 0 ? config.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, tasks);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  ResultTable table;
  table.sweep = sweep;
  for (auto& s : slots) {
    for (auto& r : s) table.rows.push_back(std::move(r));
  }
  return table;
}

}  // namespace

ResultTable run_power_sweep(const ExperimentConfig& config) {
  std::vector<Point> points;
  for (double p : config.power_grid_dbw) points.push_back({config.scenario.num_satellites, p, p});
  return run_sweep(config, kPowerSweep, points);
}

ResultTable run_satellite_sweep(const ExperimentConfig& config) {
  std::vector<Point> points;
  for (int s : config.satellite_grid) points.push_back({s, config.sat_sweep_power_dbw, static_cast<double>(s)});
  return run_sweep(config, kSatelliteSweep, points);
}

std::vector<SummaryRow> summarize(const ResultTable& table) {
  std::vector<SummaryRow> out;
  std::map<std::pair<double, std::string>, std::vector<const ResultRow*>> groups;
  std::vector<std::pair<double, std::string>> order;
  for (const auto& r : table.rows) {
    const auto key = std::make_pair(r.sweep_value, r.variant);
    if (!groups.count(key)) order.push_back(key);
    if (r.ok()) {
      groups[key].push_back(&r);
    } else {
      groups[key];
    }
  }
  for (const auto& key : order) {
    const auto& rows = groups[key];
    SummaryRow s;
    s.sweep = table.sweep;
    s.sweep_value = key.first;
    s.variant = key.second;
    s.num_drops = static_cast<int>(rows.size());
    if (rows.empty()) {
      s.mmfr_ub = s.mmfr_true = s.mmfr_true_stderr = s.mmfr_mc_stderr = std::numeric_limits<double>::quiet_NaN();
      out.push_back(s);
      continue;
    }
    const double n = static_cast<double>(rows.size());
    double mc_var = 0.0;
    for (const auto* r : rows) {
      s.mmfr_ub += r->mmfr_ub / n;
      s.mmfr_true += r->mmfr_true / n;
      mc_var += r->mmfr_stderr * r->mmfr_stderr;
    }
    s.mmfr_mc_stderr = std::sqrt(mc_var) / n;
    if (rows.size() > 1) {
      double var = 0.0;
      for (const auto* r : rows) var += (r->mmfr_true - s.mmfr_true) * (r->mmfr_true - s.mmfr_true);
      s.mmfr_true_stderr = std::sqrt(var / (n - 1.0) / n);
    }
    out.push_back(s);
  }
  return out;
}

const SummaryRow* find_summary(const std::vector<SummaryRow>& rows, double sweep_value, const std::string& variant) {
  for (const auto& r : rows) {
    if (r.sweep_value == sweep_value && r.variant == variant) return &r;
  }
  return nullptr;
}

std::string to_csv(const ResultTable& table) {
  std::ostringstream os;
  os << "# " << kResultSchema << '\n' << kResultHeader << '\n';
  for (const auto& r : table.rows) {
    os << r.sweep << ',' << io::format_double(r.sweep_value) << ',' << r.variant << ',' << r.drop << ','
       << io::format_double(r.mmfr_ub) << ',' << io::format_double(r.mmfr_true) << ','
       << io::format_double(r.mmfr_stderr) << ',' << r.iterations << ',' << io::format_double(r.wall_time) << ','
       << sanitize(r.status) << '\n';
  }
  return os.str();
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

int parse_int(const std::string& s) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw InvalidInput("not an integer: '" + s + "'");
  return v;
}

}  // namespace

ResultTable from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != std::string("# ") + kResultSchema) {
    throw InvalidInput(std::string("missing schema line '# ") + kResultSchema + "'");
  }
  if (!std::getline(in, line) || line != kResultHeader) throw InvalidInput("unexpected CSV header");
  ResultTable table;
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 10) throw InvalidInput("line " + std::to_string(lineno) + ": expected 10 fields");
    ResultRow r;
    r.sweep = f[0];
    r.sweep_value = io::parse_double(f[1]);
    r.variant = f[2];
    r.drop = parse_int(f[3]);
    r.mmfr_ub = io::parse_double(f[4]);
    r.mmfr_true = io::parse_double(f[5]);
    r.mmfr_stderr = io::parse_double(f[6]);
    r.iterations = parse_int(f[7]);
    r.wall_time = io::parse_double(f[8]);
    r.status = f[9];
    if (table.sweep.empty()) table.sweep = r.sweep;
    table.rows.push_back(std::move(r));
  }
  return table;
}

std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "# " << kResultSchema << '\n' << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    os << r.sweep << ',' << io::format_double(r.sweep_value) << ',' << r.variant << ',' << r.num_drops << ','
       << io::format_double(r.mmfr_ub) << ',' << io::format_double(r.mmfr_true) << ','
       << io::format_double(r.mmfr_true_stderr) << ',' << io::format_double(r.mmfr_mc_stderr) << '\n';
  }
  return os.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const std::string& suffix) {
  return stem.parent_path() / (stem.filename().string() + suffix);
}

}  // namespace

void persist(const ResultTable& table, const ExperimentConfig& config, const std::filesystem::path& stem) {
  if (!stem.parent_path().empty()) std::filesystem::create_directories(stem.parent_path());
  const auto csv = with_suffix(stem, ".csv");
  const auto summary = with_suffix(stem, "_summary.csv");
  write_file(csv, to_csv(table));
  write_file(summary, summary_to_csv(summarize(table)));
  json side = {{"schema", kResultSchema},
               {"version", version_string()},
               {"sweep", table.sweep},
               {"seed", config.seed},
               {"rows", table.rows.size()},
               {"failures", table.failures()},
               {"csv", csv.filename().string()},
               {"summary_csv", summary.filename().string()},
               {"config", to_json(config)}};
  write_file(with_suffix(stem, ".json"), side.dump(2) + "\n");
}

ResultTable load(const std::filesystem::path& stem) {
  const auto csv = with_suffix(stem, ".csv");
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + csv.string());
  std::ostringstream body;
  body << in.rdbuf();
  ResultTable table;
  try {
    table = from_csv(body.str());
  } catch (const InvalidInput& e) {
    throw InvalidInput(csv.string() + ": " + e.what());
  }
  std::ifstream side(with_suffix(stem, ".json"));
  if (side) {
    try {
      table.sweep = json::parse(side).value("sweep", table.sweep);
    } catch (const json::exception& e) {
      throw InvalidInput(with_suffix(stem, ".json").string() + ": " + e.what());
    }
  }
  return table;
}

}  // namespace leorsma::experiments
