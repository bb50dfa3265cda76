#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "leorsma/experiments.hpp"
#include "leorsma/io.hpp"

namespace fs = std::filesystem;
using namespace leorsma;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string variants;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config (defaults are used when omitted)");
  cmd->add_option("--seed", f.seed, "Override the master seed");
  cmd->add_option("--out", f.out, "Output directory (overrides output_dir)");
  cmd->add_option("--variants", f.variants, "Comma-separated variants, e.g. rsma-scsi,sdma-scsi");
}

experiments::ExperimentConfig resolve(const CommonFlags& f) {
  experiments::ExperimentConfig c = f.config.empty() ? experiments::ExperimentConfig{} : experiments::load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.output_dir = f.out;
  if (!f.variants.empty()) {
    c.variants.clear();
    std::stringstream ss(f.variants);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (!name.empty()) c.variants.push_back(wmmse::variant_from_string(name));
    }
  }
  c.validate();
  return c;
}

int run_sweep(const experiments::ExperimentConfig& c, bool power) {
  const auto table = power ? experiments::run_power_sweep(c) : experiments::run_satellite_sweep(c);
  const fs::path stem = fs::path(c.output_dir) / (power ? "power_sweep" : "satellite_sweep");
  experiments::persist(table, c, stem);
  std::cout << experiments::summary_to_csv(experiments::summarize(table));
  std::cerr << "wrote " << stem.string() << ".csv (" << table.rows.size() << " rows, " << table.failures()
            << " failures)\n";
  return table.failures() > 0 ? kExitPartial : kExitOk;
}

int run_single(const experiments::ExperimentConfig& c) {
  const int sats = c.scenario.num_satellites;
  const auto outcome = experiments::run_drop(c, sats, c.sat_sweep_power_dbw, 0, "single", c.sat_sweep_power_dbw);
  io::json doc = {{"schema", "leorsma-single/1"},
                  {"version", experiments::version_string()},
                  {"seed", c.seed},
                  {"drop_seed", experiments::drop_seed(c.seed, 0)},
                  {"power_dbw", c.sat_sweep_power_dbw},
                  {"config", experiments::to_json(c)}};
  int failures = 0;
  if (outcome.stats.num_uts > 0) {
    doc["scenario"] = io::to_json(outcome.scenario);
    doc["statistics"] = io::to_json(outcome.stats);
  }
  io::json variants = io::json::array();
  std::size_t design_index = 0;
  for (const auto& row : outcome.rows) {
    io::json v = {{"variant", row.variant},
                  {"status", row.status},
                  {"mmfr_ub", row.mmfr_ub},
                  {"mmfr_true", row.mmfr_true},
                  {"mmfr_stderr", row.mmfr_stderr},
                  {"iterations", row.iterations}};
    if (row.ok()) {
      const auto& d = outcome.designs[design_index];
      const auto& r = outcome.reports[design_index];
      ++design_index;
      io::json traces = io::json::array();
      for (const auto& t : d.traces) traces.push_back(io::to_json(t));
      v["traces"] = std::move(traces);
      if (d.q.q.size() > 0) v["precoder"] = io::to_json(d.q);
      if (r.num_samples > 0) v["monte_carlo"] = io::to_json(r);
    } else {
      ++failures;
    }
    std::cout << row.variant << ": mmfr_ub=" << row.mmfr_ub << " mmfr_true=" << row.mmfr_true << " +- "
              << row.mmfr_stderr << " iterations=" << row.iterations << " [" << row.status << "]\n";
    variants.push_back(std::move(v));
  }
  doc["variants"] = std::move(variants);
  fs::create_directories(c.output_dir);
  const fs::path path = fs::path(c.output_dir) / "single.json";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  std::cerr << "wrote " << path.string() << '\n';
  return failures > 0 ? kExitPartial : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Statistical-CSI RSMA precoding for cooperative LEO satellite downlink"};
  app.require_subcommand(1);
  app.set_version_flag("--version", experiments::version_string());

  CommonFlags power_flags, sat_flags, single_flags;
  auto* power = app.add_subcommand("power-sweep", "Average MMFR versus transmit power");
  auto* sat = app.add_subcommand("sat-sweep", "Average MMFR versus number of satellites");
  auto* single = app.add_subcommand("single", "One design and evaluation with trace dump");
  auto* defaults = app.add_subcommand("defaults", "Print the default config as JSON");
  add_common(power, power_flags);
  add_common(sat, sat_flags);
  add_common(single, single_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const CommonFlags& flags = power->parsed() ? power_flags : sat->parsed() ? sat_flags : single_flags;
  if (defaults->parsed()) {
    std::cout << experiments::to_json(experiments::ExperimentConfig{}).dump(2) << '\n';
    return kExitOk;
  }
  experiments::ExperimentConfig config;
  try {
    config = resolve(flags);
  } catch (const InvalidInput& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    if (power->parsed()) return run_sweep(config, true);
    if (sat->parsed()) return run_sweep(config, false);
    return run_single(config);
  } catch (const InvalidInput& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}
