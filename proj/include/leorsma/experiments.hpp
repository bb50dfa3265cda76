#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "leorsma/channel.hpp"
#include "leorsma/geometry.hpp"
#include "leorsma/wmmse.hpp"

namespace leorsma::experiments {

inline constexpr const char* kResultSchema = "leorsma-results/1";
inline constexpr const char* kResultHeader =
    "sweep,sweep_value,variant,drop,mmfr_ub,mmfr_true,mmfr_stderr,iterations,wall_time,status";
inline constexpr const char* kSummaryHeader =
    "sweep,sweep_value,variant,num_drops,mmfr_ub,mmfr_true,mmfr_true_stderr,mmfr_mc_stderr";

struct ExperimentConfig {
  geometry::ScenarioConfig scenario;
  channel::ArrayConfig arrays;
  std::vector<double> power_grid_dbw{5.0, 10.0, 15.0, 20.0};
  std::vector<int> satellite_grid{1, 2, 4};
  /// Transmit power of the satellite sweep and of `single`.
  double sat_sweep_power_dbw = 15.0;
  std::vector<wmmse::Variant> variants{wmmse::Variant::RsmaScsi, wmmse::Variant::SdmaScsi};
  int mc_samples = 5000;
  int design_realizations = 50;
  int num_drops = 10;
  std::uint64_t seed = 1;
  std::string output_dir = "results";
  int max_iters = 50;
  double rel_obj_tol = 1e-5;
  double solver_tol = 1e-7;
  bool reduce_basis = true;
  /// 0 selects the hardware concurrency.
  int threads = 0;
  /// Off by default so identical seeds give byte-identical CSVs.
  bool record_wall_time = false;

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Throws InvalidInput on unknown keys or invalid values.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

struct ResultRow {
  std::string sweep;  // "power_dbw" or "num_satellites"
  double sweep_value = 0.0;
  std::string variant;
  int drop = 0;
  double mmfr_ub = 0.0;
  double mmfr_true = 0.0;
  double mmfr_stderr = 0.0;
  int iterations = 0;
  double wall_time = 0.0;
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
  bool operator==(const ResultRow&) const = default;
};

struct SummaryRow {
  std::string sweep;
  double sweep_value = 0.0;
  std::string variant;
  int num_drops = 0;
  double mmfr_ub = 0.0;
  double mmfr_true = 0.0;
  double mmfr_true_stderr = 0.0;  // across drops
  double mmfr_mc_stderr = 0.0;    // mean Monte Carlo stderr / sqrt(drops)

  bool operator==(const SummaryRow&) const = default;
};

struct ResultTable {
  std::string sweep;
  std::vector<ResultRow> rows;  // ordered by (sweep value, drop, variant)

  int failures() const;
  bool operator==(const ResultTable&) const = default;
};

/// Averages successful rows over drops, per (sweep value, variant).
std::vector<SummaryRow> summarize(const ResultTable& table);
const SummaryRow* find_summary(const std::vector<SummaryRow>& rows, double sweep_value, const std::string& variant);

ResultTable run_power_sweep(const ExperimentConfig& config);
ResultTable run_satellite_sweep(const ExperimentConfig& config);

/// Seed of drop d, shared by every sweep point and variant of that drop.
std::uint64_t drop_seed(std::uint64_t seed, int drop);

/// One drop: scenario, statistics, the designs and their evaluations.
struct DropOutcome {
  geometry::Scenario scenario;
  channel::ChannelStatistics stats;  // physical units
  std::vector<wmmse::VariantResult> designs;
  std::vector<rates::RateReport> reports;  // empty report for iCSI
  std::vector<ResultRow> rows;
};

/// Designs and evaluates every configured variant for one (S, P, drop).
DropOutcome run_drop(const ExperimentConfig& config, int num_satellites, double power_dbw, int drop,
                     const std::string& sweep, double sweep_value);

/// Writes `<stem>.csv`, `<stem>_summary.csv` and the `<stem>.json` sidecar.
void persist(const ResultTable& table, const ExperimentConfig& config, const std::filesystem::path& stem);
ResultTable load(const std::filesystem::path& stem);

std::string to_csv(const ResultTable& table);
ResultTable from_csv(const std::string& text);
std::string summary_to_csv(const std::vector<SummaryRow>& rows);

std::string version_string();

}  // namespace leorsma::experiments
