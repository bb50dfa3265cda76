#pragma once

#include <cstdint>
#include <vector>

#include "leorsma/types.hpp"

namespace leorsma::geometry {

inline constexpr double kDefaultEarthRadiusKm = 6371.0;
/// Rejection-sampling budget for one UT drop.
inline constexpr int kMaxRejectionAttempts = 1'000'000;

struct ScenarioConfig {
  double earth_radius_km = kDefaultEarthRadiusKm;
  double altitude_km = 600.0;
  double max_nadir_deg = 30.0;
  int num_satellites = 4;
  int num_uts = 6;
  /// Central-angle pitch of the satellite grid. Non-positive selects the
  /// default of 1.4 coverage radii (adjacent disks overlap by ~30%).
  double satellite_spacing_deg = 0.0;
  std::uint64_t rng_seed = 1;

  void validate() const;
};

/// Satellite/UT sets: served_uts[s] = K_s, serving_sats[k] = S_k (both sorted).
struct Association {
  std::vector<std::vector<int>> served_uts;
  std::vector<std::vector<int>> serving_sats;

  bool serves(int s, int k) const;
  int num_satellites() const { return static_cast<int>(served_uts.size()); }
  int num_uts() const { return static_cast<int>(serving_sats.size()); }
};

struct Scenario {
  ScenarioConfig config;
  double max_slant_range_km = 0.0;
  double satellite_spacing_deg = 0.0;
  std::vector<Vec3> satellite_positions;  // km, Earth-centred
  std::vector<Vec3> ut_positions;         // km, on the Earth surface
  RMatrix distances_km;                   // K x S
  RMatrix elevations_deg;                 // K x S
  Association association;

  int num_satellites() const { return static_cast<int>(satellite_positions.size()); }
  int num_uts() const { return static_cast<int>(ut_positions.size()); }
  /// Index of the satellite with the smallest slant range to UT k.
  int nearest_satellite(int k) const;
};

/// Slant range at the edge of coverage for a nadir angle limit.
double max_slant_range(double altitude_km, double max_nadir_deg,
                       double earth_radius_km = kDefaultEarthRadiusKm);

/// Central angle (deg) between a sub-satellite point and the coverage edge.
double coverage_central_angle_deg(double altitude_km, double max_nadir_deg,
                                  double earth_radius_km = kDefaultEarthRadiusKm);

/// Elevation of `sat` seen from `ut`, in degrees within [-90, 90].
double elevation_angle(const Vec3& sat, const Vec3& ut, double earth_radius_km);

/// s in S_k iff distances(k, s) <= max_range. Throws if a UT is left unserved.
Association associate(const RMatrix& distances_km, double max_range_km);

/// Unit vector for geographic latitude/longitude (deg).
Vec3 unit_from_latlon(double lat_deg, double lon_deg);

Scenario build_scenario(const ScenarioConfig& config);

/// Assembles a scenario from explicit positions (used by tests and replays).
Scenario scenario_from_positions(const ScenarioConfig& config, std::vector<Vec3> satellites,
                                 std::vector<Vec3> uts);

}  // namespace leorsma::geometry
