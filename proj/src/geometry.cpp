#include "leorsma/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace leorsma::geometry {

void ScenarioConfig::validate() const {
  if (!(earth_radius_km > 0.0)) throw InvalidInput("earth radius must be positive");
  if (!(altitude_km > 0.0)) throw InvalidInput("altitude must be positive");
  if (!(max_nadir_deg > 0.0 && max_nadir_deg < 90.0)) {
    throw InvalidInput("max nadir angle must lie in (0, 90) degrees");
  }
  if (num_satellites < 1) throw InvalidInput("need at least one satellite");
  if (num_uts < 1) throw InvalidInput("need at least one UT");
}

bool Association::serves(int s, int k) const {
  const auto& sats = serving_sats.at(static_cast<std::size_t>(k));
  return std::binary_search(sats.begin(), sats.end(), s);
}

int Scenario::nearest_satellite(int k) const {
  Eigen::Index best = 0;
  distances_km.row(k).minCoeff(&best);
  return static_cast<int>(best);
}

namespace {

// sin of the UT-side interior angle of the Earth-centre/satellite/UT triangle.
double ut_angle_sine(double altitude_km, double max_nadir_deg, double earth_radius_km) {
  if (!(altitude_km > 0.0)) throw InvalidInput("altitude must be positive");
  if (!(max_nadir_deg > 0.0 && max_nadir_deg < 90.0)) {
    throw InvalidInput("nadir angle must lie in (0, 90) degrees");
  }
  const double x = (earth_radius_km + altitude_km) / earth_radius_km * std::sin(deg2rad(max_nadir_deg));
  if (x > 1.0) {
    throw InvalidInput("nadir angle points beyond the Earth's horizon");
  }
  return x;
}

}  // namespace

double coverage_central_angle_deg(double altitude_km, double max_nadir_deg, double earth_radius_km) {
  const double x = ut_angle_sine(altitude_km, max_nadir_deg, earth_radius_km);
  // UT interior angle is obtuse: pi - asin(x); central angle = pi - nadir - that.
  return rad2deg(std::asin(x)) - max_nadir_deg;
}

double max_slant_range(double altitude_km, double max_nadir_deg, double earth_radius_km) {
  const double gamma = deg2rad(coverage_central_angle_deg(altitude_km, max_nadir_deg, earth_radius_km));
  return earth_radius_km * std::sin(gamma) / std::sin(deg2rad(max_nadir_deg));
}

double elevation_angle(const Vec3& sat, const Vec3& ut, double earth_radius_km) {
  (void)earth_radius_km;
  const Vec3 up = ut.normalized();
  const Vec3 ray = (sat - ut).normalized();
  return rad2deg(std::asin(std::clamp(ray.dot(up), -1.0, 1.0)));
}

Association associate(const RMatrix& distances_km, double max_range_km) {
  const int num_uts = static_cast<int>(distances_km.rows());
  const int num_sats = static_cast<int>(distances_km.cols());
  Association assoc;
  assoc.served_uts.assign(static_cast<std::size_t>(num_sats), {});
  assoc.serving_sats.assign(static_cast<std::size_t>(num_uts), {});
  for (int k = 0; k < num_uts; ++k) {
    for (int s = 0; s < num_sats; ++s) {
      const double d = distances_km(k, s);
      if (!std::isfinite(d)) throw InvalidInput("distance matrix contains non-finite entries");
      if (d <= max_range_km) {
        assoc.served_uts[static_cast<std::size_t>(s)].push_back(k);
        assoc.serving_sats[static_cast<std::size_t>(k)].push_back(s);
      }
    }
    if (assoc.serving_sats[static_cast<std::size_t>(k)].empty()) {
      std::ostringstream msg;
      msg << "UT " << k << " is outside every coverage area";
      throw InvalidInput(msg.str());
    }
  }
  return assoc;
}

Vec3 unit_from_latlon(double lat_deg, double lon_deg) {
  const double lat = deg2rad(lat_deg);
  const double lon = deg2rad(lon_deg);
  return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

Scenario scenario_from_positions(const ScenarioConfig& config, std::vector<Vec3> satellites,
                                 std::vector<Vec3> uts) {
  config.validate();
  Scenario sc;
  sc.config = config;
  sc.max_slant_range_km = max_slant_range(config.altitude_km, config.max_nadir_deg, config.earth_radius_km);
  sc.satellite_positions = std::move(satellites);
  sc.ut_positions = std::move(uts);
  const int num_sats = sc.num_satellites();
  const int num_uts = sc.num_uts();
  sc.config.num_satellites = num_sats;
  sc.config.num_uts = num_uts;
  sc.distances_km.resize(num_uts, num_sats);
  sc.elevations_deg.resize(num_uts, num_sats);
  for (int k = 0; k < num_uts; ++k) {
    for (int s = 0; s < num_sats; ++s) {
      const Vec3& sat = sc.satellite_positions[static_cast<std::size_t>(s)];
      const Vec3& ut = sc.ut_positions[static_cast<std::size_t>(k)];
      sc.distances_km(k, s) = (sat - ut).norm();
      sc.elevations_deg(k, s) = elevation_angle(sat, ut, config.earth_radius_km);
    }
  }
  sc.association = associate(sc.distances_km, sc.max_slant_range_km);
  return sc;
}

Scenario build_scenario(const ScenarioConfig& config) {
  config.validate();
  const double re = config.earth_radius_km;
  const double gamma_deg = coverage_central_angle_deg(config.altitude_km, config.max_nadir_deg, re);
  const double pitch = config.satellite_spacing_deg > 0.0 ? config.satellite_spacing_deg : 1.4 * gamma_deg;

  // Regular lat/lon grid of sub-satellite points centred on (0, 0).
  const int n = config.num_satellites;
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  const int rows = (n + cols - 1) / cols;
  std::vector<Vec3> sub_points;
  for (int i = 0; i < n; ++i) {
    const int r = i / cols;
    const int c = i % cols;
    const double lat = (r - 0.5 * (rows - 1)) * pitch;
    const double lon = (c - 0.5 * (cols - 1)) * pitch;
    sub_points.push_back(unit_from_latlon(lat, lon));
  }
  std::vector<Vec3> sats;
  sats.reserve(sub_points.size());
  for (const Vec3& p : sub_points) sats.push_back((re + config.altitude_km) * p);

  // Bounding cap around the reference point that contains every coverage disk.
  const Vec3 ref = unit_from_latlon(0.0, 0.0);
  double cap = 0.0;
  for (const Vec3& p : sub_points) cap = std::max(cap, std::acos(std::clamp(p.dot(ref), -1.0, 1.0)));
  cap += deg2rad(gamma_deg);
  const Vec3 e1 = unit_from_latlon(0.0, 90.0);
  const Vec3 e2 = unit_from_latlon(90.0, 0.0);

  const double d_max = max_slant_range(config.altitude_km, config.max_nadir_deg, re);
  Rng rng = substream(config.rng_seed, 0x5ce7a710);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double cos_cap = std::cos(cap);

  std::vector<Vec3> uts;
  uts.reserve(static_cast<std::size_t>(config.num_uts));
  for (int k = 0; k < config.num_uts; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxRejectionAttempts && !placed; ++attempt) {
      const double cos_t = 1.0 - unit(rng) * (1.0 - cos_cap);
      const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
      const double phi = 2.0 * kPi * unit(rng);
      const Vec3 p = cos_t * ref + sin_t * (std::cos(phi) * e1 + std::sin(phi) * e2);
      const Vec3 ut = re * p;
      for (const Vec3& sat : sats) {
        if ((sat - ut).norm() <= d_max) {
          placed = true;
          break;
        }
      }
      if (placed) uts.push_back(ut);
    }
    if (!placed) throw NumericalError("UT rejection sampling exhausted its attempt budget");
  }

  Scenario sc = scenario_from_positions(config, std::move(sats), std::move(uts));
  sc.satellite_spacing_deg = pitch;
  return sc;
}

}  // namespace leorsma::geometry
