#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "leorsma/geometry.hpp"

using namespace leorsma;
using namespace leorsma::geometry;

namespace {
constexpr double kRe = 6371.0;
constexpr double kH = 600.0;
}  // namespace

TEST_CASE("max slant range at 30 degree nadir") {
  const double d = max_slant_range(kH, 30.0, kRe);
  CHECK(std::abs(d - 704.059) <= 0.5);
  // law of cosines on the central angle
  const double gamma = deg2rad(coverage_central_angle_deg(kH, 30.0, kRe));
  const double d2 = std::sqrt(kRe * kRe + (kRe + kH) * (kRe + kH) - 2.0 * kRe * (kRe + kH) * std::cos(gamma));
  CHECK(std::abs(d - d2) < 1e-9 * d);
  CHECK(std::abs(d - 704.059175475614) < 1e-8);
}

TEST_CASE("max slant range limits and domain") {
  CHECK(std::abs(max_slant_range(kH, 1e-7, kRe) - kH) < 1e-6);
  CHECK_THROWS_AS(max_slant_range(kH, 75.0, kRe), InvalidInput);
  CHECK_THROWS_AS(max_slant_range(kH, 0.0, kRe), InvalidInput);
  CHECK_THROWS_AS(max_slant_range(-1.0, 30.0, kRe), InvalidInput);
}

TEST_CASE("elevation angle") {
  const Vec3 ut(kRe, 0.0, 0.0);
  CHECK(elevation_angle(Vec3(kRe + kH, 0.0, 0.0), ut, kRe) == doctest::Approx(90.0));
  const double tangent = std::sqrt((kRe + kH) * (kRe + kH) - kRe * kRe);
  CHECK(std::abs(elevation_angle(Vec3(kRe, tangent, 0.0), ut, kRe)) < 1e-9);
  const double gamma = deg2rad(coverage_central_angle_deg(kH, 30.0, kRe));
  const Vec3 edge = (kRe + kH) * Vec3(std::cos(gamma), std::sin(gamma), 0.0);
  CHECK(elevation_angle(edge, ut, kRe) == doctest::Approx(56.832508676047).epsilon(1e-10));
}

TEST_CASE("associate thresholds distances") {
  RMatrix one(1, 1);
  one << 650.0;
  auto a = associate(one, 704.9);
  CHECK(a.serving_sats[0] == std::vector<int>{0});

  RMatrix two(1, 2);
  two << 650.0, 800.0;
  a = associate(two, 704.9);
  CHECK(a.serving_sats[0] == std::vector<int>{0});
  CHECK(a.served_uts[1].empty());
  CHECK(a.serves(0, 0));
  CHECK_FALSE(a.serves(1, 0));

  RMatrix none(1, 1);
  none << 900.0;
  CHECK_THROWS_AS(associate(none, 704.9), InvalidInput);
}

TEST_CASE("associate matches a brute-force scan") {
  Rng rng(11);
  std::uniform_real_distribution<double> dist(600.0, 900.0);
  for (int trial = 0; trial < 20; ++trial) {
    RMatrix d(10, 4);
    for (int k = 0; k < 10; ++k) {
      for (int s = 0; s < 4; ++s) d(k, s) = dist(rng);
      d(k, trial % 4) = 650.0;
    }
    const auto a = associate(d, 704.9);
    for (int k = 0; k < 10; ++k) {
      for (int s = 0; s < 4; ++s) {
        const bool in = d(k, s) <= 704.9;
        const auto& sk = a.serving_sats[k];
        const auto& ks = a.served_uts[s];
        CHECK((std::find(sk.begin(), sk.end(), s) != sk.end()) == in);
        CHECK((std::find(ks.begin(), ks.end(), k) != ks.end()) == in);
      }
    }
  }
}

TEST_CASE("single satellite scenario") {
  ScenarioConfig c;
  c.num_satellites = 1;
  c.num_uts = 1;
  const auto s = build_scenario(c);
  REQUIRE(s.num_uts() == 1);
  CHECK(s.association.serving_sats[0].size() == 1);
  CHECK(s.distances_km(0, 0) <= s.max_slant_range_km + 1e-9);
  CHECK(s.nearest_satellite(0) == 0);
}

TEST_CASE("scenario is deterministic under its seed") {
  ScenarioConfig c;
  c.num_satellites = 4;
  c.num_uts = 6;
  c.rng_seed = 42;
  const auto a = build_scenario(c);
  const auto b = build_scenario(c);
  REQUIRE(a.num_uts() == b.num_uts());
  for (int k = 0; k < a.num_uts(); ++k) CHECK(a.ut_positions[k] == b.ut_positions[k]);
  CHECK(a.distances_km == b.distances_km);
  CHECK(a.elevations_deg == b.elevations_deg);
  c.rng_seed = 43;
  CHECK(build_scenario(c).ut_positions[0] != a.ut_positions[0]);
}

TEST_CASE("four satellites, ten UTs: coverage and overlap") {
  int overlapping = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ScenarioConfig c;
    c.num_satellites = 4;
    c.num_uts = 10;
    c.rng_seed = seed;
    const auto s = build_scenario(c);
    for (int k = 0; k < s.num_uts(); ++k) {
      CHECK(!s.association.serving_sats[k].empty());
      if (s.association.serving_sats[k].size() >= 2) ++overlapping;
      CHECK(std::abs(s.ut_positions[k].norm() - kRe) < 1e-9 * kRe);
      for (int sat = 0; sat < s.num_satellites(); ++sat) {
        const double d = s.distances_km(k, sat);
        const double alpha = deg2rad(s.elevations_deg(k, sat));
        const double lhs = kRe * kRe + d * d + 2.0 * kRe * d * std::sin(alpha);
        CHECK(std::abs(lhs - (kRe + kH) * (kRe + kH)) <= 1e-9 * (kRe + kH) * (kRe + kH));
        CHECK(d >= kH - 1e-9);
      }
    }
  }
  CHECK(overlapping > 0);
}

TEST_CASE("scenario config validation") {
  ScenarioConfig c;
  c.num_uts = 0;
  CHECK_THROWS_AS(build_scenario(c), InvalidInput);
  c = {};
  c.max_nadir_deg = 95.0;
  CHECK_THROWS_AS(build_scenario(c), InvalidInput);
}
