#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "leorsma/io.hpp"
#include "support.hpp"

using namespace leorsma;
using namespace leorsma::io;

TEST_CASE("shortest round-trip doubles") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, i % 40 - 20);
    CHECK(parse_double(format_double(x)) == x);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(std::isnan(parse_double(format_double(std::numeric_limits<double>::quiet_NaN()))));
  CHECK(parse_double(format_double(-std::numeric_limits<double>::infinity())) ==
        -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(parse_double("1.5x"), InvalidInput);
  CHECK_THROWS_AS(parse_double(""), InvalidInput);
}

TEST_CASE("complex values as pairs") {
  const json j = complex_to_json({1.5, -2.0});
  CHECK(j == json::array({1.5, -2.0}));
  CHECK(complex_from_json(j) == cplx(1.5, -2.0));
  CHECK_THROWS_AS(complex_from_json(json::array({1.0})), InvalidInput);
  Rng rng(2);
  const CMatrix m = testsupport::random_cmatrix(3, 2, rng);
  CHECK(matrix_from_json(matrix_to_json(m)) == m);
  const CVector v = testsupport::random_cvector(4, rng);
  CHECK(vector_from_json(vector_to_json(v)) == v);
}

TEST_CASE("statistics round trip") {
  const auto in = testsupport::make_instance(2, 3, 5);
  const json j = to_json(in.physical);
  CHECK(j.at("schema") == kStatisticsSchema);
  const auto back = statistics_from_json(json::parse(j.dump()));
  CHECK(back.num_uts == 3);
  CHECK(back.noise_variance == in.physical.noise_variance);
  for (std::size_t i = 0; i < back.links.size(); ++i) {
    CHECK(back.links[i].beta == in.physical.links[i].beta);
    CHECK(back.links[i].kappa == in.physical.links[i].kappa);
    CHECK(back.links[i].g == in.physical.links[i].g);
    CHECK(back.links[i].d0 == in.physical.links[i].d0);
    CHECK(back.links[i].sigma == in.physical.links[i].sigma);
  }
  json bad = j;
  bad["schema"] = "something-else/1";
  CHECK_THROWS_AS(statistics_from_json(bad), InvalidInput);
}

TEST_CASE("scenario and channel documents") {
  const auto in = testsupport::make_instance(2, 2, 1);
  const json s = to_json(in.scenario);
  CHECK(s.at("satellite_positions_km").size() == 2);
  CHECK(s.at("ut_positions_km").size() == 2);
  const json e = to_json(channel::effective_channel(in.stats, 0));
  CHECK(e.at("schema") == kEffectiveSchema);
  CHECK(e.at("h_hat").size() == 8);
}

TEST_CASE("config sections reject unknown keys") {
  CHECK_THROWS_AS(scenario_config_from_json(json{{"altitude", 600}}), InvalidInput);
  CHECK_THROWS_AS(array_config_from_json(json{{"sat_x", "five"}}), InvalidInput);
  const auto c = scenario_config_from_json(json{{"altitude_km", 550.0}});
  CHECK(c.altitude_km == 550.0);
  CHECK(c.num_uts == 6);
  const auto a = array_config_from_json(to_json(testsupport::small_arrays()));
  CHECK(a.sat_antennas() == 4);
}
