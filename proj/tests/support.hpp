#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "leorsma/channel.hpp"
#include "leorsma/geometry.hpp"
#include "leorsma/rates.hpp"
#include "leorsma/wmmse.hpp"

namespace testsupport {

using namespace leorsma;

/// 2x2 arrays at both ends (M = N = 4).
inline channel::ArrayConfig small_arrays() {
  channel::ArrayConfig a;
  a.sat_x = a.sat_y = 2;
  a.ut_x = a.ut_y = 2;
  return a;
}

struct Instance {
  geometry::Scenario scenario;
  channel::ChannelStatistics physical;
  channel::ChannelStatistics stats;  // normalized
  rates::Mask mask;
};

inline Instance make_instance(int sats, int uts, std::uint64_t seed,
                              const channel::ArrayConfig& arrays = small_arrays()) {
  geometry::ScenarioConfig sc;
  sc.num_satellites = sats;
  sc.num_uts = uts;
  sc.rng_seed = seed;
  Instance in;
  in.scenario = geometry::build_scenario(sc);
  in.physical = channel::build_statistics(in.scenario, arrays, seed);
  in.stats = in.physical.normalized();
  in.mask = rates::mask_from_association(in.scenario.association);
  return in;
}

inline CVector random_cvector(int n, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  CVector v(n);
  for (int i = 0; i < n; ++i) v(i) = {gauss(rng), gauss(rng)};
  return v;
}

inline CMatrix random_cmatrix(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  CMatrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = {gauss(rng), gauss(rng)};
  return m;
}

/// Random masked precoder with every satellite block at a random power in [0.2P, P].
inline rates::PrecodingMatrix random_precoder(int sats, int sat_antennas, const rates::Mask& mask,
                                              const rates::StreamLayout& layout, double power, Rng& rng,
                                              bool with_common = true) {
  auto q = rates::PrecodingMatrix::zeros(sats, sat_antennas, mask, layout);
  q.q = random_cmatrix(sats * sat_antennas, layout.num_columns(), rng);
  if (!with_common) q.q.leftCols(layout.num_common).setZero();
  for (int k = 0; k < layout.num_uts(); ++k)
    for (int s = 0; s < sats; ++s)
      if (!mask(s, k)) q.q.block(s * sat_antennas, layout.private_column(k), sat_antennas, 1).setZero();
  std::uniform_real_distribution<double> frac(0.2, 1.0);
  for (int s = 0; s < sats; ++s) {
    auto rows = q.q.middleRows(s * sat_antennas, sat_antennas);
    const double p = rows.squaredNorm();
    if (p > 0.0) rows *= std::sqrt(frac(rng) * power / p);
  }
  return q;
}

inline double relative_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace testsupport
