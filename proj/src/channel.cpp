#include "leorsma/channel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "leorsma/kernels.hpp"

namespace leorsma::channel {

double RicianTable::lookup(double elevation_deg) const {
  if (linear.empty()) throw InvalidInput("Rician table is empty");
  const int bin = static_cast<int>(std::floor(std::clamp(elevation_deg, 0.0, 90.0) / 10.0));
  return linear[static_cast<std::size_t>(std::clamp(bin, 0, static_cast<int>(linear.size()) - 1))];
}

void ArrayConfig::validate() const {
  if (sat_x < 1 || sat_y < 1 || ut_x < 1 || ut_y < 1) throw InvalidInput("antenna counts must be >= 1");
  if (!(sat_spacing_x > 0 && sat_spacing_y > 0 && ut_spacing_x > 0 && ut_spacing_y > 0)) {
    throw InvalidInput("antenna spacings must be positive");
  }
  if (!(carrier_hz > 0.0)) throw InvalidInput("carrier frequency must be positive");
  if (!(bandwidth_hz > 0.0)) throw InvalidInput("bandwidth must be positive");
  if (!(noise_temperature_k >= 0.0)) throw InvalidInput("noise temperature must be non-negative");
  for (double k : rician.linear) {
    if (!(k > 0.0)) throw InvalidInput("Rician factors must be positive");
  }
}

void LinkStatistics::validate() const {
  if (!(beta > 0.0)) throw InvalidInput("link beta must be positive");
  if (!(kappa > 0.0)) throw InvalidInput("link Rician factor must be positive");
  if (std::abs(g.norm() - 1.0) > 1e-12) throw InvalidInput("transmit response must have unit norm");
  if (std::abs(d0.norm() - 1.0) > 1e-12) throw InvalidInput("LoS receive response must have unit norm");
  if (sigma.rows() != d0.size() || sigma.cols() != d0.size()) {
    throw InvalidInput("NLoS covariance dimension mismatch");
  }
  if (std::abs(sigma.trace().real() - 1.0) > 1e-12) throw InvalidInput("NLoS covariance must have unit trace");
}

void ChannelStatistics::validate() const {
  if (num_uts < 1 || num_sats < 1) throw InvalidInput("statistics need at least one UT and satellite");
  if (links.size() != static_cast<std::size_t>(num_uts * num_sats)) {
    throw InvalidInput("link table size does not match K x S");
  }
  if (!(noise_variance > 0.0)) throw InvalidInput("noise variance must be positive");
  for (const auto& l : links) {
    l.validate();
    if (l.g.size() != sat_antennas || l.d0.size() != ut_antennas) {
      throw InvalidInput("link vector dimensions do not match the arrays");
    }
  }
}

ChannelStatistics ChannelStatistics::normalized() const {
  ChannelStatistics out = *this;
  for (auto& l : out.links) l.beta /= noise_variance;
  out.noise_variance = 1.0;
  return out;
}

ChannelStatistics ChannelStatistics::subset(const std::vector<int>& uts, const std::vector<int>& sats) const {
  ChannelStatistics out;
  out.num_uts = static_cast<int>(uts.size());
  out.num_sats = static_cast<int>(sats.size());
  out.sat_antennas = sat_antennas;
  out.ut_antennas = ut_antennas;
  out.noise_variance = noise_variance;
  out.reference_noise_w = reference_noise_w;
  for (int k : uts) {
    for (int s : sats) out.links.push_back(link(k, s));
  }
  return out;
}

CVector steering_vector(int n, double spacing_over_lambda, double directional_cosine) {
  CVector e(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int i = 0; i < n; ++i) {
    e(i) = scale * std::polar(1.0, -2.0 * kPi * spacing_over_lambda * directional_cosine * i);
  }
  return e;
}

std::pair<double, double> directional_cosines(double theta_x, double theta_y) {
  return {std::sin(theta_y) * std::cos(theta_x), std::cos(theta_y)};
}

namespace {

CVector kron(const CVector& a, const CVector& b) {
  CVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

}  // namespace

CVector transmit_response(const ArrayConfig& array, double theta_x, double theta_y) {
  const auto [qx, qy] = directional_cosines(theta_x, theta_y);
  return kron(steering_vector(array.sat_x, array.sat_spacing_x, qx),
              steering_vector(array.sat_y, array.sat_spacing_y, qy));
}

std::pair<double, double> departure_angles(const Vec3& sat, const Vec3& ut) {
  const Vec3 r = sat.normalized();
  const Vec3 boresight = -r;
  Vec3 east = Vec3::UnitZ().cross(r);
  if (east.norm() < 1e-12) east = Vec3::UnitX();
  east.normalize();
  const Vec3 north = r.cross(east);
  const Vec3 dir = (ut - sat).normalized();
  const double theta_y = std::acos(std::clamp(dir.dot(north), -1.0, 1.0));
  const double theta_x = std::atan2(dir.dot(boresight), dir.dot(east));
  return {theta_x, theta_y};
}

double path_gain(double distance_m, double wavelength_m, double sat_gain_dbi, double ut_gain_dbi) {
  if (!(distance_m > 0.0)) throw InvalidInput("distance must be positive");
  const double fspl = 4.0 * kPi * distance_m / wavelength_m;
  return db2lin(sat_gain_dbi) * db2lin(ut_gain_dbi) / (fspl * fspl);
}

double noise_variance(double noise_temperature_k, double bandwidth_hz) {
  return kBoltzmann * noise_temperature_k * bandwidth_hz;
}

CVector los_receive_response(const ArrayConfig& array, double elevation_deg, Rng& rng) {
  const double alpha = deg2rad(std::clamp(elevation_deg, -90.0, 90.0));
  const double a = std::abs(alpha);
  // phi_y in [|alpha|, pi - |alpha|] keeps |sin(alpha) / sin(phi_y)| <= 1.
  std::uniform_real_distribution<double> phi_dist(a, kPi - a);
  const double phi_y = a >= 0.5 * kPi ? 0.5 * kPi : phi_dist(rng);
  const double ratio = std::clamp(std::sin(alpha) / std::sin(phi_y), -1.0, 1.0);
  const double phi_x = std::asin(ratio);
  const auto [qx, qy] = directional_cosines(phi_x, phi_y);
  return kron(steering_vector(array.ut_x, array.ut_spacing_x, qx),
              steering_vector(array.ut_y, array.ut_spacing_y, qy));
}

CMatrix nlos_covariance(int n, Rng& rng) {
  if (n < 1) throw InvalidInput("covariance dimension must be >= 1");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RVector mu(n);
  for (int i = 0; i < n; ++i) mu(i) = unit(rng);
  mu /= mu.sum();
  return mu.cast<cplx>().asDiagonal();
}

CMatrix psd_sqrt(const CMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(a);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  RVector lambda = eig.eigenvalues();
  const double lmax = std::max(lambda.maxCoeff(), 0.0);
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < -1e-12 * lmax) {
      std::ostringstream msg;
      msg << "matrix is not PSD: eigenvalue " << lambda(i) << " vs max " << lmax;
      throw NumericalError(msg.str());
    }
    lambda(i) = std::sqrt(std::max(lambda(i), 0.0));
  }
  const CMatrix& v = eig.eigenvectors();
  CMatrix root = v * lambda.cast<cplx>().asDiagonal() * v.adjoint();
  return 0.5 * (root + root.adjoint());
}

CMatrix transmit_block(const ChannelStatistics& stats, int k) {
  const int m = stats.sat_antennas;
  CMatrix g = CMatrix::Zero(stats.stacked_dim(), stats.num_sats);
  for (int s = 0; s < stats.num_sats; ++s) g.block(s * m, s, m, 1) = stats.link(k, s).g;
  return g;
}

CMatrix receive_correlation(const ChannelStatistics& stats, int k, CsiModel model) {
  const int n_sats = stats.num_sats;
  CMatrix d_hat = CMatrix::Zero(n_sats, n_sats);
  for (int s = 0; s < n_sats; ++s) {
    const auto& l = stats.link(k, s);
    const double los_power = l.kappa * l.beta / (l.kappa + 1.0);
    d_hat(s, s) = model == CsiModel::Statistical ? l.beta : los_power;
    for (int sp = 0; sp < n_sats; ++sp) {
      if (sp == s) continue;
      const auto& lp = stats.link(k, sp);
      const double amp = std::sqrt(lp.kappa * lp.beta * l.kappa * l.beta / ((lp.kappa + 1.0) * (l.kappa + 1.0)));
      d_hat(sp, s) = amp * lp.d0.dot(l.d0);  // Eigen dot conjugates the left operand
    }
  }
  return d_hat;
}

EffectiveChannel effective_channel(const ChannelStatistics& stats, int k, CsiModel model) {
  EffectiveChannel eff;
  eff.g_block = transmit_block(stats, k);
  eff.d_hat = receive_correlation(stats, k, model);
  const CMatrix d_root = psd_sqrt(eff.d_hat);
  const CMatrix gram = eff.g_block.adjoint() * eff.g_block;
  if ((gram - CMatrix::Identity(stats.num_sats, stats.num_sats)).norm() < 1e-10) {
    // Orthonormal G: (G D G^H)^{1/2} = G D^{1/2} G^H.
    eff.h_hat = eff.g_block * d_root * eff.g_block.adjoint();
  } else {
    eff.h_hat = psd_sqrt(eff.g_block * eff.d_hat * eff.g_block.adjoint());
  }
  return eff;
}

std::vector<EffectiveChannel> effective_channels(const ChannelStatistics& stats, CsiModel model) {
  std::vector<EffectiveChannel> out;
  out.reserve(static_cast<std::size_t>(stats.num_uts));
  for (int k = 0; k < stats.num_uts; ++k) out.push_back(effective_channel(stats, k, model));
  return out;
}

ChannelStatistics build_statistics(const geometry::Scenario& scenario, const ArrayConfig& array,
                                   std::uint64_t seed) {
  array.validate();
  ChannelStatistics stats;
  stats.num_uts = scenario.num_uts();
  stats.num_sats = scenario.num_satellites();
  stats.sat_antennas = array.sat_antennas();
  stats.ut_antennas = array.ut_antennas();
  stats.noise_variance = noise_variance(array.noise_temperature_k, array.bandwidth_hz);
  stats.reference_noise_w = stats.noise_variance;
  const double lambda = array.wavelength_m();
  for (int k = 0; k < stats.num_uts; ++k) {
    for (int s = 0; s < stats.num_sats; ++s) {
      Rng rng = substream(seed, 0x11000000ULL + static_cast<std::uint64_t>(k * stats.num_sats + s));
      const Vec3& sat = scenario.satellite_positions[static_cast<std::size_t>(s)];
      const Vec3& ut = scenario.ut_positions[static_cast<std::size_t>(k)];
      const double elevation = scenario.elevations_deg(k, s);
      LinkStatistics l;
      l.beta = path_gain(scenario.distances_km(k, s) * 1e3, lambda, array.sat_gain_dbi, array.ut_gain_dbi);
      l.kappa = array.rician.lookup(elevation);
      const auto [theta_x, theta_y] = departure_angles(sat, ut);
      l.g = transmit_response(array, theta_x, theta_y);
      l.d0 = los_receive_response(array, elevation, rng);
      l.sigma = nlos_covariance(stats.ut_antennas, rng);
      stats.links.push_back(std::move(l));
    }
  }
  return stats;
}

RealizationSampler::RealizationSampler(const ChannelStatistics& stats) : stats_(&stats) {
  factors_.reserve(stats.links.size());
  for (const auto& l : stats.links) {
    LinkFactor f;
    f.los_scale = std::sqrt(l.beta * l.kappa / (l.kappa + 1.0));
    f.nlos_scale = std::sqrt(l.beta / (l.kappa + 1.0));
    const CMatrix off = l.sigma - CMatrix(l.sigma.diagonal().asDiagonal());
    f.diagonal = off.norm() == 0.0;
    if (f.diagonal) {
      f.nlos_std.resize(static_cast<std::size_t>(l.sigma.rows()));
      for (Eigen::Index i = 0; i < l.sigma.rows(); ++i) {
        f.nlos_std[static_cast<std::size_t>(i)] = std::sqrt(std::max(l.sigma(i, i).real(), 0.0));
      }
    } else {
      f.nlos_factor = psd_sqrt(l.sigma);
    }
    factors_.push_back(std::move(f));
  }
  for (int k = 0; k < stats.num_uts; ++k) g_blocks_.push_back(transmit_block(stats, k));
}

void RealizationSampler::sample(Rng& rng, std::vector<CMatrix>& d) const {
  const auto& st = *stats_;
  const int n = st.ut_antennas;
  d.resize(static_cast<std::size_t>(st.num_uts));
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  CVector w(n);
  for (int k = 0; k < st.num_uts; ++k) {
    CMatrix& dk = d[static_cast<std::size_t>(k)];
    dk.resize(n, st.num_sats);
    for (int s = 0; s < st.num_sats; ++s) {
      const auto idx = static_cast<std::size_t>(k * st.num_sats + s);
      const auto& f = factors_[idx];
      const auto& l = st.links[idx];
      for (int i = 0; i < n; ++i) {
        const double re = normal(rng);
        const double im = normal(rng);
        w(i) = {re, im};
      }
      cplx* col = dk.col(s).data();
      if (f.diagonal) {
        kernels::rician_mix({l.d0.data(), static_cast<std::size_t>(n)}, f.los_scale, f.nlos_std,
                            {w.data(), static_cast<std::size_t>(n)}, f.nlos_scale,
                            {col, static_cast<std::size_t>(n)});
      } else {
        dk.col(s) = f.los_scale * l.d0 + f.nlos_scale * (f.nlos_factor * w);
      }
    }
  }
}

std::vector<ChannelRealization> RealizationSampler::sample_realizations(Rng& rng) const {
  std::vector<CMatrix> d;
  sample(rng, d);
  std::vector<ChannelRealization> out(d.size());
  for (std::size_t k = 0; k < d.size(); ++k) {
    out[k].h = d[k] * g_blocks_[k].adjoint();
    out[k].d = std::move(d[k]);
  }
  return out;
}

}  // namespace leorsma::channel
