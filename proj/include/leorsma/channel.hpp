#pragma once

#include <utility>
#include <vector>

#include "leorsma/geometry.hpp"
#include "leorsma/types.hpp"

namespace leorsma::channel {

/// Linear Rician factors per 10-degree elevation bin: bin i covers [10i, 10i+10).
struct RicianTable {
  std::vector<double> linear{2.0, 3.0, 4.5, 6.5, 9.0, 12.0, 15.5, 20.0, 25.0};

  double lookup(double elevation_deg) const;
};

struct ArrayConfig {
  int sat_x = 5;
  int sat_y = 5;
  int ut_x = 4;
  int ut_y = 4;
  // element spacings in wavelengths
  double sat_spacing_x = 1.0;
  double sat_spacing_y = 1.0;
  double ut_spacing_x = 0.5;
  double ut_spacing_y = 0.5;
  double carrier_hz = 2e9;
  double bandwidth_hz = 50e6;
  double noise_temperature_k = 290.0;
  double sat_gain_dbi = 6.0;
  double ut_gain_dbi = 0.0;
  RicianTable rician;

  int sat_antennas() const { return sat_x * sat_y; }
  int ut_antennas() const { return ut_x * ut_y; }
  double wavelength_m() const { return kSpeedOfLight / carrier_hz; }
  void validate() const;
};

/// Statistical CSI of one satellite-to-UT link.
struct LinkStatistics {
  double beta = 0.0;   // average channel power (linear)
  double kappa = 1.0;  // Rician factor (linear)
  CVector g;           // unit-norm transmit response (M)
  CVector d0;          // unit-norm LoS receive response (N)
  CMatrix sigma;       // NLoS covariance, PSD with unit trace (N x N)

  void validate() const;
};

/// Statistics for every (UT, satellite) pair, row-major in k.
struct ChannelStatistics {
  int num_uts = 0;
  int num_sats = 0;
  int sat_antennas = 0;
  int ut_antennas = 0;
  /// Noise variance the betas are expressed against (1 after normalization).
  double noise_variance = 1.0;
  /// Physical noise variance in W; equal to noise_variance before normalization.
  double reference_noise_w = 1.0;
  std::vector<LinkStatistics> links;

  const LinkStatistics& link(int k, int s) const {
    return links[static_cast<std::size_t>(k * num_sats + s)];
  }
  LinkStatistics& link(int k, int s) { return links[static_cast<std::size_t>(k * num_sats + s)]; }
  int stacked_dim() const { return sat_antennas * num_sats; }

  /// Copy with every beta divided by the noise variance (noise becomes 1).
  ChannelStatistics normalized() const;
  /// Copy restricted to the given UTs and satellites (in the given order).
  ChannelStatistics subset(const std::vector<int>& uts, const std::vector<int>& sats) const;
  void validate() const;
};

enum class CsiModel {
  Statistical,  // full sCSI
  Directional,  // LoS components only
};

/// Per-UT surrogate channel: h_hat = (G D_hat G^H)^{1/2}.
struct EffectiveChannel {
  CMatrix h_hat;    // MS x MS Hermitian PSD
  CMatrix d_hat;    // S x S Hermitian PSD
  CMatrix g_block;  // MS x S block-diagonal transmit responses
};

/// Sampled receive responses of one UT.
struct ChannelRealization {
  CMatrix d;  // N x S
  CMatrix h;  // N x MS, equals d * G^H
};

CVector steering_vector(int n, double spacing_over_lambda, double directional_cosine);

/// Directional cosines q^x = sin(theta_y) cos(theta_x), q^y = cos(theta_y).
std::pair<double, double> directional_cosines(double theta_x, double theta_y);

CVector transmit_response(const ArrayConfig& array, double theta_x, double theta_y);

/// Departure angles (theta_x, theta_y) in rad of the ray from `sat` to `ut`
/// in the nadir-pointing satellite array frame (x east, y north).
std::pair<double, double> departure_angles(const Vec3& sat, const Vec3& ut);

double path_gain(double distance_m, double wavelength_m, double sat_gain_dbi, double ut_gain_dbi);

double noise_variance(double noise_temperature_k, double bandwidth_hz);

/// LoS receive response for elevation alpha: draws phi_y, then solves
/// sin(phi_x) sin(phi_y) = sin(alpha) for phi_x.
CVector los_receive_response(const ArrayConfig& array, double elevation_deg, Rng& rng);

/// diag(mu) with mu_n = u_n / sum(u), u_n ~ U(0,1).
CMatrix nlos_covariance(int n, Rng& rng);

/// Hermitian PSD square root; eigenvalues below -1e-12 * lambda_max are rejected,
/// smaller negatives are clamped to zero.
CMatrix psd_sqrt(const CMatrix& a);

/// Block-diagonal G_k (MS x S) of UT k's transmit responses.
CMatrix transmit_block(const ChannelStatistics& stats, int k);

/// D_hat_k = diag(beta) + LoS cross terms. Directional replaces the diagonal by
/// the LoS power kappa*beta/(kappa+1).
CMatrix receive_correlation(const ChannelStatistics& stats, int k, CsiModel model = CsiModel::Statistical);

EffectiveChannel effective_channel(const ChannelStatistics& stats, int k,
                                   CsiModel model = CsiModel::Statistical);
std::vector<EffectiveChannel> effective_channels(const ChannelStatistics& stats,
                                                 CsiModel model = CsiModel::Statistical);

/// Builds physical (un-normalized) statistics for every (UT, satellite) pair.
ChannelStatistics build_statistics(const geometry::Scenario& scenario, const ArrayConfig& array,
                                   std::uint64_t seed);

/// Draws receive matrices D_k for all UTs. Precomputes per-link factors once.
class RealizationSampler {
 public:
  explicit RealizationSampler(const ChannelStatistics& stats);

  /// Fills d[k] (N x S) for every UT from `rng`.
  void sample(Rng& rng, std::vector<CMatrix>& d) const;
  std::vector<ChannelRealization> sample_realizations(Rng& rng) const;

  const ChannelStatistics& statistics() const { return *stats_; }

 private:
  struct LinkFactor {
    double los_scale = 0.0;
    double nlos_scale = 0.0;
    bool diagonal = true;
    std::vector<double> nlos_std;  // sqrt(diag(sigma)) when diagonal
    CMatrix nlos_factor;           // sigma^{1/2} otherwise
  };
  const ChannelStatistics* stats_;
  std::vector<LinkFactor> factors_;
  std::vector<CMatrix> g_blocks_;
};

}  // namespace leorsma::channel
