#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "leorsma/channel.hpp"
#include "leorsma/types.hpp"

namespace leorsma::rates {

/// mask(s, k) is true iff satellite s may carry UT k's private stream.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

Mask mask_from_association(const geometry::Association& assoc);

/// Assignment of UTs to common streams. The cooperative scheme uses a single
/// common stream decoded by everyone; the non-cooperative baseline uses one
/// common stream per satellite.
struct StreamLayout {
  int num_common = 1;
  std::vector<int> group_of_ut;  // common stream decoded by each UT

  static StreamLayout single(int num_uts) { return {1, std::vector<int>(static_cast<std::size_t>(num_uts), 0)}; }
  int num_uts() const { return static_cast<int>(group_of_ut.size()); }
  int num_columns() const { return num_common + num_uts(); }
  int common_column(int k) const { return group_of_ut[static_cast<std::size_t>(k)]; }
  int private_column(int k) const { return num_common + k; }
  bool operator==(const StreamLayout&) const = default;
};

/// Stacked precoder: columns [common..., private_1..private_K], rows in
/// satellite blocks of `sat_antennas`.
struct PrecodingMatrix {
  CMatrix q;
  Mask mask;  // S x K
  StreamLayout layout;
  int sat_antennas = 0;

  int num_sats() const { return static_cast<int>(mask.rows()); }
  int num_uts() const { return static_cast<int>(mask.cols()); }
  auto common() const { return q.col(0); }
  auto private_stream(int k) const { return q.col(layout.private_column(k)); }
  auto block(int s, int column) const { return q.block(s * sat_antennas, column, sat_antennas, 1); }

  static PrecodingMatrix zeros(int num_sats, int sat_antennas, const Mask& mask, StreamLayout layout);
  /// Largest |entry| found in a masked-out private block (0 when the mask holds).
  double mask_violation() const;
};

/// Per-UT common-decodable and private rates in bits/s/Hz.
struct StreamRates {
  RVector common;
  RVector priv;
};

struct Allocation {
  RVector common_share;  // R_{c,k}
  double mmfr = 0.0;
  // d(mmfr)/d(rate) for the binding constraints; used for delta-method errors.
  RVector weight_common;
  RVector weight_private;
};

struct RateReport {
  RVector f_c;
  RVector f_p;
  RVector f_c_stderr;
  RVector f_p_stderr;
  RVector common_share;
  double mmfr = 0.0;
  double mmfr_stderr = 0.0;
  int num_samples = 0;  // 0 for closed-form evaluations
};

enum class StreamKind { Common, Private };

struct CombinerSet {
  std::vector<CVector> u_c;
  std::vector<CVector> u_p;
  RVector v_c;
  RVector v_p;
};

/// Rates for arbitrary per-UT channel matrices (N x MS realizations or the
/// MS x MS effective channels). Log-dets use Cholesky of sigma2-regularized Grams.
StreamRates stream_rates(std::span<const CMatrix> channels, const PrecodingMatrix& q, double noise_variance);

StreamRates instantaneous_rates(std::span<const CMatrix> h, const PrecodingMatrix& q, double noise_variance);

/// Closed-form ergodic-rate upper bounds through the effective channels.
StreamRates rate_upper_bounds(std::span<const channel::EffectiveChannel> eff, const PrecodingMatrix& q,
                              double noise_variance);

std::vector<CMatrix> effective_matrices(std::span<const channel::EffectiveChannel> eff);

struct MonteCarloOptions {
  int num_samples = 5000;
  std::uint64_t seed = 1;
  /// Samples per RNG substream; fixes the reduction order.
  int chunk_size = 250;
  /// 0 selects std::thread::hardware_concurrency().
  int threads = 0;
};

/// Sample-mean ergodic rates and the MMFR of the re-solved common-rate
/// allocation. Bit-identical for any thread count.
RateReport ergodic_rates_mc(const channel::ChannelStatistics& stats, const PrecodingMatrix& q,
                            const MonteCarloOptions& options);

/// Reference evaluator: loops realizations one by one through
/// instantaneous_rates. Same substreams as ergodic_rates_mc.
RateReport ergodic_rates_naive(const channel::ChannelStatistics& stats, const PrecodingMatrix& q,
                               const MonteCarloOptions& options);

/// MSE of decoding `kind` at UT k with combiner u.
double mse(const CVector& u, const PrecodingMatrix& q, const CMatrix& channel, double noise_variance,
           StreamKind kind, int k);

/// Closed-form MMSE combiners and weights v = 1/e.
CombinerSet optimal_combiners_weights(const PrecodingMatrix& q, std::span<const CMatrix> channels,
                                      double noise_variance);

/// ln v - v e + 1
inline double wmmse_value(double v, double e) { return std::log(v) - v * e + 1.0; }

/// max_{R >= 0, sum R <= min f_c} min_k (R_k + f_p_k) by water-filling.
Allocation allocate_common_rate(const RVector& f_c, const RVector& f_p);

/// Per-group allocation: every common stream splits its own budget among its UTs.
Allocation allocate_common_rate(const RVector& f_c, const RVector& f_p, const StreamLayout& layout);

RateReport closed_form_report(const StreamRates& rates, const StreamLayout& layout);

}  // namespace leorsma::rates
