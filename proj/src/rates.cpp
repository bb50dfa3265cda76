#include "leorsma/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include <Eigen/Cholesky>

#include "leorsma/kernels.hpp"

namespace leorsma::rates {

Mask mask_from_association(const geometry::Association& assoc) {
  Mask m = Mask::Constant(assoc.num_satellites(), assoc.num_uts(), false);
  for (int s = 0; s < assoc.num_satellites(); ++s) {
    for (int k : assoc.served_uts[static_cast<std::size_t>(s)]) m(s, k) = true;
  }
  return m;
}

PrecodingMatrix PrecodingMatrix::zeros(int num_sats, int sat_antennas, const Mask& mask, StreamLayout layout) {
  PrecodingMatrix p;
  p.sat_antennas = sat_antennas;
  p.mask = mask;
  p.layout = std::move(layout);
  p.q = CMatrix::Zero(num_sats * sat_antennas, p.layout.num_columns());
  return p;
}

double PrecodingMatrix::mask_violation() const {
  double worst = 0.0;
  for (int s = 0; s < num_sats(); ++s) {
    for (int k = 0; k < num_uts(); ++k) {
      if (!mask(s, k)) worst = std::max(worst, block(s, layout.private_column(k)).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

namespace {

void require_positive_noise(double noise_variance) {
  if (!(noise_variance > 0.0)) throw InvalidInput("noise variance must be positive");
}

// log2 det(I + gamma restricted to the columns with keep[i]).
double log2det_subset(const CMatrix& gamma, const std::vector<char>& keep) {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) idx.push_back(static_cast<Eigen::Index>(i));
  }
  if (idx.empty()) return 0.0;
  const auto n = static_cast<Eigen::Index>(idx.size());
  CMatrix m(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) m(a, b) = gamma(idx[a], idx[b]);
    m(a, a) += 1.0;
  }
  Eigen::LLT<CMatrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError("Gram form is not positive definite");
  double acc = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) acc += std::log(llt.matrixLLT()(a, a).real());
  return 2.0 * acc / kLn2;
}

// Rates of UT k from its normalized stream Gram gamma = V^H V / sigma2.
void rates_from_gram(const CMatrix& gamma, const StreamLayout& layout, int k, double& f_c, double& f_p) {
  const auto cols = static_cast<std::size_t>(layout.num_columns());
  std::vector<char> keep(cols, 1);
  const double all = log2det_subset(gamma, keep);
  keep[static_cast<std::size_t>(layout.common_column(k))] = 0;
  const double no_common = log2det_subset(gamma, keep);
  keep[static_cast<std::size_t>(layout.private_column(k))] = 0;
  const double no_own = log2det_subset(gamma, keep);
  f_c = std::max(0.0, all - no_common);
  f_p = std::max(0.0, no_common - no_own);
}

}  // namespace

StreamRates stream_rates(std::span<const CMatrix> channels, const PrecodingMatrix& q, double noise_variance) {
  require_positive_noise(noise_variance);
  const int num_uts = q.num_uts();
  if (static_cast<int>(channels.size()) != num_uts) throw InvalidInput("one channel matrix per UT required");
  StreamRates out{RVector::Zero(num_uts), RVector::Zero(num_uts)};
  for (int k = 0; k < num_uts; ++k) {
    const CMatrix& h = channels[static_cast<std::size_t>(k)];
    if (h.cols() != q.q.rows()) throw InvalidInput("channel/precoder dimension mismatch");
    const CMatrix v = h * q.q;
    const CMatrix gamma = (v.adjoint() * v) / noise_variance;
    rates_from_gram(gamma, q.layout, k, out.common(k), out.priv(k));
  }
  return out;
}

StreamRates instantaneous_rates(std::span<const CMatrix> h, const PrecodingMatrix& q, double noise_variance) {
  return stream_rates(h, q, noise_variance);
}

std::vector<CMatrix> effective_matrices(std::span<const channel::EffectiveChannel> eff) {
  std::vector<CMatrix> out;
  out.reserve(eff.size());
  for (const auto& e : eff) out.push_back(e.h_hat);
  return out;
}

StreamRates rate_upper_bounds(std::span<const channel::EffectiveChannel> eff, const PrecodingMatrix& q,
                              double noise_variance) {
  const auto h = effective_matrices(eff);
  return stream_rates(h, q, noise_variance);
}

Allocation allocate_common_rate(const RVector& f_c, const RVector& f_p) {
  const Eigen::Index n = f_p.size();
  if (n == 0 || f_c.size() != n) throw InvalidInput("rate vectors must be non-empty and equally sized");
  Allocation a;
  a.common_share = RVector::Zero(n);
  a.weight_common = RVector::Zero(n);
  a.weight_private = RVector::Zero(n);

  Eigen::Index argmin_c = 0;
  const double budget = std::max(0.0, f_c.minCoeff(&argmin_c));
  Eigen::Index argmin_p = 0;
  const double floor = f_p.minCoeff(&argmin_p);
  if (budget <= 0.0) {
    a.mmfr = floor;
    a.weight_private(argmin_p) = 1.0;
    return a;
  }
  auto fill = [&](double level) { return (level - f_p.array()).max(0.0).sum(); };
  double lo = floor;
  double hi = floor + budget;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (fill(mid) <= budget ? lo : hi) = mid;
  }
  const double level = lo;
  a.common_share = (level - f_p.array()).max(0.0).matrix();
  const double used = a.common_share.sum();
  if (used > budget) a.common_share *= budget / used;
  a.mmfr = (a.common_share + f_p).minCoeff();

  // Level = (budget + sum_{active} f_p) / |active|.
  std::vector<Eigen::Index> active;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (f_p(k) < level) active.push_back(k);
  }
  if (active.empty()) active.push_back(argmin_p);
  const double w = 1.0 / static_cast<double>(active.size());
  a.weight_common(argmin_c) = w;
  for (auto k : active) a.weight_private(k) = w;
  return a;
}

Allocation allocate_common_rate(const RVector& f_c, const RVector& f_p, const StreamLayout& layout) {
  const Eigen::Index n = f_p.size();
  if (layout.num_uts() != n) throw InvalidInput("layout/rate size mismatch");
  if (layout.num_common == 1) return allocate_common_rate(f_c, f_p);
  Allocation out;
  out.common_share = RVector::Zero(n);
  out.weight_common = RVector::Zero(n);
  out.weight_private = RVector::Zero(n);
  out.mmfr = std::numeric_limits<double>::infinity();
  for (int g = 0; g < layout.num_common; ++g) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (layout.group_of_ut[static_cast<std::size_t>(k)] == g) members.push_back(k);
    }
    if (members.empty()) continue;
    RVector gc(static_cast<Eigen::Index>(members.size()));
    RVector gp(gc.size());
    for (std::size_t i = 0; i < members.size(); ++i) {
      gc(static_cast<Eigen::Index>(i)) = f_c(members[i]);
      gp(static_cast<Eigen::Index>(i)) = f_p(members[i]);
    }
    const Allocation part = allocate_common_rate(gc, gp);
    for (std::size_t i = 0; i < members.size(); ++i) {
      out.common_share(members[i]) = part.common_share(static_cast<Eigen::Index>(i));
    }
    if (part.mmfr < out.mmfr) {
      out.mmfr = part.mmfr;
      out.weight_common.setZero();
      out.weight_private.setZero();
      for (std::size_t i = 0; i < members.size(); ++i) {
        out.weight_common(members[i]) = part.weight_common(static_cast<Eigen::Index>(i));
        out.weight_private(members[i]) = part.weight_private(static_cast<Eigen::Index>(i));
      }
    }
  }
  return out;
}

RateReport closed_form_report(const StreamRates& rates, const StreamLayout& layout) {
  RateReport r;
  r.f_c = rates.common;
  r.f_p = rates.priv;
  r.f_c_stderr = RVector::Zero(rates.common.size());
  r.f_p_stderr = RVector::Zero(rates.priv.size());
  const Allocation a = allocate_common_rate(rates.common, rates.priv, layout);
  r.common_share = a.common_share;
  r.mmfr = a.mmfr;
  return r;
}

namespace {

// Per-sample rates, one row per sample: [f_c (K) | f_p (K)].
RateReport summarize(const RMatrix& samples, const StreamLayout& layout) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index k = samples.cols() / 2;
  const RVector mean = samples.colwise().mean();
  const RMatrix centered = samples.rowwise() - mean.transpose();
  const RVector var = centered.cwiseAbs2().colwise().sum() / static_cast<double>(n - 1);
  const RVector se = (var / static_cast<double>(n)).cwiseSqrt();
  RateReport r;
  r.num_samples = static_cast<int>(n);
  r.f_c = mean.head(k);
  r.f_p = mean.tail(k);
  r.f_c_stderr = se.head(k);
  r.f_p_stderr = se.tail(k);
  const Allocation a = allocate_common_rate(r.f_c, r.f_p, layout);
  r.common_share = a.common_share;
  r.mmfr = a.mmfr;
  // Delta method on the binding linear combination of rates.
  RVector w(2 * k);
  w << a.weight_common, a.weight_private;
  const RVector lin = centered * w;
  r.mmfr_stderr = std::sqrt(lin.squaredNorm() / static_cast<double>(n - 1) / static_cast<double>(n));
  return r;
}

template <typename ChunkFn>
void run_chunks(int num_chunks, int threads, ChunkFn&& fn) {
  int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, num_chunks);
  if (workers <= 1) {
    for (int c = 0; c < num_chunks; ++c) fn(c);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (int c = t; c < num_chunks; c += workers) fn(c);
    });
  }
  for (auto& th : pool) th.join();
}

void validate_mc(const channel::ChannelStatistics& stats, const PrecodingMatrix& q, const MonteCarloOptions& o) {
  if (o.num_samples < 2) throw InvalidInput("Monte Carlo needs at least two samples");
  if (o.chunk_size < 1) throw InvalidInput("chunk size must be positive");
  if (q.num_uts() != stats.num_uts || q.num_sats() != stats.num_sats || q.q.rows() != stats.stacked_dim()) {
    throw InvalidInput("precoder does not match the channel statistics");
  }
  require_positive_noise(stats.noise_variance);
}

constexpr std::uint64_t kMonteCarloStream = 0x4d430000ULL;

}  // namespace

RateReport ergodic_rates_mc(const channel::ChannelStatistics& stats, const PrecodingMatrix& q,
                            const MonteCarloOptions& options) {
  validate_mc(stats, q, options);
  const int num_uts = stats.num_uts;
  const int num_sats = stats.num_sats;
  const auto n_rx = static_cast<std::size_t>(stats.ut_antennas);
  const double inv_noise = 1.0 / stats.noise_variance;

  // C_k = G_k^H Q is deterministic; realizations only enter through D_k^H D_k.
  std::vector<CMatrix> reduced;
  for (int k = 0; k < num_uts; ++k) reduced.push_back(channel::transmit_block(stats, k).adjoint() * q.q);

  const channel::RealizationSampler sampler(stats);
  const int num_chunks = (options.num_samples + options.chunk_size - 1) / options.chunk_size;
  RMatrix samples(options.num_samples, 2 * num_uts);

  run_chunks(num_chunks, options.threads, [&](int chunk) {
    Rng rng = substream(options.seed, kMonteCarloStream + static_cast<std::uint64_t>(chunk));
    std::vector<CMatrix> d;
    CMatrix dgram(num_sats, num_sats);
    const int begin = chunk * options.chunk_size;
    const int end = std::min(options.num_samples, begin + options.chunk_size);
    for (int i = begin; i < end; ++i) {
      sampler.sample(rng, d);
      for (int k = 0; k < num_uts; ++k) {
        const CMatrix& dk = d[static_cast<std::size_t>(k)];
        kernels::gram({dk.data(), static_cast<std::size_t>(dk.size())}, n_rx, static_cast<std::size_t>(num_sats),
                      {dgram.data(), static_cast<std::size_t>(dgram.size())});
        const CMatrix& ck = reduced[static_cast<std::size_t>(k)];
        const CMatrix gamma = (ck.adjoint() * dgram * ck) * inv_noise;
        rates_from_gram(gamma, q.layout, k, samples(i, k), samples(i, num_uts + k));
      }
    }
  });
  return summarize(samples, q.layout);
}

RateReport ergodic_rates_naive(const channel::ChannelStatistics& stats, const PrecodingMatrix& q,
                               const MonteCarloOptions& options) {
  validate_mc(stats, q, options);
  const int num_uts = stats.num_uts;
  const channel::RealizationSampler sampler(stats);
  RMatrix samples(options.num_samples, 2 * num_uts);
  const int num_chunks = (options.num_samples + options.chunk_size - 1) / options.chunk_size;
  for (int chunk = 0; chunk < num_chunks; ++chunk) {
    Rng rng = substream(options.seed, kMonteCarloStream + static_cast<std::uint64_t>(chunk));
    const int begin = chunk * options.chunk_size;
    const int end = std::min(options.num_samples, begin + options.chunk_size);
    for (int i = begin; i < end; ++i) {
      const auto real = sampler.sample_realizations(rng);
      std::vector<CMatrix> h;
      for (const auto& r : real) h.push_back(r.h);
      const StreamRates sr = instantaneous_rates(h, q, stats.noise_variance);
      samples.row(i).head(num_uts) = sr.common.transpose();
      samples.row(i).tail(num_uts) = sr.priv.transpose();
    }
  }
  return summarize(samples, q.layout);
}

namespace {

// Columns interfering with `kind` at UT k, excluding the desired column.
std::vector<int> interferers(const StreamLayout& layout, StreamKind kind, int k) {
  std::vector<int> cols;
  const int own_common = layout.common_column(k);
  const int desired = kind == StreamKind::Common ? own_common : layout.private_column(k);
  for (int c = 0; c < layout.num_columns(); ++c) {
    if (c == desired) continue;
    if (kind == StreamKind::Private && c == own_common) continue;  // removed by SIC
    cols.push_back(c);
  }
  return cols;
}

int desired_column(const StreamLayout& layout, StreamKind kind, int k) {
  return kind == StreamKind::Common ? layout.common_column(k) : layout.private_column(k);
}

}  // namespace

double mse(const CVector& u, const PrecodingMatrix& q, const CMatrix& channel, double noise_variance,
           StreamKind kind, int k) {
  const CMatrix hq = channel * q.q;
  const cplx gain = u.dot(hq.col(desired_column(q.layout, kind, k)));
  double e = std::norm(1.0 - gain) + noise_variance * u.squaredNorm();
  for (int c : interferers(q.layout, kind, k)) e += std::norm(u.dot(hq.col(c)));
  return e;
}

CombinerSet optimal_combiners_weights(const PrecodingMatrix& q, std::span<const CMatrix> channels,
                                      double noise_variance) {
  require_positive_noise(noise_variance);
  const int num_uts = q.num_uts();
  CombinerSet out;
  out.v_c = RVector::Zero(num_uts);
  out.v_p = RVector::Zero(num_uts);
  for (int k = 0; k < num_uts; ++k) {
    const CMatrix& h = channels[static_cast<std::size_t>(k)];
    const CMatrix hq = h * q.q;
    for (StreamKind kind : {StreamKind::Common, StreamKind::Private}) {
      const int desired = desired_column(q.layout, kind, k);
      CMatrix cov = noise_variance * CMatrix::Identity(h.rows(), h.rows());
      cov.noalias() += hq.col(desired) * hq.col(desired).adjoint();
      for (int c : interferers(q.layout, kind, k)) cov.noalias() += hq.col(c) * hq.col(c).adjoint();
      Eigen::LLT<CMatrix> llt(cov);
      if (llt.info() != Eigen::Success) throw NumericalError("received covariance is not positive definite");
      const CVector u = llt.solve(hq.col(desired));
      const double e = mse(u, q, h, noise_variance, kind, k);
      if (kind == StreamKind::Common) {
        out.u_c.push_back(u);
        out.v_c(k) = 1.0 / e;
      } else {
        out.u_p.push_back(u);
        out.v_p(k) = 1.0 / e;
      }
    }
  }
  return out;
}

}  // namespace leorsma::rates
