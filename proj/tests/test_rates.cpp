#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "leorsma/rates.hpp"
#include "support.hpp"

using namespace leorsma;
using namespace leorsma::rates;
using testsupport::make_instance;
using testsupport::random_precoder;

namespace {

PrecodingMatrix scalar_toy(double qc, double qp) {
  Mask mask = Mask::Constant(1, 1, true);
  auto q = PrecodingMatrix::zeros(1, 1, mask, StreamLayout::single(1));
  q.q(0, 0) = qc;
  q.q(0, 1) = qp;
  return q;
}

double brute_force_mmfr(const RVector& f_c, const RVector& f_p, double step) {
  const int k = static_cast<int>(f_c.size());
  const double budget = f_c.minCoeff();
  const int steps = static_cast<int>(std::floor(budget / step + 1e-9));
  double best = -1.0;
  std::vector<int> idx(static_cast<std::size_t>(k - 1), 0);
  // enumerate R_1..R_{K-1} on the grid, R_K takes the remainder
  while (true) {
    int used = 0;
    for (int v : idx) used += v;
    if (used <= steps) {
      double level = budget - used * step + f_p(k - 1);
      for (int i = 0; i < k - 1; ++i) level = std::min(level, idx[i] * step + f_p(i));
      best = std::max(best, level);
    }
    int pos = 0;
    while (pos < k - 1) {
      if (++idx[pos] <= steps) break;
      idx[pos] = 0;
      ++pos;
    }
    if (pos == k - 1) break;
  }
  return best;
}

}  // namespace

TEST_CASE("zero common stream carries no rate") {
  const auto in = make_instance(2, 3, 1);
  Rng rng(2);
  auto q = random_precoder(2, 4, in.mask, StreamLayout::single(3), 10.0, rng, false);
  const auto eff = channel::effective_channels(in.stats);
  const auto ub = rate_upper_bounds(eff, q, 1.0);
  CHECK(ub.common.cwiseAbs().maxCoeff() == 0.0);
  const auto uv = optimal_combiners_weights(q, effective_matrices(eff), 1.0);
  for (int k = 0; k < 3; ++k) {
    CHECK(uv.u_c[k].norm() == 0.0);
    CHECK(uv.v_c(k) == doctest::Approx(1.0));
  }
}

TEST_CASE("scalar toy rates") {
  const auto q = scalar_toy(1.0, 1.0);
  std::vector<CMatrix> h{CMatrix::Ones(1, 1)};
  const auto r = instantaneous_rates(h, q, 1.0);
  CHECK(r.common(0) == doctest::Approx(std::log2(1.5)).epsilon(1e-14));
  CHECK(r.priv(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(instantaneous_rates(h, q, 0.0), InvalidInput);

  const auto e = stream_rates(h, q, 1.0);
  CHECK(e.common(0) == doctest::Approx(std::log2(1.5)).epsilon(1e-14));

  const CVector u = CVector::Constant(1, cplx(1.0 / 3.0, 0.0));
  CHECK(mse(u, q, h[0], 1.0, StreamKind::Common, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(mse(CVector::Zero(1), q, h[0], 1.0, StreamKind::Common, 0) == doctest::Approx(1.0));
  const auto uv = optimal_combiners_weights(q, h, 1.0);
  CHECK(std::abs(uv.u_c[0](0) - cplx(1.0 / 3.0, 0.0)) < 1e-14);
  CHECK(uv.v_c(0) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(wmmse_value(uv.v_c(0), mse(uv.u_c[0], q, h[0], 1.0, StreamKind::Common, 0)) ==
        doctest::Approx(std::log(1.5)).epsilon(1e-14));
}

TEST_CASE("log-det rates match the determinant lemma") {
  Rng rng(31);
  const int n = 4, ms = 8, uts = 3;
  Mask mask = Mask::Constant(2, uts, true);
  mask(1, 0) = false;
  for (int trial = 0; trial < 10; ++trial) {
    auto q = random_precoder(2, 4, mask, StreamLayout::single(uts), 5.0, rng);
    std::vector<CMatrix> h;
    for (int k = 0; k < uts; ++k) h.push_back(testsupport::random_cmatrix(n, ms, rng));
    const double sigma2 = 0.7;
    const auto r = instantaneous_rates(h, q, sigma2);
    for (int k = 0; k < uts; ++k) {
      CMatrix cov_p = sigma2 * CMatrix::Identity(n, n);
      for (int l = 0; l < uts; ++l) {
        if (l == k) continue;
        const CVector x = h[k] * q.q.col(1 + l);
        cov_p += x * x.adjoint();
      }
      const CVector own = h[k] * q.q.col(1 + k);
      const CMatrix cov_c = cov_p + own * own.adjoint();
      const CVector common = h[k] * q.q.col(0);
      const double fc = std::log2(1.0 + (common.adjoint() * cov_c.ldlt().solve(common))(0).real());
      const double fp = std::log2(1.0 + (own.adjoint() * cov_p.ldlt().solve(own))(0).real());
      CHECK(r.common(k) == doctest::Approx(fc).epsilon(1e-11));
      CHECK(r.priv(k) == doctest::Approx(fp).epsilon(1e-11));
    }
  }
}

TEST_CASE("MMSE identity and local optimality of the closed forms") {
  const auto in = make_instance(2, 3, 4);
  const auto eff = channel::effective_channels(in.stats);
  const auto h = effective_matrices(eff);
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const auto q = random_precoder(2, 4, in.mask, StreamLayout::single(3), 20.0, rng);
    const auto ub = rate_upper_bounds(eff, q, 1.0);
    const auto uv = optimal_combiners_weights(q, h, 1.0);
    for (int k = 0; k < 3; ++k) {
      for (auto kind : {StreamKind::Common, StreamKind::Private}) {
        const bool c = kind == StreamKind::Common;
        const CVector& u = c ? uv.u_c[k] : uv.u_p[k];
        const double v = c ? uv.v_c(k) : uv.v_p(k);
        const double e = mse(u, q, h[k], 1.0, kind, k);
        const double rate = c ? ub.common(k) : ub.priv(k);
        CHECK(std::abs(wmmse_value(v, e) - kLn2 * rate) <= 1e-9);
        CHECK(std::abs(e - 1.0 / (1.0 + std::exp2(rate) - 1.0)) <= 1e-9);
        // any other combiner has larger MSE
        const CVector du = 1e-3 * testsupport::random_cvector(static_cast<int>(u.size()), rng);
        CHECK(mse(u + du, q, h[k], 1.0, kind, k) >= e);
        CHECK(wmmse_value(v * 1.001, e) <= wmmse_value(v, e));
        CHECK(wmmse_value(v * 0.999, e) <= wmmse_value(v, e));
      }
    }
  }
}

TEST_CASE("rates are invariant under joint channel and noise scaling") {
  const auto in = make_instance(2, 3, 5);
  const auto h = effective_matrices(channel::effective_channels(in.stats));
  Rng rng(1);
  const auto q = random_precoder(2, 4, in.mask, StreamLayout::single(3), 10.0, rng);
  const double c = 3.7e-7;
  std::vector<CMatrix> scaled;
  for (const auto& m : h) scaled.push_back(c * m);
  const auto a = stream_rates(h, q, 1.0);
  const auto b = stream_rates(scaled, q, c * c);
  CHECK((a.common - b.common).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((a.priv - b.priv).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("common-rate allocation examples") {
  RVector f_c(2), f_p(2);
  f_c << 2.0, 2.5;
  f_p << 1.0, 3.0;
  auto a = allocate_common_rate(f_c, f_p);
  CHECK(a.mmfr == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(a.common_share(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(a.common_share(1)) <= 1e-12);

  f_c << 0.0, 1.0;
  f_p << 0.4, 0.9;
  a = allocate_common_rate(f_c, f_p);
  CHECK(a.mmfr == doctest::Approx(0.4));

  f_c << 2.0, 2.0;
  f_p << 1.0, 1.0;
  a = allocate_common_rate(f_c, f_p);
  CHECK(a.mmfr == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(a.common_share(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.common_share(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("allocation matches a grid search") {
  Rng rng(17);
  std::uniform_real_distribution<double> u(0.0, 0.6);
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 2 + trial % 3;
    RVector f_c(k), f_p(k);
    for (int i = 0; i < k; ++i) {
      f_c(i) = u(rng);
      f_p(i) = u(rng);
    }
    const auto a = allocate_common_rate(f_c, f_p);
    CHECK(std::abs(a.mmfr - brute_force_mmfr(f_c, f_p, 1e-2)) <= 2e-2);
    CHECK(a.common_share.sum() <= f_c.minCoeff() + 1e-9);
    CHECK(a.common_share.minCoeff() >= 0.0);
    CHECK(a.mmfr == doctest::Approx((a.common_share + f_p).minCoeff()).epsilon(1e-12));
  }
}

TEST_CASE("grouped allocation splits each common stream separately") {
  StreamLayout layout{2, {0, 0, 1}};
  RVector f_c(3), f_p(3);
  f_c << 1.0, 2.0, 0.5;
  f_p << 0.0, 0.2, 0.1;
  const auto a = allocate_common_rate(f_c, f_p, layout);
  CHECK(a.common_share(0) + a.common_share(1) <= 1.0 + 1e-9);
  CHECK(a.common_share(2) <= 0.5 + 1e-9);
  CHECK(a.mmfr == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("Monte Carlo: deterministic channel") {
  auto in = make_instance(2, 2, 8);
  for (auto& l : in.stats.links) l.kappa = 1e12;
  Rng rng(3);
  const auto q = random_precoder(2, 4, in.mask, StreamLayout::single(2), 10.0, rng);
  MonteCarloOptions mc;
  mc.num_samples = 400;
  const auto rep = ergodic_rates_mc(in.stats, q, mc);
  // the point-mass channel
  std::vector<CMatrix> h;
  for (int k = 0; k < 2; ++k) {
    CMatrix d(4, 2);
    for (int s = 0; s < 2; ++s) {
      const auto& l = in.stats.link(k, s);
      d.col(s) = std::sqrt(l.kappa * l.beta / (l.kappa + 1.0)) * l.d0;
    }
    h.push_back(d * channel::transmit_block(in.stats, k).adjoint());
  }
  const auto inst = instantaneous_rates(h, q, 1.0);
  for (int k = 0; k < 2; ++k) {
    CHECK(testsupport::relative_diff(rep.f_c(k), inst.common(k)) <= 1e-6);
    CHECK(testsupport::relative_diff(rep.f_p(k), inst.priv(k)) <= 1e-6);
    CHECK(rep.f_c_stderr(k) <= 1e-6 * inst.common(k));
    CHECK(rep.f_p_stderr(k) <= 1e-6 * inst.priv(k));
  }
  const auto ub = rate_upper_bounds(channel::effective_channels(in.stats), q, 1.0);
  for (int k = 0; k < 2; ++k) {
    CHECK(testsupport::relative_diff(ub.common(k), inst.common(k)) <= 1e-9);
    CHECK(testsupport::relative_diff(ub.priv(k), inst.priv(k)) <= 1e-9);
  }
}

TEST_CASE("Monte Carlo: fast path, naive path, threads and CLT scaling") {
  const auto in = make_instance(2, 3, 9);
  Rng rng(4);
  const auto q = random_precoder(2, 4, in.mask, StreamLayout::single(3), 20.0, rng);
  MonteCarloOptions mc;
  mc.num_samples = 1000;
  mc.seed = 99;
  mc.threads = 1;
  const auto fast = ergodic_rates_mc(in.stats, q, mc);
  const auto naive = ergodic_rates_naive(in.stats, q, mc);
  CHECK((fast.f_c - naive.f_c).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((fast.f_p - naive.f_p).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(fast.mmfr == doctest::Approx(naive.mmfr).epsilon(1e-10));

  mc.threads = 3;
  const auto threaded = ergodic_rates_mc(in.stats, q, mc);
  CHECK(threaded.f_c == fast.f_c);
  CHECK(threaded.f_p == fast.f_p);
  CHECK(threaded.mmfr_stderr == fast.mmfr_stderr);

  mc.num_samples = 2000;
  const auto twice = ergodic_rates_mc(in.stats, q, mc);
  for (int k = 0; k < 3; ++k) {
    const double ratio = twice.f_p_stderr(k) / fast.f_p_stderr(k);
    CHECK(ratio > 0.6);
    CHECK(ratio < 0.82);
  }
  CHECK(fast.num_samples == 1000);
  CHECK(fast.common_share.sum() <= fast.f_c.minCoeff() + 1e-9);
}

TEST_CASE("upper bounds dominate Monte Carlo rates") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto in = make_instance(2, 3, seed);
    Rng rng(seed);
    const auto q = random_precoder(2, 4, in.mask, StreamLayout::single(3), 30.0, rng);
    MonteCarloOptions mc;
    mc.num_samples = 2000;
    mc.seed = seed;
    const auto rep = ergodic_rates_mc(in.stats, q, mc);
    const auto ub = rate_upper_bounds(channel::effective_channels(in.stats), q, 1.0);
    for (int k = 0; k < 3; ++k) {
      CHECK(ub.common(k) >= rep.f_c(k) - 3.0 * rep.f_c_stderr(k));
      CHECK(ub.priv(k) >= rep.f_p(k) - 3.0 * rep.f_p_stderr(k));
    }
  }
}

TEST_CASE("mask helpers") {
  geometry::Association a;
  a.served_uts = {{0, 1}, {1}};
  a.serving_sats = {{0}, {0, 1}};
  const Mask m = mask_from_association(a);
  CHECK(m(0, 0));
  CHECK(m(0, 1));
  CHECK_FALSE(m(1, 0));
  CHECK(m(1, 1));
  auto q = PrecodingMatrix::zeros(2, 3, m, StreamLayout::single(2));
  CHECK(q.mask_violation() == 0.0);
  q.q(4, 1) = cplx(0.0, -0.25);
  CHECK(q.mask_violation() == doctest::Approx(0.25));
}
