#include <cmath>
#include <random>

#include "doctest.h"
#include "leorsma/channel.hpp"
#include "support.hpp"

using namespace leorsma;
using namespace leorsma::channel;
using testsupport::make_instance;

namespace {

CVector kron(const CVector& a, const CVector& b) {
  CVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

LinkStatistics link(double beta, double kappa, CVector g, CVector d0) {
  LinkStatistics l;
  l.beta = beta;
  l.kappa = kappa;
  l.g = std::move(g);
  l.d0 = std::move(d0);
  const int n = static_cast<int>(l.d0.size());
  l.sigma = CMatrix::Identity(n, n) / static_cast<double>(n);
  return l;
}

ChannelStatistics stats_shell(int uts, int sats, int m, int n) {
  ChannelStatistics s;
  s.num_uts = uts;
  s.num_sats = sats;
  s.sat_antennas = m;
  s.ut_antennas = n;
  s.links.resize(static_cast<std::size_t>(uts * sats));
  return s;
}

}  // namespace

TEST_CASE("steering vectors") {
  const double r = 1.0 / std::sqrt(2.0);
  CVector v = steering_vector(2, 0.5, 0.0);
  CHECK(std::abs(v(0) - cplx(r, 0)) < 1e-15);
  CHECK(std::abs(v(1) - cplx(r, 0)) < 1e-15);
  v = steering_vector(2, 0.5, 1.0);
  CHECK(std::abs(v(0) - cplx(r, 0)) < 1e-15);
  CHECK(std::abs(v(1) - cplx(-r, 0)) < 1e-15);
  Rng rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 1; n < 9; ++n) CHECK(std::abs(steering_vector(n, 0.7, u(rng)).norm() - 1.0) < 1e-14);
}

TEST_CASE("transmit response is a unit-norm Kronecker product") {
  auto [qx, qy] = directional_cosines(0.3, 0.0);
  CHECK(std::abs(qx) < 1e-15);
  CHECK(qy == doctest::Approx(1.0));

  ArrayConfig one;
  one.sat_x = one.sat_y = 1;
  CHECK(transmit_response(one, 0.4, 1.1).isApprox(CVector::Ones(1)));

  ArrayConfig a;
  a.sat_x = 3;
  a.sat_y = 4;
  a.sat_spacing_x = 0.8;
  a.sat_spacing_y = 1.3;
  Rng rng(5);
  std::uniform_real_distribution<double> ang(0.0, kPi);
  for (int i = 0; i < 10; ++i) {
    const double tx = ang(rng), ty = ang(rng);
    const CVector g = transmit_response(a, tx, ty);
    const double cx = std::sin(ty) * std::cos(tx), cy = std::cos(ty);
    CVector ex(3), ey(4);
    for (int j = 0; j < 3; ++j) ex(j) = std::polar(1.0 / std::sqrt(3.0), -2.0 * kPi * 0.8 * cx * j);
    for (int j = 0; j < 4; ++j) ey(j) = std::polar(0.5, -2.0 * kPi * 1.3 * cy * j);
    CHECK((g - kron(ex, ey)).norm() < 1e-14);
    CHECK(std::abs(g.norm() - 1.0) < 1e-14);
  }
}

TEST_CASE("path gain") {
  const double beta = path_gain(600e3, 0.14990, 6.0, 0.0);
  CHECK(std::abs(beta - 1.574e-15) <= 0.005 * 1.574e-15);
  CHECK(path_gain(600e3, kSpeedOfLight / 2e9, 6.0, 0.0) == doctest::Approx(1.5734726039155013e-15).epsilon(1e-12));
  CHECK(path_gain(1.0, 4.0 * kPi, 0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(path_gain(2000.0, 0.1, 3.0, 1.0) == doctest::Approx(path_gain(1000.0, 0.1, 3.0, 1.0) / 4.0).epsilon(1e-14));
}

TEST_CASE("noise variance") {
  CHECK(noise_variance(290.0, 5e7) == doctest::Approx(2.00194105e-13).epsilon(1e-12));
  CHECK(noise_variance(0.0, 5e7) == 0.0);
  CHECK(noise_variance(290.0, 1e8) == doctest::Approx(2.0 * noise_variance(290.0, 5e7)).epsilon(1e-15));
}

TEST_CASE("LoS receive response") {
  ArrayConfig a;
  Rng rng(9);
  const CVector zero = los_receive_response(a, 0.0, rng);
  CHECK(std::abs(zero.norm() - 1.0) < 1e-14);
  // alpha = 90 deg forces phi_x = phi_y = 90 deg: both directional cosines vanish.
  const CVector up = los_receive_response(a, 90.0, rng);
  const double expected = 1.0 / std::sqrt(static_cast<double>(a.ut_antennas()));
  for (Eigen::Index i = 0; i < up.size(); ++i) CHECK(std::abs(up(i) - cplx(expected, 0.0)) < 1e-12);
  std::uniform_real_distribution<double> el(-90.0, 90.0);
  for (int i = 0; i < 20; ++i) CHECK(std::abs(los_receive_response(a, el(rng), rng).norm() - 1.0) < 1e-14);
}

TEST_CASE("NLoS covariance") {
  Rng rng(1);
  CHECK(nlos_covariance(1, rng)(0, 0) == cplx(1.0, 0.0));
  const CMatrix s = nlos_covariance(16, rng);
  CHECK(std::abs(s.trace().real() - 1.0) < 1e-12);
  CHECK(s.diagonal().real().minCoeff() >= 0.0);
  CHECK((s - CMatrix(s.diagonal().asDiagonal())).norm() == 0.0);
  Rng r1(77), r2(77);
  CHECK(nlos_covariance(8, r1) == nlos_covariance(8, r2));
}

TEST_CASE("effective channel, single satellite") {
  Rng rng(4);
  auto st = stats_shell(1, 1, 4, 4);
  const CVector g = testsupport::random_cvector(4, rng).normalized();
  st.link(0, 0) = link(2.5, 3.0, g, testsupport::random_cvector(4, rng).normalized());
  const auto eff = effective_channel(st, 0);
  CHECK(std::abs(eff.d_hat(0, 0) - cplx(2.5, 0.0)) < 1e-15);
  CHECK((eff.h_hat - std::sqrt(2.5) * g * g.adjoint()).norm() < 1e-12);
}

TEST_CASE("effective channel with identity D-hat is the projector") {
  auto st = stats_shell(1, 2, 3, 2);
  Rng rng(8);
  CVector g0 = testsupport::random_cvector(3, rng).normalized();
  CVector g1 = testsupport::random_cvector(3, rng).normalized();
  CVector e0 = CVector::Zero(2), e1 = CVector::Zero(2);
  e0(0) = 1.0;
  e1(1) = 1.0;
  st.link(0, 0) = link(1.0, 4.0, g0, e0);
  st.link(0, 1) = link(1.0, 4.0, g1, e1);
  const auto eff = effective_channel(st, 0);
  CHECK((eff.d_hat - CMatrix::Identity(2, 2)).norm() < 1e-15);
  const CMatrix g = eff.g_block;
  CHECK((eff.h_hat - g * g.adjoint()).norm() < 1e-12);
}

TEST_CASE("effective channel reconstructs G D-hat G^H") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto in = make_instance(2, 3, seed);
    for (int k = 0; k < 3; ++k) {
      const auto eff = effective_channel(in.stats, k);
      const CMatrix target = eff.g_block * eff.d_hat * eff.g_block.adjoint();
      CHECK((eff.h_hat.adjoint() * eff.h_hat - target).norm() <= 1e-10 * target.norm());
      CHECK((eff.h_hat - eff.h_hat.adjoint()).norm() <= 1e-12 * eff.h_hat.norm());
      for (int s = 0; s < 2; ++s) CHECK(std::abs(eff.d_hat(s, s).real() - in.stats.link(k, s).beta) < 1e-12);
      const auto dir = effective_channel(in.stats, k, CsiModel::Directional);
      for (int s = 0; s < 2; ++s) {
        const auto& l = in.stats.link(k, s);
        CHECK(dir.d_hat(s, s).real() == doctest::Approx(l.kappa * l.beta / (l.kappa + 1.0)));
      }
      CHECK(std::abs(dir.d_hat(0, 1) - eff.d_hat(0, 1)) < 1e-15);
    }
  }
}

TEST_CASE("PSD square root rejects indefinite input") {
  CMatrix a = CMatrix::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = -0.5;
  CHECK_THROWS_AS(psd_sqrt(a), NumericalError);
  a(1, 1) = -1e-14;
  CHECK(psd_sqrt(a)(1, 1) == cplx(0.0, 0.0));
}

TEST_CASE("near-deterministic link") {
  Rng rng(12);
  auto st = stats_shell(1, 1, 4, 4);
  st.link(0, 0) = link(3.0, 1e12, testsupport::random_cvector(4, rng).normalized(),
                       testsupport::random_cvector(4, rng).normalized());
  RealizationSampler sampler(st);
  std::vector<CMatrix> d;
  double mean = 0.0;
  for (int i = 0; i < 100; ++i) {
    sampler.sample(rng, d);
    mean += d[0].squaredNorm() / 100.0;
    // single draws carry the LoS x NLoS cross term of relative size ~2/sqrt(kappa)
    CHECK(std::abs(d[0].squaredNorm() - 3.0) <= 1e-5 * 3.0);
    CHECK((d[0].col(0) - std::sqrt(3.0) * st.link(0, 0).d0).norm() < 1e-5);
  }
  CHECK(std::abs(mean - 3.0) <= 1e-6 * 3.0);
}

TEST_CASE("sample moments match D-hat") {
  const auto in = make_instance(2, 2, 21);
  RealizationSampler sampler(in.stats);
  const int n = 100000;
  const int uts = in.stats.num_uts, sats = in.stats.num_sats;
  std::vector<CMatrix> sum(uts, CMatrix::Zero(sats, sats));
  std::vector<RMatrix> sq_re(uts, RMatrix::Zero(sats, sats)), sq_im(uts, RMatrix::Zero(sats, sats));
  Rng rng = substream(5, 0);
  std::vector<CMatrix> d;
  for (int i = 0; i < n; ++i) {
    sampler.sample(rng, d);
    for (int k = 0; k < uts; ++k) {
      const CMatrix g = d[k].adjoint() * d[k];
      sum[k] += g;
      sq_re[k] += g.real().cwiseAbs2();
      sq_im[k] += g.imag().cwiseAbs2();
    }
  }
  for (int k = 0; k < uts; ++k) {
    const CMatrix d_hat = receive_correlation(in.stats, k);
    const CMatrix mean = sum[k] / static_cast<double>(n);
    for (int a = 0; a < sats; ++a) {
      for (int b = 0; b < sats; ++b) {
        const double var_re = sq_re[k](a, b) / n - mean(a, b).real() * mean(a, b).real();
        const double var_im = sq_im[k](a, b) / n - mean(a, b).imag() * mean(a, b).imag();
        CHECK(std::abs(mean(a, b).real() - d_hat(a, b).real()) <= 3.0 * std::sqrt(var_re / n) + 1e-15);
        CHECK(std::abs(mean(a, b).imag() - d_hat(a, b).imag()) <= 3.0 * std::sqrt(var_im / n) + 1e-15);
      }
    }
  }
}

TEST_CASE("realizations have rank at most S") {
  const auto in = make_instance(2, 3, 2, channel::ArrayConfig{});
  RealizationSampler sampler(in.stats);
  Rng rng(1);
  for (const auto& r : sampler.sample_realizations(rng)) {
    CHECK(r.h.rows() == 16);
    CHECK(r.h.cols() == 50);
    Eigen::JacobiSVD<CMatrix> svd(r.h);
    const RVector sv = svd.singularValues();
    CHECK(sv(2) <= 1e-10 * sv(0));
  }
}

TEST_CASE("built statistics satisfy their invariants") {
  const auto in = make_instance(4, 6, 3, channel::ArrayConfig{});
  in.physical.validate();
  CHECK(in.physical.sat_antennas == 25);
  CHECK(in.physical.ut_antennas == 16);
  CHECK(in.stats.noise_variance == 1.0);
  CHECK(in.physical.noise_variance == doctest::Approx(2.00194105e-13));
  for (int k = 0; k < 6; ++k) {
    for (int s = 0; s < 4; ++s) {
      const auto& l = in.physical.link(k, s);
      CHECK(std::abs(l.g.norm() - 1.0) < 1e-12);
      CHECK(std::abs(l.d0.norm() - 1.0) < 1e-12);
      CHECK(std::abs(l.sigma.trace().real() - 1.0) < 1e-12);
      CHECK(l.kappa >= 2.0);
      CHECK(l.kappa <= 25.0);
      const double expect = path_gain(in.scenario.distances_km(k, s) * 1e3, kSpeedOfLight / 2e9, 6.0, 0.0);
      CHECK(l.beta == doctest::Approx(expect).epsilon(1e-12));
      CHECK(in.stats.link(k, s).beta == doctest::Approx(expect / in.physical.noise_variance).epsilon(1e-12));
    }
  }
  const auto again = channel::build_statistics(in.scenario, channel::ArrayConfig{}, 3);
  CHECK(again.link(2, 1).d0 == in.physical.link(2, 1).d0);
}
