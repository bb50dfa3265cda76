#include "leorsma/wmmse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace leorsma::wmmse {

void OptimizerSettings::validate() const {
  if (max_iters < 1) throw InvalidInput("max_iters must be at least 1");
  if (!(rel_obj_tol > 0.0) || !(solver_tol > 0.0)) throw InvalidInput("tolerances must be positive");
  if (!(power_budget > 0.0) || !std::isfinite(power_budget)) throw InvalidInput("power budget must be positive");
  if (design_realizations < 1) throw InvalidInput("design_realizations must be at least 1");
}

double per_satellite_power(const rates::PrecodingMatrix& q, int s) {
  if (s < 0 || s >= q.num_sats()) throw InvalidInput("satellite index out of range");
  return q.q.middleRows(s * q.sat_antennas, q.sat_antennas).squaredNorm();
}

RVector per_satellite_powers(const rates::PrecodingMatrix& q) {
  RVector p(q.num_sats());
  for (int s = 0; s < q.num_sats(); ++s) p(s) = per_satellite_power(q, s);
  return p;
}

namespace {

int sat_antennas_of(std::span<const CMatrix> channels, const rates::Mask& mask) {
  if (channels.empty()) throw InvalidInput("at least one channel is required");
  const auto cols = channels.front().cols();
  const auto s = mask.rows();
  if (s < 1 || cols % s != 0) throw InvalidInput("channel width is not a multiple of the satellite count");
  for (const auto& c : channels) {
    if (c.cols() != cols) throw InvalidInput("channels disagree on the transmit dimension");
  }
  if (static_cast<Eigen::Index>(channels.size()) != mask.cols()) throw InvalidInput("one channel per UT required");
  return static_cast<int>(cols / s);
}

CVector dominant_eigenvector(const CMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(a);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  CVector v = es.eigenvectors().col(a.cols() - 1);
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (std::abs(v(arg)) > 0.0) v *= std::conj(v(arg)) / std::abs(v(arg));
  return v / v.norm();
}

}  // namespace

rates::PrecodingMatrix initialize_precoder(std::span<const CMatrix> channels, const rates::Mask& mask,
                                           const rates::StreamLayout& layout, Scheme scheme, double power) {
  if (!(power > 0.0)) throw InvalidInput("power budget must be positive");
  const int m = sat_antennas_of(channels, mask);
  const int num_sats = static_cast<int>(mask.rows());
  const int num_uts = static_cast<int>(mask.cols());
  if (layout.num_uts() != num_uts) throw InvalidInput("layout does not match the UT count");
  auto q = rates::PrecodingMatrix::zeros(num_sats, m, mask, layout);

  for (int k = 0; k < num_uts; ++k) {
    CMatrix restricted = channels[static_cast<std::size_t>(k)];
    bool any = false;
    for (int s = 0; s < num_sats; ++s) {
      if (mask(s, k)) {
        any = true;
      } else {
        restricted.middleCols(s * m, m).setZero();
      }
    }
    if (!any) continue;
    CVector v = dominant_eigenvector(restricted.adjoint() * restricted);
    for (int s = 0; s < num_sats; ++s) {
      if (!mask(s, k)) v.segment(s * m, m).setZero();
    }
    if (v.norm() > 0.0) q.q.col(layout.private_column(k)) = v / v.norm();
  }

  if (scheme == Scheme::Rsma) {
    for (int g = 0; g < layout.num_common; ++g) {
      CMatrix acc = CMatrix::Zero(num_sats * m, num_sats * m);
      bool any = false;
      for (int k = 0; k < num_uts; ++k) {
        if (layout.common_column(k) != g) continue;
        const CMatrix& h = channels[static_cast<std::size_t>(k)];
        acc.noalias() += h.adjoint() * h;
        any = true;
      }
      if (any) q.q.col(g) = dominant_eigenvector(acc);
    }
  }

  bool nonzero = false;
  for (int s = 0; s < num_sats; ++s) {
    const double p = per_satellite_power(q, s);
    if (p <= 0.0) continue;
    nonzero = true;
    q.q.middleRows(s * m, m) *= std::sqrt(power * (1.0 - 1e-6) / p);
  }
  if (!nonzero) throw InvalidInput("no stream reaches any satellite");
  return q;
}

SubproblemBasis SubproblemBasis::identity(int num_sats, int sat_antennas) {
  SubproblemBasis b;
  b.sat_antennas = sat_antennas;
  for (int s = 0; s < num_sats; ++s) b.per_sat.push_back(CMatrix::Identity(sat_antennas, sat_antennas));
  return b;
}

SubproblemBasis SubproblemBasis::channel_span(std::span<const CMatrix> channels, int num_sats) {
  if (channels.empty() || num_sats < 1) throw InvalidInput("channel_span needs channels and satellites");
  const auto cols = channels.front().cols();
  const int m = static_cast<int>(cols / num_sats);
  SubproblemBasis b;
  b.sat_antennas = m;
  for (int s = 0; s < num_sats; ++s) {
    Eigen::Index rows = 0;
    for (const auto& c : channels) rows += c.rows();
    CMatrix stacked(m, rows);
    Eigen::Index at = 0;
    for (const auto& c : channels) {
      stacked.middleCols(at, c.rows()) = c.middleCols(s * m, m).adjoint();
      at += c.rows();
    }
    Eigen::JacobiSVD<CMatrix> svd(stacked, Eigen::ComputeThinU);
    const RVector& sv = svd.singularValues();
    const double top = sv.size() > 0 ? sv(0) : 0.0;
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > 1e-10 * top && top > 0.0) ++rank;
    if (rank == 0) {
      b.per_sat.emplace_back(m, 0);
    } else {
      b.per_sat.push_back(svd.matrixU().leftCols(rank));
    }
  }
  return b;
}

int Subproblem::coef_index(int column, int s, int i) const {
  const int off = block_offset[static_cast<std::size_t>(column * mask.rows() + s)];
  if (off < 0) return -1;
  return off + 2 * i;
}

rates::PrecodingMatrix Subproblem::precoder(const RVector& x) const {
  const int num_sats = static_cast<int>(mask.rows());
  const int m = basis.sat_antennas;
  auto q = rates::PrecodingMatrix::zeros(num_sats, m, mask, layout);
  const double scale = std::sqrt(power);
  for (int j = 0; j < layout.num_columns(); ++j) {
    for (int s = 0; s < num_sats; ++s) {
      if (coef_index(j, s, 0) < 0) continue;
      if (j >= layout.num_common && !mask(s, j - layout.num_common)) continue;
      const CMatrix& bs = basis.per_sat[static_cast<std::size_t>(s)];
      CVector c(bs.cols());
      for (Eigen::Index i = 0; i < bs.cols(); ++i) {
        const int idx = coef_index(j, s, static_cast<int>(i));
        c(i) = cplx(x(idx), x(idx + 1));
      }
      q.q.block(s * m, j, m, 1) = scale * (bs * c);
    }
  }
  for (int s = 0; s < num_sats; ++s) {
    const double p = per_satellite_power(q, s);
    if (p > power) q.q.middleRows(s * m, m) *= std::sqrt(power / p);
  }
  return q;
}

RVector Subproblem::common_rates(const RVector& x) const {
  if (rc_offset < 0) return RVector::Zero(num_uts);
  return x.segment(rc_offset, num_uts);
}

RVector Subproblem::private_rates(const RVector& x) const { return x.segment(rp_offset, num_uts); }

RVector Subproblem::point(const rates::PrecodingMatrix& q, const RVector& r_c, const RVector& r_p, double t) const {
  RVector x = RVector::Zero(program.num_variables());
  const int num_sats = static_cast<int>(mask.rows());
  const int m = basis.sat_antennas;
  const double inv = 1.0 / std::sqrt(power);
  for (int j = 0; j < layout.num_columns(); ++j) {
    for (int s = 0; s < num_sats; ++s) {
      if (coef_index(j, s, 0) < 0) continue;
      const CMatrix& bs = basis.per_sat[static_cast<std::size_t>(s)];
      const CVector c = inv * (bs.adjoint() * q.q.block(s * m, j, m, 1));
      for (Eigen::Index i = 0; i < bs.cols(); ++i) {
        const int idx = coef_index(j, s, static_cast<int>(i));
        x(idx) = c(i).real();
        x(idx + 1) = c(i).imag();
      }
    }
  }
  if (rc_offset >= 0) x.segment(rc_offset, num_uts) = r_c;
  x.segment(rp_offset, num_uts) = r_p;
  x(t_offset) = t;
  return x;
}

Subproblem build_subproblem(const rates::CombinerSet& uv, std::span<const CMatrix> channels,
                            const rates::Mask& mask, const rates::StreamLayout& layout, Scheme scheme,
                            double power, double noise_variance, const SubproblemBasis& basis) {
  using socp::AffineExpr;
  const int m = sat_antennas_of(channels, mask);
  const int num_sats = static_cast<int>(mask.rows());
  const int num_uts = static_cast<int>(mask.cols());
  const int cols = layout.num_columns();
  if (basis.sat_antennas != m || static_cast<int>(basis.per_sat.size()) != num_sats) {
    throw InvalidInput("basis does not match the channel layout");
  }
  if (!(power > 0.0) || !(noise_variance > 0.0)) throw InvalidInput("power and noise must be positive");
  if (uv.v_p.size() != num_uts || static_cast<int>(uv.u_p.size()) != num_uts) {
    throw InvalidInput("combiners do not match the UT count");
  }
  const bool rsma = scheme == Scheme::Rsma;
  if (rsma && (uv.v_c.size() != num_uts || static_cast<int>(uv.u_c.size()) != num_uts)) {
    throw InvalidInput("common combiners missing");
  }
  for (Eigen::Index k = 0; k < num_uts; ++k) {
    if (!(uv.v_p(k) > 0.0) || (rsma && !(uv.v_c(k) > 0.0))) throw InvalidInput("MSE weights must be positive");
  }

  Subproblem sp;
  sp.basis = basis;
  sp.mask = mask;
  sp.layout = layout;
  sp.scheme = scheme;
  sp.power = power;
  sp.num_uts = num_uts;
  sp.block_offset.assign(static_cast<std::size_t>(cols * num_sats), -1);

  socp::ConicBuilder b;
  int num_q = 0;
  for (int j = 0; j < cols; ++j) {
    if (!rsma && j < layout.num_common) continue;
    for (int s = 0; s < num_sats; ++s) {
      const auto r = static_cast<int>(basis.per_sat[static_cast<std::size_t>(s)].cols());
      if (r == 0) continue;
      sp.block_offset[static_cast<std::size_t>(j * num_sats + s)] = num_q;
      num_q += 2 * r;
    }
  }
  const int q0 = b.add_variables("q", num_q);
  for (auto& off : sp.block_offset) {
    if (off >= 0) off += q0;
  }
  if (rsma) sp.rc_offset = b.add_variables("r_c", num_uts);
  sp.rp_offset = b.add_variables("r_p", num_uts);
  sp.t_offset = b.add_variables("t", 1);
  b.set_objective(AffineExpr::var(sp.t_offset, -1.0));

  for (int k = 0; k < num_uts; ++k) {
    if (rsma) b.add_nonnegative(AffineExpr::var(sp.rc_offset + k));
    b.add_nonnegative(AffineExpr::var(sp.rp_offset + k));
  }
  for (int k = 0; k < num_uts; ++k) {
    AffineExpr slack = AffineExpr::var(sp.rp_offset + k) - AffineExpr::var(sp.t_offset);
    if (rsma) slack.add(sp.rc_offset + k, 1.0);
    b.add_nonnegative(slack);
  }

  // Masked private blocks are pinned to zero.
  for (int k = 0; k < num_uts; ++k) {
    const int j = layout.private_column(k);
    for (int s = 0; s < num_sats; ++s) {
      if (mask(s, k)) continue;
      const int r = static_cast<int>(basis.per_sat[static_cast<std::size_t>(s)].cols());
      for (int i = 0; i < r; ++i) {
        const int idx = sp.coef_index(j, s, i);
        if (idx < 0) continue;
        b.add_equality(AffineExpr::var(idx));
        b.add_equality(AffineExpr::var(idx + 1));
      }
    }
  }

  const double sqrt_p = std::sqrt(power);
  // Re and Im of a^H q_j as affine expressions of the lifted coefficients.
  auto inner = [&](const CVector& a, int j, AffineExpr& re, AffineExpr& im) {
    re = AffineExpr();
    im = AffineExpr();
    for (int s = 0; s < num_sats; ++s) {
      if (sp.coef_index(j, s, 0) < 0) continue;
      const CMatrix& bs = basis.per_sat[static_cast<std::size_t>(s)];
      const CVector at = sqrt_p * (bs.adjoint() * a.segment(s * m, m));
      for (Eigen::Index i = 0; i < bs.cols(); ++i) {
        const int idx = sp.coef_index(j, s, static_cast<int>(i));
        const double ar = at(i).real();
        const double ai = at(i).imag();
        re.add(idx, ar).add(idx + 1, ai);
        im.add(idx + 1, ar).add(idx, -ai);
      }
    }
  };

  auto emit_mse = [&](const CVector& u, double v, const CMatrix& h, int desired, const std::vector<int>& others,
                      const AffineExpr& rate_sum) {
    const CVector a = h.adjoint() * u;
    const double sv = std::sqrt(v);
    std::vector<AffineExpr> y;
    AffineExpr re, im;
    inner(a, desired, re, im);
    y.push_back(sv * (AffineExpr(1.0) - re));
    y.push_back(-sv * im);
    for (int c : others) {
      bool has = false;
      for (int s = 0; s < num_sats; ++s) has = has || sp.coef_index(c, s, 0) >= 0;
      if (!has) continue;
      inner(a, c, re, im);
      y.push_back(sv * re);
      y.push_back(sv * im);
    }
    AffineExpr bound(1.0 + std::log(v) - v * noise_variance * u.squaredNorm());
    bound = bound - kLn2 * rate_sum;
    b.add_cone(socp::quadratic_leq_as_cone(y, bound));
  };

  for (int k = 0; k < num_uts; ++k) {
    const CMatrix& h = channels[static_cast<std::size_t>(k)];
    const int own_common = layout.common_column(k);
    if (rsma) {
      std::vector<int> others;
      AffineExpr group_rate;
      for (int c = 0; c < cols; ++c) {
        if (c != own_common) others.push_back(c);
      }
      for (int l = 0; l < num_uts; ++l) {
        if (layout.common_column(l) == own_common) group_rate.add(sp.rc_offset + l, 1.0);
      }
      emit_mse(uv.u_c[static_cast<std::size_t>(k)], uv.v_c(k), h, own_common, others, group_rate);
    }
    std::vector<int> others;
    for (int c = 0; c < cols; ++c) {
      if (c != own_common && c != layout.private_column(k)) others.push_back(c);
    }
    emit_mse(uv.u_p[static_cast<std::size_t>(k)], uv.v_p(k), h, layout.private_column(k), others,
             AffineExpr::var(sp.rp_offset + k));
  }

  // Per-satellite power in units of P.
  for (int s = 0; s < num_sats; ++s) {
    std::vector<AffineExpr> y;
    for (int j = 0; j < cols; ++j) {
      const int r = static_cast<int>(basis.per_sat[static_cast<std::size_t>(s)].cols());
      for (int i = 0; i < r; ++i) {
        const int idx = sp.coef_index(j, s, i);
        if (idx < 0) continue;
        y.push_back(AffineExpr::var(idx));
        y.push_back(AffineExpr::var(idx + 1));
      }
    }
    if (!y.empty()) b.add_cone(socp::quadratic_leq_as_cone(y, AffineExpr(1.0)));
  }

  sp.program = b.build();
  return sp;
}

WmmseResult wmmse_optimize(std::span<const CMatrix> channels, const rates::Mask& mask,
                           const rates::StreamLayout& layout, const OptimizerSettings& settings,
                           double noise_variance, const rates::PrecodingMatrix* start) {
  settings.validate();
  const Scheme scheme = scheme_of(settings.variant);
  const int num_sats = static_cast<int>(mask.rows());
  const int m = sat_antennas_of(channels, mask);
  const SubproblemBasis basis = settings.reduce_basis ? SubproblemBasis::channel_span(channels, num_sats)
                                                      : SubproblemBasis::identity(num_sats, m);
  WmmseResult out;
  if (start) {
    if (start->q.rows() != static_cast<Eigen::Index>(num_sats) * m || start->layout != layout ||
        start->sat_antennas != m || start->q.cols() != layout.num_columns() ||
        !(start->mask == mask).all())
      throw InvalidInput("start precoder does not match the problem");
    if (start->mask_violation() != 0.0) throw InvalidInput("start precoder violates the mask");
    if (per_satellite_powers(*start).maxCoeff() > settings.power_budget * (1.0 + 1e-8))
      throw InvalidInput("start precoder exceeds the power budget");
    if (scheme == Scheme::Sdma && start->q.leftCols(layout.num_common).squaredNorm() != 0.0)
      throw InvalidInput("SDMA start precoder has a common stream");
    out.q = *start;
  } else {
    out.q = initialize_precoder(channels, mask, layout, scheme, settings.power_budget);
  }
  out.upper_bounds = rates::stream_rates(channels, out.q, noise_variance);
  out.allocation = rates::allocate_common_rate(out.upper_bounds.common, out.upper_bounds.priv, layout);
  out.r_c = out.allocation.common_share;
  out.r_p = out.upper_bounds.priv;
  out.trace.objective.push_back(out.allocation.mmfr);
  out.trace.satellite_power.push_back(per_satellite_powers(out.q));

  socp::SolverOptions opts;
  opts.tol = settings.solver_tol;
  for (int it = 1; it <= settings.max_iters; ++it) {
    const rates::CombinerSet uv = rates::optimal_combiners_weights(out.q, channels, noise_variance);
    const Subproblem sp = build_subproblem(uv, channels, mask, layout, scheme, settings.power_budget,
                                           noise_variance, basis);
    const socp::SolveResult res = socp::solve(sp.program, opts);
    const double kkt = std::max({res.primal_residual, res.dual_residual, res.relative_gap});
    if (!res.ok()) {
      throw SolverFailure(it, res.status,
                          "subproblem solve failed at iteration " + std::to_string(it) + ": " +
                              socp::to_string(res.status));
    }
    out.trace.status.push_back(res.status);
    out.trace.solver_iterations.push_back(res.iterations);
    out.trace.kkt_residual.push_back(kkt);
    out.trace.subproblem_objective.push_back(-res.objective);

    out.q = sp.precoder(res.x);
    out.r_c = sp.common_rates(res.x);
    out.r_p = sp.private_rates(res.x);
    out.upper_bounds = rates::stream_rates(channels, out.q, noise_variance);
    out.allocation = rates::allocate_common_rate(out.upper_bounds.common, out.upper_bounds.priv, layout);
    const double prev = out.trace.objective.back();
    const double cur = out.allocation.mmfr;
    out.trace.objective.push_back(cur);
    out.trace.satellite_power.push_back(per_satellite_powers(out.q));
    if (std::abs(cur - prev) <= settings.rel_obj_tol * std::max(std::abs(prev), 1e-12)) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace leorsma::wmmse
