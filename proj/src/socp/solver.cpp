#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "leorsma/socp.hpp"

namespace leorsma::socp {

namespace {

// Cone bookkeeping over the slack vector: orthant rows first, then SOC blocks.
struct ConeLayout {
  int orthant = 0;
  std::vector<int> offset;
  std::vector<int> dim;
  int degree() const { return orthant + static_cast<int>(dim.size()); }
};

// Nesterov-Todd scaling W (symmetric) with W z = W^{-1} s = lambda.
struct SocScaling {
  double eta = 1.0;
  RVector wbar;  // w0 = wbar(0), w1 = wbar.tail
};

struct Scaling {
  RVector orthant_w;  // sqrt(s / z)
  std::vector<SocScaling> soc;
};

double soc_residual(const Eigen::Ref<const RVector>& v) {
  const double n1 = v.tail(v.size() - 1).norm();
  return (v(0) - n1) * (v(0) + n1);
}

// W-bar v = [w0 v0 + w1'v1;  v0 w1 + v1 + (w1'v1 / (1 + w0)) w1]
void apply_wbar(const RVector& w, const Eigen::Ref<const RVector>& v, Eigen::Ref<RVector> out, bool inverse) {
  const Eigen::Index d = v.size();
  const double w0 = w(0);
  const auto w1 = w.tail(d - 1);
  const double v0 = v(0);
  const double w1v1 = w1.dot(v.tail(d - 1));
  RVector tail = v.tail(d - 1) + (w1v1 / (1.0 + w0)) * w1;
  if (!inverse) {
    out(0) = w0 * v0 + w1v1;
    out.tail(d - 1) = v0 * w1 + tail;
  } else {
    // W-bar^{-1} = J W-bar J
    out(0) = w0 * v0 - w1v1;
    out.tail(d - 1) = -v0 * w1 + tail;
  }
}

class Cones {
 public:
  explicit Cones(const ConicProgram& p) {
    layout_.orthant = p.orthant_dim;
    int off = p.orthant_dim;
    for (int d : p.soc_dims) {
      layout_.offset.push_back(off);
      layout_.dim.push_back(d);
      off += d;
    }
    m_ = off;
  }

  const ConeLayout& layout() const { return layout_; }
  int rows() const { return m_; }

  RVector identity() const {
    RVector e = RVector::Zero(m_);
    e.head(layout_.orthant).setOnes();
    for (int off : layout_.offset) e(off) = 1.0;
    return e;
  }

  // Smallest "eigenvalue" of v over all cones.
  double min_eig(const RVector& v) const {
    double r = std::numeric_limits<double>::infinity();
    if (layout_.orthant > 0) r = v.head(layout_.orthant).minCoeff();
    for (std::size_t i = 0; i < layout_.dim.size(); ++i) {
      const auto blk = v.segment(layout_.offset[i], layout_.dim[i]);
      r = std::min(r, blk(0) - blk.tail(blk.size() - 1).norm());
    }
    return r;
  }

  void shift_into_interior(RVector& v) const {
    const double alpha = -min_eig(v);
    if (alpha >= 0.0) v += (1.0 + alpha) * identity();
  }

  RVector jordan(const RVector& u, const RVector& v) const {
    RVector out(m_);
    const int l = layout_.orthant;
    out.head(l) = u.head(l).cwiseProduct(v.head(l));
    for (std::size_t i = 0; i < layout_.dim.size(); ++i) {
      const int o = layout_.offset[i];
      const int d = layout_.dim[i];
      const auto a = u.segment(o, d);
      const auto b = v.segment(o, d);
      out(o) = a.dot(b);
      out.segment(o + 1, d - 1) = a(0) * b.tail(d - 1) + b(0) * a.tail(d - 1);
    }
    return out;
  }

  // Solves lambda o x = d.
  RVector jordan_div(const RVector& lambda, const RVector& d) const {
    RVector out(m_);
    const int l = layout_.orthant;
    out.head(l) = d.head(l).cwiseQuotient(lambda.head(l));
    for (std::size_t i = 0; i < layout_.dim.size(); ++i) {
      const int o = layout_.offset[i];
      const int n = layout_.dim[i];
      const auto lam = lambda.segment(o, n);
      const auto dd = d.segment(o, n);
      const double l0 = lam(0);
      const double det = soc_residual(lam);
      const double x0 = (l0 * dd(0) - lam.tail(n - 1).dot(dd.tail(n - 1))) / det;
      out(o) = x0;
      out.segment(o + 1, n - 1) = (dd.tail(n - 1) - x0 * lam.tail(n - 1)) / l0;
    }
    return out;
  }

  Scaling nt_scaling(const RVector& s, const RVector& z) const {
    Scaling w;
    const int l = layout_.orthant;
    w.orthant_w = (s.head(l).cwiseQuotient(z.head(l))).cwiseSqrt();
    for (std::size_t i = 0; i < layout_.dim.size(); ++i) {
      const int o = layout_.offset[i];
      const int n = layout_.dim[i];
      const RVector sb = s.segment(o, n);
      const RVector zb = z.segment(o, n);
      const double sres = std::sqrt(std::max(soc_residual(sb), std::numeric_limits<double>::min()));
      const double zres = std::sqrt(std::max(soc_residual(zb), std::numeric_limits<double>::min()));
      const RVector sn = sb / sres;
      const RVector zn = zb / zres;
      const double gamma = std::sqrt(std::max(0.5 * (1.0 + sn.dot(zn)), std::numeric_limits<double>::min()));
      SocScaling sc;
      sc.eta = std::sqrt(sres / zres);
      sc.wbar.resize(n);
      sc.wbar(0) = (sn(0) + zn(0)) / (2.0 * gamma);
      sc.wbar.tail(n - 1) = (sn.tail(n - 1) - zn.tail(n - 1)) / (2.0 * gamma);
      w.soc.push_back(std::move(sc));
    }
    return w;
  }

  // out = W^{power} v for power in {1, -1, 2, -2}.
  RVector apply(const Scaling& w, const RVector& v, int power) const {
    RVector out(m_);
    const int l = layout_.orthant;
    switch (power) {
      case 1: out.head(l) = w.orthant_w.cwiseProduct(v.head(l)); break;
      case -1: out.head(l) = v.head(l).cwiseQuotient(w.orthant_w); break;
      case 2: out.head(l) = w.orthant_w.cwiseAbs2().cwiseProduct(v.head(l)); break;
      default: out.head(l) = v.head(l).cwiseQuotient(w.orthant_w.cwiseAbs2()); break;
    }
    for (std::size_t i = 0; i < layout_.dim.size(); ++i) {
      const int o = layout_.offset[i];
      const int n = layout_.dim[i];
      const auto& sc = w.soc[i];
      RVector tmp(n);
      const bool inv = power < 0;
      apply_wbar(sc.wbar, v.segment(o, n), tmp, inv);
      if (power == 2 || power == -2) {
        RVector tmp2(n);
        apply_wbar(sc.wbar, tmp, tmp2, inv);
        tmp = tmp2;
      }
      const double f = std::pow(sc.eta, static_cast<double>(power));
      out.segment(o, n) = f * tmp;
    }
    return out;
  }

  // Largest alpha in [0, inf) with v + alpha dv in the cone (inf if unbounded).
  double max_step(const RVector& v, const RVector& dv) const {
    double alpha = std::numeric_limits<double>::infinity();
    for (int i = 0; i < layout_.orthant; ++i) {
      if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
    }
    for (std::size_t i = 0; i < layout_.dim.size(); ++i) {
      const int o = layout_.offset[i];
      const int n = layout_.dim[i];
      alpha = std::min(alpha, soc_step(v.segment(o, n), dv.segment(o, n)));
    }
    return alpha;
  }

 private:
  static double soc_step(const Eigen::Ref<const RVector>& v, const Eigen::Ref<const RVector>& dv) {
    // f(a) = (v0 + a dv0)^2 - ||v1 + a dv1||^2, f(0) > 0; first positive root.
    const Eigen::Index n = v.size();
    const double qa = dv(0) * dv(0) - dv.tail(n - 1).squaredNorm();
    const double qb = 2.0 * (v(0) * dv(0) - v.tail(n - 1).dot(dv.tail(n - 1)));
    const double qc = std::max(soc_residual(v), 0.0);
    double best = std::numeric_limits<double>::infinity();
    auto consider = [&](double r) {
      if (r > 0.0 && std::isfinite(r)) best = std::min(best, r);
    };
    if (n == 1) {
      if (dv(0) < 0.0) consider(-v(0) / dv(0));
      return best;
    }
    if (std::abs(qa) < 1e-300) {
      if (qb < 0.0) consider(-qc / qb);
    } else {
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double t = -0.5 * (qb + (qb >= 0.0 ? sq : -sq));
        if (t != 0.0) {
          consider(t / qa);
          consider(qc / t);
        }
      }
    }
    // The ray must also stay on the upper branch (v0 + a dv0 >= 0).
    if (dv(0) < 0.0) consider(-v(0) / dv(0));
    return best;
  }

  ConeLayout layout_;
  int m_ = 0;
};

// Per-cone dense slices of G restricted to the columns the cone touches.
struct ConeBlock {
  int row_offset = 0;
  int rows = 0;
  std::vector<int> cols;
  RMatrix dense;  // rows x cols.size()
};

std::vector<ConeBlock> slice_blocks(const ConicProgram& p, const ConeLayout& layout) {
  std::vector<std::pair<int, int>> ranges;
  for (int i = 0; i < layout.orthant; ++i) ranges.emplace_back(i, 1);
  for (std::size_t i = 0; i < layout.dim.size(); ++i) ranges.emplace_back(layout.offset[i], layout.dim[i]);

  const Eigen::SparseMatrix<double, Eigen::RowMajor> g = p.g;
  std::vector<ConeBlock> blocks;
  blocks.reserve(ranges.size());
  std::vector<int> slot(static_cast<std::size_t>(p.num_variables()), -1);
  for (const auto& [off, rows] : ranges) {
    ConeBlock b;
    b.row_offset = off;
    b.rows = rows;
    for (int r = off; r < off + rows; ++r) {
      for (decltype(g)::InnerIterator it(g, r); it; ++it) {
        auto& sl = slot[static_cast<std::size_t>(it.col())];
        if (sl < 0) {
          sl = static_cast<int>(b.cols.size());
          b.cols.push_back(static_cast<int>(it.col()));
        }
      }
    }
    b.dense = RMatrix::Zero(rows, static_cast<Eigen::Index>(b.cols.size()));
    for (int r = off; r < off + rows; ++r) {
      for (decltype(g)::InnerIterator it(g, r); it; ++it) {
        b.dense(r - off, slot[static_cast<std::size_t>(it.col())]) += it.value();
      }
    }
    for (int c : b.cols) slot[static_cast<std::size_t>(c)] = -1;
    blocks.push_back(std::move(b));
  }
  return blocks;
}

// Reduced KKT solver:  [0 A' G'; A 0 0; G 0 -W^2] (dx, dy, dz) = (rx, ry, rz).
class KktSystem {
 public:
  KktSystem(const ConicProgram& p, const Cones& cones, const std::vector<ConeBlock>& blocks,
            const SolverOptions& opt)
      : p_(p), cones_(cones), blocks_(blocks), opt_(opt), at_(p.a.transpose()), gt_(p.g.transpose()) {}

  void factor(const Scaling& w) {
    w_ = &w;
    const int n = p_.num_variables();
    RMatrix normal = RMatrix::Zero(n, n);
    const auto& layout = cones_.layout();
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& blk = blocks_[bi];
      if (blk.cols.empty()) continue;
      RMatrix scaled(blk.rows, static_cast<Eigen::Index>(blk.cols.size()));
      if (static_cast<int>(bi) < layout.orthant) {
        scaled = blk.dense / w.orthant_w(static_cast<Eigen::Index>(bi));
      } else {
        const auto& sc = w.soc[bi - static_cast<std::size_t>(layout.orthant)];
        RVector col(blk.rows);
        for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
          apply_wbar(sc.wbar, blk.dense.col(j), col, true);
          scaled.col(j) = col / sc.eta;
        }
      }
      const RMatrix contrib = scaled.transpose() * scaled;
      for (std::size_t a = 0; a < blk.cols.size(); ++a) {
        for (std::size_t b = 0; b < blk.cols.size(); ++b) {
          normal(blk.cols[a], blk.cols[b]) += contrib(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
      }
    }
    const double delta = opt_.static_regularization;
    normal.diagonal().array() += delta;
    if (p_.num_equalities() > 0) {
      // Quasi-definite augmented system [N + dI, A'; A, -dI].
      const int n = p_.num_variables();
      const int np = p_.num_equalities();
      RMatrix aug = RMatrix::Zero(n + np, n + np);
      aug.topLeftCorner(n, n) = normal;
      const RMatrix ad = RMatrix(p_.a);
      aug.bottomLeftCorner(np, n) = ad;
      aug.topRightCorner(n, np) = ad.transpose();
      aug.bottomRightCorner(np, np).diagonal().setConstant(-delta);
      ldlt_.compute(aug);
      if (ldlt_.info() != Eigen::Success) throw NumericalError("augmented KKT factorization failed");
    } else {
      llt_.compute(normal);
      if (llt_.info() != Eigen::Success) throw NumericalError("normal-equation matrix is not positive definite");
    }
  }

  void solve(const RVector& rx, const RVector& ry, const RVector& rz, RVector& dx, RVector& dy, RVector& dz) const {
    solve_once(rx, ry, rz, dx, dy, dz);
    for (int it = 0; it < opt_.refinement_steps; ++it) {
      const RVector ex = rx - (at_ * dy + gt_ * dz);
      const RVector ey = ry - p_.a * dx;
      const RVector ez = rz - (p_.g * dx - cones_.apply(*w_, dz, 2));
      RVector cx, cy, cz;
      solve_once(ex, ey, ez, cx, cy, cz);
      dx += cx;
      dy += cy;
      dz += cz;
    }
  }

 private:
  void solve_once(const RVector& rx, const RVector& ry, const RVector& rz, RVector& dx, RVector& dy,
                  RVector& dz) const {
    const RVector winv2_rz = cones_.apply(*w_, rz, -2);
    const RVector r1 = rx + gt_ * winv2_rz;
    if (p_.num_equalities() > 0) {
      const int n = p_.num_variables();
      RVector rhs(n + p_.num_equalities());
      rhs << r1, ry;
      const RVector sol = ldlt_.solve(rhs);
      dx = sol.head(n);
      dy = sol.tail(p_.num_equalities());
    } else {
      dy = RVector::Zero(0);
      dx = llt_.solve(r1);
    }
    dz = cones_.apply(*w_, p_.g * dx - rz, -2);
  }

  const ConicProgram& p_;
  const Cones& cones_;
  const std::vector<ConeBlock>& blocks_;
  const SolverOptions& opt_;
  SparseMatrix at_;
  SparseMatrix gt_;
  const Scaling* w_ = nullptr;
  Eigen::LLT<RMatrix> llt_;
  Eigen::LDLT<RMatrix> ldlt_;
};

struct Iterate {
  RVector x, y, z, s;
  double tau = 1.0;
  double kappa = 1.0;
};

struct Residuals {
  RVector rx, ry, rz;
  double rt = 0.0;
  double cx = 0.0, by = 0.0, hz = 0.0;
};

Residuals residuals(const ConicProgram& p, const Iterate& it) {
  Residuals r;
  r.rx = p.a.transpose() * it.y + p.g.transpose() * it.z + p.c * it.tau;
  r.ry = p.a * it.x - p.b * it.tau;
  r.rz = p.g * it.x + it.s - p.h * it.tau;
  r.cx = p.c.dot(it.x);
  r.by = p.b.dot(it.y);
  r.hz = p.h.dot(it.z);
  r.rt = it.kappa + r.cx + r.by + r.hz;
  return r;
}

void fill_result(const ConicProgram& p, const Iterate& it, const Residuals& r, SolveResult& out) {
  const double tau = it.tau;
  out.x = it.x / tau;
  out.y = it.y / tau;
  out.z = it.z / tau;
  out.s = it.s / tau;
  out.objective = r.cx / tau;
  out.dual_objective = -(r.hz + r.by) / tau;
  out.gap = it.s.dot(it.z) / (tau * tau);
  out.relative_gap = out.gap / std::max(1.0, std::min(std::abs(out.objective), std::abs(out.dual_objective)));
  out.primal_residual = std::max(r.ry.norm() / std::max(1.0, p.b.norm()), r.rz.norm() / std::max(1.0, p.h.norm())) / tau;
  out.dual_residual = r.rx.norm() / std::max(1.0, p.c.norm()) / tau;
  out.complementarity = std::abs(out.gap) / std::max(1.0, std::abs(out.objective));
}

}  // namespace

SolveResult InteriorPointSolver::solve(const ConicProgram& p, const SolverOptions& opt) const {
  p.validate();
  const int n = p.num_variables();
  const int np = p.num_equalities();
  const Cones cones(p);
  const int m = cones.rows();
  const auto blocks = slice_blocks(p, cones.layout());
  const double degree = static_cast<double>(cones.layout().degree());

  KktSystem kkt(p, cones, blocks, opt);
  Scaling unit;
  unit.orthant_w = RVector::Ones(cones.layout().orthant);
  for (int d : cones.layout().dim) {
    SocScaling sc;
    sc.wbar = RVector::Zero(d);
    sc.wbar(0) = 1.0;
    unit.soc.push_back(sc);
  }
  kkt.factor(unit);

  // Least-squares primal start and dual start, shifted into the cone.
  Iterate it;
  {
    RVector dx, dy, dz;
    kkt.solve(RVector::Zero(n), p.b, p.h, dx, dy, dz);
    it.x = dx;
    it.s = -dz;
    cones.shift_into_interior(it.s);
    kkt.solve(-p.c, RVector::Zero(np), RVector::Zero(m), dx, dy, dz);
    it.y = dy;
    it.z = dz;
    cones.shift_into_interior(it.z);
  }

  SolveResult best;
  double best_merit = std::numeric_limits<double>::infinity();
  const RVector e = cones.identity();

  for (int iter = 0; iter <= opt.max_iters; ++iter) {
    const Residuals r = residuals(p, it);
    SolveResult cur;
    fill_result(p, it, r, cur);
    cur.iterations = iter;

    if (cur.primal_residual < opt.tol && cur.dual_residual < opt.tol && cur.relative_gap < opt.tol) {
      cur.status = Status::Optimal;
      return cur;
    }
    // Certificates of infeasibility, checked on the unnormalized iterate.
    if (it.tau < it.kappa) {
      const double hz_by = r.hz + r.by;
      if (hz_by < 0.0) {
        const double res = (r.rx - p.c * it.tau).norm() / -hz_by;
        if (res < opt.tol) {
          cur.status = Status::Infeasible;
          return cur;
        }
      }
      if (r.cx < 0.0) {
        const double res = std::max((p.a * it.x).norm(), (p.g * it.x + it.s).norm()) / -r.cx;
        if (res < opt.tol) {
          cur.status = Status::Unbounded;
          return cur;
        }
      }
    }
    const double merit = std::max({cur.primal_residual, cur.dual_residual, cur.relative_gap});
    if (merit < best_merit) {
      best_merit = merit;
      best = cur;
    }
    if (iter == opt.max_iters) break;

    const Scaling w = cones.nt_scaling(it.s, it.z);
    const RVector lambda = cones.apply(w, it.z, 1);
    const double mu = (it.s.dot(it.z) + it.tau * it.kappa) / (degree + 1.0);
    try {
      kkt.factor(w);
    } catch (const NumericalError&) {
      break;  // report the best iterate so far
    }

    RVector x1, y1, z1;
    kkt.solve(-p.c, p.b, p.h, x1, y1, z1);
    const double denom = p.c.dot(x1) + p.b.dot(y1) + p.h.dot(z1) - it.kappa / it.tau;

    struct Direction {
      RVector dx, dy, dz, ds;
      double dtau = 0.0, dkappa = 0.0;
    };
    auto direction = [&](const RVector& ds_target, double dt_target, double eta) {
      Direction d;
      const RVector lam_div = cones.jordan_div(lambda, ds_target);
      const RVector w_lam_div = cones.apply(w, lam_div, 1);
      RVector x2, y2, z2;
      kkt.solve(-eta * r.rx, -eta * r.ry, -eta * r.rz - w_lam_div, x2, y2, z2);
      d.dtau = (-eta * r.rt - dt_target / it.tau - (p.c.dot(x2) + p.b.dot(y2) + p.h.dot(z2))) / denom;
      d.dx = x2 + d.dtau * x1;
      d.dy = y2 + d.dtau * y1;
      d.dz = z2 + d.dtau * z1;
      d.ds = w_lam_div - cones.apply(w, d.dz, 2);
      d.dkappa = (dt_target - it.kappa * d.dtau) / it.tau;
      return d;
    };
    auto step_to_boundary = [&](const Direction& d) {
      double a = std::min(cones.max_step(it.s, d.ds), cones.max_step(it.z, d.dz));
      if (d.dtau < 0.0) a = std::min(a, -it.tau / d.dtau);
      if (d.dkappa < 0.0) a = std::min(a, -it.kappa / d.dkappa);
      return a;
    };

    // Predictor.
    const RVector lam_sq = cones.jordan(lambda, lambda);
    const Direction aff = direction(-lam_sq, -it.tau * it.kappa, 1.0);
    const double alpha_aff = std::min(1.0, step_to_boundary(aff));
    const double sigma = std::pow(1.0 - alpha_aff, 3);

    // Corrector with second-order term.
    const RVector corr = cones.jordan(cones.apply(w, aff.ds, -1), cones.apply(w, aff.dz, 1));
    const Direction comb = direction(-lam_sq - corr + sigma * mu * e,
                                     -it.tau * it.kappa - aff.dtau * aff.dkappa + sigma * mu, 1.0 - sigma);
    const double alpha = std::min(1.0, opt.step_fraction * step_to_boundary(comb));

    it.x += alpha * comb.dx;
    it.y += alpha * comb.dy;
    it.z += alpha * comb.dz;
    it.s += alpha * comb.ds;
    it.tau += alpha * comb.dtau;
    it.kappa += alpha * comb.dkappa;
  }
  best.status = Status::MaxIter;
  return best;
}

SolveResult solve(const ConicProgram& program, const SolverOptions& options) {
  return InteriorPointSolver{}.solve(program, options);
}

}  // namespace leorsma::socp
