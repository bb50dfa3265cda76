#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "leorsma/socp.hpp"

namespace leorsma::socp {

void ConicProgram::validate() const {
  const auto n = c.size();
  if (a.cols() != n && a.rows() > 0) throw InvalidInput("A column count differs from the variable count");
  if (g.cols() != n) throw InvalidInput("G column count differs from the variable count");
  if (a.rows() != b.size()) throw InvalidInput("A row count differs from b");
  if (g.rows() != h.size()) throw InvalidInput("G row count differs from h");
  int rows = orthant_dim;
  if (orthant_dim < 0) throw InvalidInput("negative orthant dimension");
  for (int d : soc_dims) {
    if (d < 1) throw InvalidInput("second-order cones need at least one row");
    rows += d;
  }
  if (rows != g.rows()) throw InvalidInput("cone dimensions do not partition the slack vector");
  for (const auto& [name, blk] : variables) {
    if (blk.offset < 0 || blk.size < 0 || blk.offset + blk.size > n) {
      throw InvalidInput("variable block '" + name + "' is out of range");
    }
  }
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& o) {
  terms.insert(terms.end(), o.terms.begin(), o.terms.end());
  constant += o.constant;
  return *this;
}

AffineExpr& AffineExpr::operator*=(double f) {
  for (auto& t : terms) t.second *= f;
  constant *= f;
  return *this;
}

double AffineExpr::evaluate(const RVector& x) const {
  double v = constant;
  for (const auto& [i, coef] : terms) v += coef * x(i);
  return v;
}

AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
AffineExpr operator-(AffineExpr a, const AffineExpr& b) {
  AffineExpr nb = b;
  nb *= -1.0;
  return a += nb;
}
AffineExpr operator*(double f, AffineExpr a) { return a *= f; }

ConeRows quadratic_leq_as_cone(const std::vector<AffineExpr>& y, const AffineExpr& bound) {
  ConeRows rows;
  rows.reserve(y.size() + 2);
  rows.push_back(bound + AffineExpr(1.0));
  for (const auto& yi : y) rows.push_back(2.0 * yi);
  rows.push_back(bound - AffineExpr(1.0));
  return rows;
}

bool cone_contains(const ConeRows& rows, const RVector& x, double tol) {
  if (rows.empty()) return true;
  double sq = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double v = rows[i].evaluate(x);
    sq += v * v;
  }
  return std::sqrt(sq) <= rows[0].evaluate(x) + tol;
}

int ConicBuilder::add_variables(const std::string& name, int count) {
  if (vars_.count(name) != 0) throw InvalidInput("duplicate variable block '" + name + "'");
  const int offset = num_vars_;
  vars_[name] = {offset, count};
  num_vars_ += count;
  return offset;
}

void ConicBuilder::set_objective(const AffineExpr& objective) { objective_ = objective; }
void ConicBuilder::add_equality(const AffineExpr& expr) { equalities_.push_back(expr); }
void ConicBuilder::add_nonnegative(const AffineExpr& expr) { nonneg_.push_back(expr); }
void ConicBuilder::add_cone(const ConeRows& rows) {
  if (rows.empty()) throw InvalidInput("empty cone");
  cones_.push_back(rows);
}

namespace {

void check_index(int i, int n) {
  if (i < 0 || i >= n) throw InvalidInput("affine expression references an unknown variable");
}

}  // namespace

ConicProgram ConicBuilder::build() const {
  ConicProgram p;
  const int n = num_vars_;
  p.variables = vars_;
  p.c = RVector::Zero(n);
  for (const auto& [i, coef] : objective_.terms) {
    check_index(i, n);
    p.c(i) += coef;
  }

  std::vector<Eigen::Triplet<double>> trip;
  p.b.resize(static_cast<Eigen::Index>(equalities_.size()));
  for (std::size_t r = 0; r < equalities_.size(); ++r) {
    for (const auto& [i, coef] : equalities_[r].terms) {
      check_index(i, n);
      trip.emplace_back(static_cast<int>(r), i, coef);
    }
    p.b(static_cast<Eigen::Index>(r)) = -equalities_[r].constant;
  }
  p.a.resize(static_cast<Eigen::Index>(equalities_.size()), n);
  p.a.setFromTriplets(trip.begin(), trip.end());

  // s = h - G x = expr  =>  G row = -coefs, h = constant.
  trip.clear();
  std::vector<double> h;
  auto emit = [&](const AffineExpr& e) {
    const int row = static_cast<int>(h.size());
    for (const auto& [i, coef] : e.terms) {
      check_index(i, n);
      trip.emplace_back(row, i, -coef);
    }
    h.push_back(e.constant);
  };
  for (const auto& e : nonneg_) emit(e);
  p.orthant_dim = static_cast<int>(nonneg_.size());
  for (const auto& cone : cones_) {
    for (const auto& e : cone) emit(e);
    p.soc_dims.push_back(static_cast<int>(cone.size()));
  }
  p.g.resize(static_cast<Eigen::Index>(h.size()), n);
  p.g.setFromTriplets(trip.begin(), trip.end());
  p.h = Eigen::Map<const RVector>(h.data(), static_cast<Eigen::Index>(h.size()));
  p.a.makeCompressed();
  p.g.makeCompressed();
  return p;
}

std::string to_string(Status status) {
  switch (status) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::MaxIter: return "max_iter";
  }
  return "unknown";
}

namespace {

void dump_sparse(const SparseMatrix& m, std::ostream& os) {
  os << m.nonZeros() << '\n';
  for (int col = 0; col < m.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
}

void dump_dense(const RVector& v, std::ostream& os) {
  os << v.size() << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << v(i) << (i + 1 == v.size() ? '\n' : ' ');
  if (v.size() == 0) os << '\n';
}

}  // namespace

void dump_program(const ConicProgram& program, std::ostream& os) {
  std::ostringstream body;
  body << std::setprecision(17);
  body << "# leorsma conic program v1\n";
  body << "# minimize c'x  s.t.  Ax = b,  h - Gx in K\n";
  body << "dims " << program.num_variables() << ' ' << program.num_equalities() << ' '
       << program.num_cone_rows() << '\n';
  body << "orthant " << program.orthant_dim << '\n';
  body << "soc " << program.soc_dims.size();
  for (int d : program.soc_dims) body << ' ' << d;
  body << '\n';
  for (const auto& [name, blk] : program.variables) {
    body << "var " << name << ' ' << blk.offset << ' ' << blk.size << '\n';
  }
  body << "c ";
  dump_dense(program.c, body);
  body << "A ";
  dump_sparse(program.a, body);
  body << "b ";
  dump_dense(program.b, body);
  body << "G ";
  dump_sparse(program.g, body);
  body << "h ";
  dump_dense(program.h, body);
  os << body.str();
}

}  // namespace leorsma::socp
