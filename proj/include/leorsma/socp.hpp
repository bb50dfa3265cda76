#pragma once

// Standard-form second-order cone programs and a dense primal-dual
// interior-point solver (homogeneous self-dual embedding, Nesterov-Todd
// scaling, Mehrotra predictor-corrector).
//
//   minimize    c'x
//   subject to  A x = b
//               G x + s = h,   s in K = R^l_+ x Q^{q_1} x ... x Q^{q_N}
//
// Q^q = {(t, y) in R x R^{q-1} : ||y|| <= t}.

#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "leorsma/types.hpp"

namespace leorsma::socp {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct VariableBlock {
  int offset = 0;
  int size = 0;
};

struct ConicProgram {
  RVector c;
  SparseMatrix a;  // p x n
  RVector b;
  SparseMatrix g;  // m x n
  RVector h;
  int orthant_dim = 0;
  std::vector<int> soc_dims;
  /// Named decision blocks (precoder entries, rates, epigraph variable, ...).
  std::map<std::string, VariableBlock> variables;

  int num_variables() const { return static_cast<int>(c.size()); }
  int num_equalities() const { return static_cast<int>(b.size()); }
  int num_cone_rows() const { return static_cast<int>(h.size()); }
  /// Throws InvalidInput on inconsistent dimensions or cone partition.
  void validate() const;
};

/// Sparse affine expression  constant + sum coef * x[index].
struct AffineExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  AffineExpr() = default;
  explicit AffineExpr(double c) : constant(c) {}
  static AffineExpr var(int index, double coef = 1.0) {
    AffineExpr e;
    e.terms.emplace_back(index, coef);
    return e;
  }
  AffineExpr& add(int index, double coef) {
    terms.emplace_back(index, coef);
    return *this;
  }
  AffineExpr& operator+=(const AffineExpr& o);
  AffineExpr& operator*=(double f);
  double evaluate(const RVector& x) const;
};

AffineExpr operator+(AffineExpr a, const AffineExpr& b);
AffineExpr operator-(AffineExpr a, const AffineExpr& b);
AffineExpr operator*(double f, AffineExpr a);

/// Rows of a second-order cone: rows[0] >= ||rows[1:]||.
using ConeRows = std::vector<AffineExpr>;

/// ||y||^2 <= bound  <=>  ||(2y, bound - 1)|| <= bound + 1.
ConeRows quadratic_leq_as_cone(const std::vector<AffineExpr>& y, const AffineExpr& bound);

/// True when the cone rows evaluated at x lie in the cone (within tol).
bool cone_contains(const ConeRows& rows, const RVector& x, double tol = 0.0);

/// Incrementally assembles a ConicProgram.
class ConicBuilder {
 public:
  /// Adds `count` variables under `name`; returns the offset of the first.
  int add_variables(const std::string& name, int count);
  int num_variables() const { return num_vars_; }

  void set_objective(const AffineExpr& objective);  // minimized; constant ignored
  void add_equality(const AffineExpr& expr);        // expr == 0
  void add_nonnegative(const AffineExpr& expr);     // expr >= 0
  void add_cone(const ConeRows& rows);

  ConicProgram build() const;

 private:
  int num_vars_ = 0;
  std::map<std::string, VariableBlock> vars_;
  AffineExpr objective_;
  std::vector<AffineExpr> equalities_;
  std::vector<AffineExpr> nonneg_;
  std::vector<ConeRows> cones_;
};

enum class Status { Optimal, Infeasible, Unbounded, MaxIter };

std::string to_string(Status status);

struct SolverOptions {
  double tol = 1e-7;
  int max_iters = 100;
  double step_fraction = 0.99;
  int refinement_steps = 2;
  double static_regularization = 1e-9;
};

struct SolveResult {
  Status status = Status::MaxIter;
  RVector x;
  RVector y;  // equality multipliers
  RVector z;  // cone multipliers
  RVector s;  // cone slacks
  double objective = 0.0;  // c'x
  double dual_objective = 0.0;
  double gap = 0.0;                 // s'z
  double relative_gap = 0.0;
  double primal_residual = 0.0;     // relative
  double dual_residual = 0.0;       // relative
  double complementarity = 0.0;     // s'z / max(1, |c'x|)
  int iterations = 0;

  bool ok() const { return status == Status::Optimal; }
};

/// Seam for swapping in another conic solver behind the same contract.
class ConicSolver {
 public:
  virtual ~ConicSolver() = default;
  virtual SolveResult solve(const ConicProgram& program, const SolverOptions& options) const = 0;
  virtual std::string name() const = 0;
};

class InteriorPointSolver final : public ConicSolver {
 public:
  SolveResult solve(const ConicProgram& program, const SolverOptions& options) const override;
  std::string name() const override { return "bundled-ipm"; }
};

/// Solves with the bundled interior-point solver.
SolveResult solve(const ConicProgram& program, const SolverOptions& options = {});

/// Plain-text standard form for cross-checking with external solvers.
void dump_program(const ConicProgram& program, std::ostream& os);

}  // namespace leorsma::socp
