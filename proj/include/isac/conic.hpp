#pragma once

// Solver-agnostic conic programs over the nonnegative orthant, second-order
// cones and PSD cones, plus the dense primal-dual interior-point backend.
//
// Complex Hermitian LMIs are embedded into real symmetric form when the program
// is assembled, so the solver only ever sees real data.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace isac {

using cd = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// [[Re H, -Im H], [Im H, Re H]]. H >= 0 iff the embedding is >= 0.
template <typename Derived>
Eigen::Matrix<typename Eigen::NumTraits<typename Derived::Scalar>::Real, Eigen::Dynamic, Eigen::Dynamic>
hermitian_embed(const Eigen::MatrixBase<Derived>& H, double tol = 1e-10) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  if (H.rows() != H.cols()) throw std::invalid_argument("hermitian_embed: matrix is not square");
  const Eigen::Index n = H.rows();
  const Real scale = std::max<Real>(Real(1), H.cwiseAbs().maxCoeff());
  if ((H - H.adjoint()).cwiseAbs().maxCoeff() > tol * scale)
    throw std::invalid_argument("hermitian_embed: matrix is not Hermitian");
  Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> E(2 * n, 2 * n);
  E.topLeftCorner(n, n) = H.real();
  E.bottomRightCorner(n, n) = H.real();
  E.topRightCorner(n, n) = -H.imag();
  E.bottomLeftCorner(n, n) = H.imag();
  return E;
}

// max(0, -lambda_min(X)) of a symmetric (or Hermitian) matrix.
template <typename Derived>
typename Eigen::NumTraits<typename Derived::Scalar>::Real psd_residual(const Eigen::MatrixBase<Derived>& X) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  if (X.rows() != X.cols()) throw std::invalid_argument("psd_residual: matrix is not square");
  if (X.rows() == 0) return Real(0);
  using MatT = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const MatT sym = (X + X.adjoint()) / Real(2);
  Eigen::SelfAdjointEigenSolver<MatT> es(sym, Eigen::EigenvaluesOnly);
  return std::max<Real>(Real(0), -es.eigenvalues()(0));
}

// Affine scalar expression sum_i coef_i * x_{var_i} + constant.
struct LinExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  LinExpr() = default;
  LinExpr(double c) : constant(c) {}  // NOLINT(google-explicit-constructor)
  static LinExpr var(int index, double coef = 1.0) {
    LinExpr e;
    e.terms.emplace_back(index, coef);
    return e;
  }

  LinExpr& add(int index, double coef) {
    if (coef != 0.0) terms.emplace_back(index, coef);
    return *this;
  }
  LinExpr& operator+=(const LinExpr& o) {
    terms.insert(terms.end(), o.terms.begin(), o.terms.end());
    constant += o.constant;
    return *this;
  }
  LinExpr& operator-=(const LinExpr& o) {
    for (const auto& [v, c] : o.terms) terms.emplace_back(v, -c);
    constant -= o.constant;
    return *this;
  }
  LinExpr& operator*=(double s) {
    for (auto& t : terms) t.second *= s;
    constant *= s;
    return *this;
  }
  double eval(const Vec& x) const {
    double v = constant;
    for (const auto& [i, c] : terms) v += c * x(i);
    return v;
  }
};

inline LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
inline LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
inline LinExpr operator*(double s, LinExpr a) { return a *= s; }
inline LinExpr operator*(LinExpr a, double s) { return a *= s; }
inline LinExpr operator-(LinExpr a) { return a *= -1.0; }

// Hermitian n x n matrix variable parameterised by n^2 real scalars:
// the n diagonal entries, then (Re, Im) of each strictly upper entry (row-major).
struct HermVar {
  int offset = -1;
  int n = 0;

  int num_params() const { return n * n; }
  int diag(int i) const { return offset + i; }
  // index of Re / Im parameter of entry (i, j), i < j
  int re(int i, int j) const { return offset + n + 2 * upper_index(i, j); }
  int im(int i, int j) const { return offset + n + 2 * upper_index(i, j) + 1; }
  // basis matrix of parameter p (relative index) so that X = sum_p x_p E_p
  CMat basis(int p) const;
  CMat value(const Vec& x) const;
  LinExpr trace() const;
  // Re Tr(C X) for Hermitian C, as an affine expression of the parameters
  LinExpr trace_with(const CMat& C) const;

 private:
  int upper_index(int i, int j) const { return i * n - i * (i + 1) / 2 + (j - i - 1); }
};

// Affine Hermitian-matrix-valued expression of size n, stored sparsely per
// variable as lower-triangular complex entries.
class HermExpr {
 public:
  struct Entry {
    int i, j;
    cd value;
  };

  explicit HermExpr(int n);

  int size() const { return n_; }
  void add_constant(const CMat& M, int r0 = 0, int c0 = 0);
  // coef_var * M placed at block (r0, c0); for an off-diagonal block the adjoint
  // is implied at (c0, r0), for a diagonal block M must be Hermitian.
  void add_scaled(int var, const CMat& M, int r0 = 0, int c0 = 0);
  void add_scaled(const LinExpr& e, const CMat& M, int r0 = 0, int c0 = 0);
  // scale * L^H X L placed on the diagonal block starting at r0
  void add_congruence(const HermVar& X, const CMat& L, double scale = 1.0, int r0 = 0);
  // X placed as a block at (r0, c0) (off-diagonal blocks imply X^H at (c0, r0))
  void add_var_block(const HermVar& X, double scale, int r0, int c0);

  const std::map<int, std::vector<Entry>>& terms() const { return terms_; }
  const CMat& constant() const { return constant_; }
  bool is_real() const;
  CMat value(const Vec& x) const;

 private:
  void accumulate(int var, const CMat& M, int r0, int c0, cd scale);
  void push(int var, int i, int j, cd v);

  int n_;
  CMat constant_;
  std::map<int, std::vector<Entry>> terms_;
};

enum class ConeKind { Zero, Nonneg, Soc, Psd };

struct ConstraintHandle {
  int index = -1;
};

struct SolverOptions {
  double tol = 1e-7;
  int max_iterations = 120;
  bool equilibrate = true;
  bool verbose = false;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure, IterationLimit };
const char* to_string(SolveStatus s);

struct Solution {
  SolveStatus status = SolveStatus::NumericalFailure;
  double objective = 0.0;
  Vec x;  // primal values, present iff Optimal
  std::vector<Vec> duals;  // one block per constraint (present iff Optimal)
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  double seconds = 0.0;
  int iterations = 0;
  bool inaccurate = false;  // best iterate accepted at relaxed dual / gap tolerance

  bool optimal() const { return status == SolveStatus::Optimal; }
  double value(int var) const { return x(var); }
  double value(const LinExpr& e) const { return e.eval(x); }
  CMat value(const HermVar& v) const { return v.value(x); }
};

// Conic form used by the backend:
//   minimize c'x  s.t.  A x = b,  G x + s = h,  s in K.
struct StandardForm {
  Vec c;
  double c0 = 0.0;
  Eigen::SparseMatrix<double> A, G;
  Vec b, h;
  int n_nonneg = 0;
  std::vector<int> soc_dims;
  std::vector<int> psd_orders;
  // per program constraint: cone kind and row range in A (Zero) or G (others)
  struct RowMap {
    ConeKind kind;
    int offset;
    int rows;
    int order;  // PSD order after embedding
    bool complex_embedded;
  };
  std::vector<RowMap> row_map;
};

class ConicProgram {
 public:
  int add_variable(const std::string& name = {});
  std::vector<int> add_variables(int count, const std::string& name = {});
  HermVar add_hermitian(int n, bool psd, const std::string& name = {});
  int num_variables() const { return static_cast<int>(var_names_.size()); }

  ConstraintHandle add_equality(const LinExpr& e, const std::string& name = {});  // e == 0
  ConstraintHandle add_nonneg(const LinExpr& e, const std::string& name = {});    // e >= 0
  ConstraintHandle add_soc(const LinExpr& t, const std::vector<LinExpr>& u,
                           const std::string& name = {});  // ||u|| <= t
  // x * y >= ||w||^2 with x, y >= 0
  ConstraintHandle add_rotated_soc(const LinExpr& x, const LinExpr& y, const std::vector<LinExpr>& w,
                                   const std::string& name = {});
  ConstraintHandle add_lmi(const HermExpr& M, const std::string& name = {});  // M >= 0
  void minimize(const LinExpr& objective) { objective_ = objective; }

  const LinExpr& objective() const { return objective_; }
  int num_constraints() const { return static_cast<int>(cons_.size()); }
  const std::string& constraint_name(ConstraintHandle h) const { return cons_.at(h.index).name; }

  StandardForm standard_form() const;
  // plain-text listing (variables, cones, rows) for cross-checking with other tools
  void dump(std::ostream& os) const;
  // largest constraint violation of x (cone-aware), used for post-solve checks
  double max_violation(const Vec& x) const;

 private:
  struct Constraint {
    ConeKind kind;
    std::string name;
    std::vector<LinExpr> rows;  // Zero / Nonneg / Soc rows
    HermExpr lmi{0};
  };
  void check_expr(const LinExpr& e) const;

  std::vector<std::string> var_names_;
  std::vector<Constraint> cons_;
  LinExpr objective_;
};

Solution solve(const ConicProgram& p, const SolverOptions& opt = {});
Solution solve_standard(const StandardForm& sf, const SolverOptions& opt = {});

}  // namespace isac
