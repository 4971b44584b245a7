#include "isac/conic.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace isac {

namespace {

// Lower-triangular, column-major svec index of entry (i, j), i >= j.
inline int svec_index(int order, int i, int j) { return j * order - j * (j - 1) / 2 + (i - j); }

const char* kind_name(ConeKind k) {
  switch (k) {
    case ConeKind::Zero: return "zero";
    case ConeKind::Nonneg: return "nonneg";
    case ConeKind::Soc: return "soc";
    case ConeKind::Psd: return "psd";
  }
  return "?";
}

}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::NumericalFailure: return "numerical-failure";
    case SolveStatus::IterationLimit: return "iteration-limit";
  }
  return "?";
}

// ---------------------------------------------------------------- HermVar

CMat HermVar::basis(int p) const {
  CMat E = CMat::Zero(n, n);
  if (p < n) {
    E(p, p) = 1.0;
    return E;
  }
  const int q = p - n;
  int k = q / 2;
  int i = 0;
  while (k >= n - 1 - i) {
    k -= n - 1 - i;
    ++i;
  }
  const int j = i + 1 + k;
  if (q % 2 == 0) {
    E(i, j) = 1.0;
    E(j, i) = 1.0;
  } else {
    E(i, j) = cd(0.0, 1.0);
    E(j, i) = cd(0.0, -1.0);
  }
  return E;
}

CMat HermVar::value(const Vec& x) const {
  CMat X(n, n);
  for (int i = 0; i < n; ++i) {
    X(i, i) = x(diag(i));
    for (int j = i + 1; j < n; ++j) {
      X(i, j) = cd(x(re(i, j)), x(im(i, j)));
      X(j, i) = std::conj(X(i, j));
    }
  }
  return X;
}

LinExpr HermVar::trace() const {
  LinExpr e;
  for (int i = 0; i < n; ++i) e.add(diag(i), 1.0);
  return e;
}

LinExpr HermVar::trace_with(const CMat& C) const {
  LinExpr e;
  for (int i = 0; i < n; ++i) {
    e.add(diag(i), C(i, i).real());
    for (int j = i + 1; j < n; ++j) {
      e.add(re(i, j), 2.0 * C(j, i).real());
      e.add(im(i, j), -2.0 * C(j, i).imag());
    }
  }
  return e;
}

// ---------------------------------------------------------------- HermExpr

HermExpr::HermExpr(int n) : n_(n), constant_(CMat::Zero(n, n)) {}

void HermExpr::push(int var, int i, int j, cd v) {
  if (v == cd(0.0, 0.0)) return;
  if (i < j) {
    std::swap(i, j);
    v = std::conj(v);
  }
  terms_[var].push_back({i, j, v});
}

void HermExpr::accumulate(int var, const CMat& M, int r0, int c0, cd scale) {
  const int rows = static_cast<int>(M.rows());
  const int cols = static_cast<int>(M.cols());
  if (r0 + rows > n_ || c0 + cols > n_) throw std::out_of_range("HermExpr: block out of range");
  if (r0 == c0) {
    if (rows != cols) throw std::invalid_argument("HermExpr: diagonal block must be square");
    for (int j = 0; j < cols; ++j)
      for (int i = j; i < rows; ++i) push(var, r0 + i, c0 + j, scale * M(i, j));
    return;
  }
  const bool lower = r0 >= c0 + cols;
  const bool upper = r0 + rows <= c0;
  if (!lower && !upper) throw std::invalid_argument("HermExpr: off-diagonal block overlaps the diagonal");
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) push(var, r0 + i, c0 + j, scale * M(i, j));
}

void HermExpr::add_constant(const CMat& M, int r0, int c0) {
  const auto rows = M.rows();
  const auto cols = M.cols();
  if (r0 + rows > n_ || c0 + cols > n_) throw std::out_of_range("HermExpr: block out of range");
  constant_.block(r0, c0, rows, cols) += M;
  if (r0 != c0) constant_.block(c0, r0, cols, rows) += M.adjoint();
}

void HermExpr::add_scaled(int var, const CMat& M, int r0, int c0) { accumulate(var, M, r0, c0, 1.0); }

void HermExpr::add_scaled(const LinExpr& e, const CMat& M, int r0, int c0) {
  if (e.constant != 0.0) add_constant(e.constant * M, r0, c0);
  for (const auto& [v, c] : e.terms) accumulate(v, M, r0, c0, c);
}

void HermExpr::add_congruence(const HermVar& X, const CMat& L, double scale, int r0) {
  if (L.rows() != X.n) throw std::invalid_argument("HermExpr::add_congruence: shape mismatch");
  for (int p = 0; p < X.num_params(); ++p) {
    const CMat B = L.adjoint() * X.basis(p) * L;
    accumulate(X.offset + p, B, r0, r0, scale);
  }
}

void HermExpr::add_var_block(const HermVar& X, double scale, int r0, int c0) {
  for (int p = 0; p < X.num_params(); ++p) accumulate(X.offset + p, X.basis(p), r0, c0, scale);
}

bool HermExpr::is_real() const {
  if (constant_.imag().cwiseAbs().maxCoeff() > 0.0) return false;
  for (const auto& [v, entries] : terms_)
    for (const auto& e : entries)
      if (e.value.imag() != 0.0) return false;
  return true;
}

CMat HermExpr::value(const Vec& x) const {
  CMat L = CMat::Zero(n_, n_);
  for (const auto& [v, entries] : terms_)
    for (const auto& e : entries) L(e.i, e.j) += x(v) * e.value;
  CMat M = L + L.adjoint();
  for (int i = 0; i < n_; ++i) M(i, i) = L(i, i).real();
  return constant_ + M;
}

// ---------------------------------------------------------------- ConicProgram

int ConicProgram::add_variable(const std::string& name) {
  var_names_.push_back(name.empty() ? "x" + std::to_string(var_names_.size()) : name);
  return static_cast<int>(var_names_.size()) - 1;
}

std::vector<int> ConicProgram::add_variables(int count, const std::string& name) {
  std::vector<int> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(add_variable(name.empty() ? std::string() : name + "[" + std::to_string(i) + "]"));
  return out;
}

HermVar ConicProgram::add_hermitian(int n, bool psd, const std::string& name) {
  HermVar X;
  X.n = n;
  X.offset = num_variables();
  const std::string base = name.empty() ? "H" + std::to_string(X.offset) : name;
  for (int p = 0; p < n * n; ++p) add_variable(base + "." + std::to_string(p));
  if (psd) {
    HermExpr M(n);
    M.add_var_block(X, 1.0, 0, 0);
    add_lmi(M, base + ">=0");
  }
  return X;
}

void ConicProgram::check_expr(const LinExpr& e) const {
  for (const auto& [v, c] : e.terms) {
    if (v < 0 || v >= num_variables()) throw std::out_of_range("ConicProgram: undeclared variable " + std::to_string(v));
    if (!std::isfinite(c)) throw std::invalid_argument("ConicProgram: non-finite coefficient");
  }
  if (!std::isfinite(e.constant)) throw std::invalid_argument("ConicProgram: non-finite constant");
}

ConstraintHandle ConicProgram::add_equality(const LinExpr& e, const std::string& name) {
  check_expr(e);
  cons_.push_back({ConeKind::Zero, name, {e}, HermExpr(0)});
  return {num_constraints() - 1};
}

ConstraintHandle ConicProgram::add_nonneg(const LinExpr& e, const std::string& name) {
  check_expr(e);
  cons_.push_back({ConeKind::Nonneg, name, {e}, HermExpr(0)});
  return {num_constraints() - 1};
}

ConstraintHandle ConicProgram::add_soc(const LinExpr& t, const std::vector<LinExpr>& u, const std::string& name) {
  std::vector<LinExpr> rows;
  rows.reserve(u.size() + 1);
  rows.push_back(t);
  rows.insert(rows.end(), u.begin(), u.end());
  for (const auto& r : rows) check_expr(r);
  cons_.push_back({ConeKind::Soc, name, std::move(rows), HermExpr(0)});
  return {num_constraints() - 1};
}

ConstraintHandle ConicProgram::add_rotated_soc(const LinExpr& x, const LinExpr& y, const std::vector<LinExpr>& w,
                                               const std::string& name) {
  std::vector<LinExpr> u;
  u.reserve(w.size() + 1);
  for (const auto& wi : w) u.push_back(2.0 * wi);
  u.push_back(x - y);
  return add_soc(x + y, u, name);
}

ConstraintHandle ConicProgram::add_lmi(const HermExpr& M, const std::string& name) {
  for (const auto& [v, entries] : M.terms())
    if (v < 0 || v >= num_variables()) throw std::out_of_range("ConicProgram: LMI references undeclared variable");
  if ((M.constant() - M.constant().adjoint()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, M.constant().cwiseAbs().maxCoeff()))
    throw std::invalid_argument("ConicProgram: LMI constant is not Hermitian");
  Constraint c{ConeKind::Psd, name, {}, M};
  cons_.push_back(std::move(c));
  return {num_constraints() - 1};
}

StandardForm ConicProgram::standard_form() const {
  StandardForm sf;
  const int n = num_variables();
  sf.c = Vec::Zero(n);
  for (const auto& [v, c] : objective_.terms) sf.c(v) += c;
  sf.c0 = objective_.constant;

  using Trip = Eigen::Triplet<double>;
  std::vector<Trip> ta, tg;
  std::vector<double> bv, hv;
  sf.row_map.resize(cons_.size());

  // equality rows
  for (size_t k = 0; k < cons_.size(); ++k) {
    const auto& c = cons_[k];
    if (c.kind != ConeKind::Zero) continue;
    const int r = static_cast<int>(bv.size());
    for (const auto& [v, a] : c.rows[0].terms) ta.emplace_back(r, v, a);
    bv.push_back(-c.rows[0].constant);
    sf.row_map[k] = {ConeKind::Zero, r, 1, 0, false};
  }
  auto emit_rows = [&](size_t k, ConeKind kind) {
    const auto& c = cons_[k];
    const int r0 = static_cast<int>(hv.size());
    for (const auto& row : c.rows) {
      const int r = static_cast<int>(hv.size());
      for (const auto& [v, a] : row.terms) tg.emplace_back(r, v, -a);
      hv.push_back(row.constant);
    }
    sf.row_map[k] = {kind, r0, static_cast<int>(c.rows.size()), 0, false};
  };
  for (size_t k = 0; k < cons_.size(); ++k)
    if (cons_[k].kind == ConeKind::Nonneg) emit_rows(k, ConeKind::Nonneg);
  sf.n_nonneg = static_cast<int>(hv.size());
  for (size_t k = 0; k < cons_.size(); ++k)
    if (cons_[k].kind == ConeKind::Soc) {
      emit_rows(k, ConeKind::Soc);
      sf.soc_dims.push_back(static_cast<int>(cons_[k].rows.size()));
    }
  const double rt2 = std::sqrt(2.0);
  for (size_t k = 0; k < cons_.size(); ++k) {
    const auto& c = cons_[k];
    if (c.kind != ConeKind::Psd) continue;
    const HermExpr& M = c.lmi;
    const int m = M.size();
    const bool real = M.is_real();
    const int order = real ? m : 2 * m;
    const int r0 = static_cast<int>(hv.size());
    const int dim = order * (order + 1) / 2;
    hv.resize(hv.size() + dim, 0.0);
    // scatter one real lower entry (i >= j) of the embedded matrix
    auto put = [&](int var, int i, int j, double val) {
      if (val == 0.0) return;
      if (i < j) std::swap(i, j);
      const double s = (i == j) ? val : val * rt2;
      const int r = r0 + svec_index(order, i, j);
      if (var < 0)
        hv[r] += s;
      else
        tg.emplace_back(r, var, -s);
    };
    auto put_complex = [&](int var, int i, int j, cd v) {
      // i >= j entry of the Hermitian matrix
      if (real) {
        put(var, i, j, v.real());
        return;
      }
      put(var, i, j, v.real());
      put(var, m + i, m + j, v.real());
      if (i != j) {
        put(var, m + i, j, v.imag());
        put(var, m + j, i, -v.imag());
      }
    };
    const CMat& C = M.constant();
    for (int j = 0; j < m; ++j)
      for (int i = j; i < m; ++i) put_complex(-1, i, j, i == j ? cd(C(i, i).real(), 0.0) : C(i, j));
    for (const auto& [v, entries] : M.terms())
      for (const auto& e : entries) put_complex(v, e.i, e.j, e.i == e.j ? cd(e.value.real(), 0.0) : e.value);
    sf.psd_orders.push_back(order);
    sf.row_map[k] = {ConeKind::Psd, r0, dim, order, !real};
  }

  sf.A.resize(static_cast<int>(bv.size()), n);
  sf.A.setFromTriplets(ta.begin(), ta.end());
  sf.G.resize(static_cast<int>(hv.size()), n);
  sf.G.setFromTriplets(tg.begin(), tg.end());
  sf.b = Eigen::Map<Vec>(bv.data(), static_cast<Eigen::Index>(bv.size()));
  sf.h = Eigen::Map<Vec>(hv.data(), static_cast<Eigen::Index>(hv.size()));
  return sf;
}

double ConicProgram::max_violation(const Vec& x) const {
  double worst = 0.0;
  for (const auto& c : cons_) {
    switch (c.kind) {
      case ConeKind::Zero: worst = std::max(worst, std::abs(c.rows[0].eval(x))); break;
      case ConeKind::Nonneg: worst = std::max(worst, -c.rows[0].eval(x)); break;
      case ConeKind::Soc: {
        double nrm = 0.0;
        for (size_t i = 1; i < c.rows.size(); ++i) nrm += std::pow(c.rows[i].eval(x), 2);
        worst = std::max(worst, std::sqrt(nrm) - c.rows[0].eval(x));
        break;
      }
      case ConeKind::Psd: worst = std::max(worst, psd_residual(c.lmi.value(x))); break;
    }
  }
  return worst;
}

void ConicProgram::dump(std::ostream& os) const {
  os << "# conic program\n";
  os << "variables " << num_variables() << "\n";
  for (int i = 0; i < num_variables(); ++i) os << "  v " << i << " " << var_names_[i] << "\n";
  os << "objective minimize const " << objective_.constant << "\n";
  for (const auto& [v, c] : objective_.terms) os << "  c " << v << " " << c << "\n";
  os << "constraints " << cons_.size() << "\n";
  for (size_t k = 0; k < cons_.size(); ++k) {
    const auto& c = cons_[k];
    os << "cone " << k << " " << kind_name(c.kind) << " " << (c.name.empty() ? "-" : c.name);
    if (c.kind == ConeKind::Psd) {
      const auto& M = c.lmi;
      os << " order " << M.size() << (M.is_real() ? " real" : " hermitian") << "\n";
      for (int j = 0; j < M.size(); ++j)
        for (int i = j; i < M.size(); ++i)
          if (M.constant()(i, j) != cd(0.0, 0.0))
            os << "  k " << i << " " << j << " " << M.constant()(i, j).real() << " " << M.constant()(i, j).imag() << "\n";
      for (const auto& [v, entries] : M.terms())
        for (const auto& e : entries) os << "  e " << v << " " << e.i << " " << e.j << " " << e.value.real() << " " << e.value.imag() << "\n";
    } else {
      os << " rows " << c.rows.size() << "\n";
      for (size_t r = 0; r < c.rows.size(); ++r) {
        os << "  r " << r << " const " << c.rows[r].constant;
        for (const auto& [v, a] : c.rows[r].terms) os << " " << v << ":" << a;
        os << "\n";
      }
    }
  }
}

}  // namespace isac
