// Dense primal-dual interior-point method on the homogeneous self-dual
// embedding with Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
//
//   minimize c'x  s.t.  A x = b,  G x + s = h,  s in K
//
// K is a product of a nonnegative orthant, second-order cones and PSD cones
// (svec storage, lower triangle, off-diagonals scaled by sqrt(2)).

#include "isac/conic.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

namespace isac {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline int svec_index(int order, int i, int j) { return j * order - j * (j - 1) / 2 + (i - j); }

Mat smat(const Eigen::Ref<const Vec>& v, int n) {
  Mat M(n, n);
  const double inv = 1.0 / std::sqrt(2.0);
  for (int j = 0; j < n; ++j) {
    M(j, j) = v(svec_index(n, j, j));
    for (int i = j + 1; i < n; ++i) M(i, j) = M(j, i) = v(svec_index(n, i, j)) * inv;
  }
  return M;
}

void svec_into(const Mat& M, int n, Eigen::Ref<Vec> out) {
  const double rt2 = std::sqrt(2.0);
  for (int j = 0; j < n; ++j) {
    out(svec_index(n, j, j)) = M(j, j);
    for (int i = j + 1; i < n; ++i) out(svec_index(n, i, j)) = 0.5 * (M(i, j) + M(j, i)) * rt2;
  }
}

struct Cone {
  Cone(ConeKind k, int o, int d, int ord) : kind(k), off(o), dim(d), order(ord) {}
  ConeKind kind;
  int off;
  int dim;
  int order;  // PSD only
  std::vector<int> cols;
  Mat Gk;   // dense block over touched columns
  Mat GtG;  // SOC only
  // scaling state
  double beta = 1.0;
  Vec v;           // SOC
  Mat r, rinv;     // PSD
  Vec lam_diag;    // PSD eigen-like values
};

class Ipm {
 public:
  Ipm(const StandardForm& sf, const SolverOptions& opt) : sf_(sf), opt_(opt) {}
  Solution run();

 private:
  void equilibrate();
  void build_cones();
  bool compute_scaling(const Vec& s, const Vec& z);
  void identity_scaling();
  bool factor();
  void kkt_solve(const Vec& p1, const Vec& p2, const Vec& p3, Vec& x, Vec& y, Vec& z) const;

  // per-cone vector operations on full-length vectors (length m)
  Vec apply_W(const Vec& u) const;
  Vec apply_WT(const Vec& u) const;
  Vec apply_WinvT(const Vec& u) const;
  Vec apply_Winv(const Vec& u) const;
  Vec apply_Winv2(const Vec& u) const;
  Vec jordan_prod(const Vec& u, const Vec& w) const;
  Vec jordan_div(const Vec& lam, const Vec& d) const;
  Vec identity() const;
  double max_step(const Vec& lam, const Vec& d) const;
  double min_eig(const Vec& s) const;

  const StandardForm& sf_;
  SolverOptions opt_;

  int n_ = 0, p_ = 0, m_ = 0;
  Eigen::SparseMatrix<double> A_, G_, Glp_;
  Vec c_, b_, h_;
  Vec colscale_, rowA_, rowG_;
  std::vector<Cone> cones_;
  Vec lp_d_;  // z/s for the orthant
  Vec lp_w_;  // sqrt(s/z)
  Vec lam_;
  int degree_ = 0;

  Mat H_;
  Eigen::LLT<Mat> llt_H_;
  Eigen::LLT<Mat> llt_S_;
  Mat HinvAt_;
  double reg_ = 0.0;
};

// ------------------------------------------------------------------ setup

void Ipm::equilibrate() {
  colscale_ = Vec::Ones(n_);
  rowA_ = Vec::Ones(p_);
  rowG_ = Vec::Ones(m_);
  if (!opt_.equilibrate) return;
  // group id per G row: orthant rows are their own group, cone rows share one
  std::vector<int> group(m_);
  int ng = 0;
  for (int i = 0; i < sf_.n_nonneg; ++i) group[i] = ng++;
  int off = sf_.n_nonneg;
  for (int d : sf_.soc_dims) {
    for (int i = 0; i < d; ++i) group[off + i] = ng;
    ++ng;
    off += d;
  }
  for (int o : sf_.psd_orders) {
    const int d = o * (o + 1) / 2;
    for (int i = 0; i < d; ++i) group[off + i] = ng;
    ++ng;
    off += d;
  }
  Vec gscale = Vec::Ones(ng);
  for (int it = 0; it < 12; ++it) {
    Vec cmax = Vec::Zero(n_), amax = Vec::Zero(p_), gmax = Vec::Zero(ng);
    for (int k = 0; k < A_.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator itA(A_, k); itA; ++itA) {
        const double a = std::abs(itA.value() * rowA_(itA.row()) * colscale_(k));
        cmax(k) = std::max(cmax(k), a);
        amax(itA.row()) = std::max(amax(itA.row()), a);
      }
    for (int k = 0; k < G_.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator itG(G_, k); itG; ++itG) {
        const double a = std::abs(itG.value() * gscale(group[itG.row()]) * colscale_(k));
        cmax(k) = std::max(cmax(k), a);
        gmax(group[itG.row()]) = std::max(gmax(group[itG.row()]), a);
      }
    double change = 0.0;
    for (int j = 0; j < n_; ++j)
      if (cmax(j) > 0) {
        colscale_(j) /= std::sqrt(cmax(j));
        change = std::max(change, std::abs(1.0 - cmax(j)));
      }
    for (int i = 0; i < p_; ++i)
      if (amax(i) > 0) {
        rowA_(i) /= std::sqrt(amax(i));
        change = std::max(change, std::abs(1.0 - amax(i)));
      }
    for (int g = 0; g < ng; ++g)
      if (gmax(g) > 0) {
        gscale(g) /= std::sqrt(gmax(g));
        change = std::max(change, std::abs(1.0 - gmax(g)));
      }
    if (change < 1e-2) break;
  }
  for (int i = 0; i < m_; ++i) rowG_(i) = gscale(group[i]);
}

void Ipm::build_cones() {
  int off = 0;
  cones_.clear();
  if (sf_.n_nonneg > 0) {
    cones_.emplace_back(ConeKind::Nonneg, 0, sf_.n_nonneg, 0);
    off = sf_.n_nonneg;
  }
  for (int d : sf_.soc_dims) {
    cones_.emplace_back(ConeKind::Soc, off, d, 0);
    off += d;
  }
  for (int o : sf_.psd_orders) {
    const int d = o * (o + 1) / 2;
    cones_.emplace_back(ConeKind::Psd, off, d, o);
    off += d;
  }
  degree_ = sf_.n_nonneg + static_cast<int>(sf_.soc_dims.size());
  for (int o : sf_.psd_orders) degree_ += o;

  // row -> cone
  std::vector<int> owner(m_, -1);
  for (size_t k = 0; k < cones_.size(); ++k)
    if (cones_[k].kind != ConeKind::Nonneg)
      for (int i = 0; i < cones_[k].dim; ++i) owner[cones_[k].off + i] = static_cast<int>(k);
  std::vector<std::vector<int>> cols(cones_.size());
  for (int j = 0; j < G_.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(G_, j); it; ++it) {
      const int k = owner[it.row()];
      if (k >= 0 && (cols[k].empty() || cols[k].back() != j)) cols[k].push_back(j);
    }
  for (size_t k = 0; k < cones_.size(); ++k) {
    Cone& c = cones_[k];
    if (c.kind == ConeKind::Nonneg) continue;
    c.cols = cols[k];
    c.Gk = Mat::Zero(c.dim, static_cast<int>(c.cols.size()));
    for (size_t q = 0; q < c.cols.size(); ++q)
      for (Eigen::SparseMatrix<double>::InnerIterator it(G_, c.cols[q]); it; ++it)
        if (owner[it.row()] == static_cast<int>(k)) c.Gk(it.row() - c.off, static_cast<int>(q)) = it.value();
    if (c.kind == ConeKind::Soc) c.GtG = c.Gk.transpose() * c.Gk;
  }
  if (sf_.n_nonneg > 0) Glp_ = G_.topRows(sf_.n_nonneg);
}

// ------------------------------------------------------------------ cone algebra

Vec Ipm::identity() const {
  Vec e = Vec::Zero(m_);
  for (const auto& c : cones_) {
    switch (c.kind) {
      case ConeKind::Nonneg: e.segment(c.off, c.dim).setOnes(); break;
      case ConeKind::Soc: e(c.off) = 1.0; break;
      case ConeKind::Psd:
        for (int i = 0; i < c.order; ++i) e(c.off + svec_index(c.order, i, i)) = 1.0;
        break;
      default: break;
    }
  }
  return e;
}

Vec Ipm::jordan_prod(const Vec& u, const Vec& w) const {
  Vec out(m_);
  for (const auto& c : cones_) {
    auto us = u.segment(c.off, c.dim);
    auto ws = w.segment(c.off, c.dim);
    switch (c.kind) {
      case ConeKind::Nonneg: out.segment(c.off, c.dim) = us.cwiseProduct(ws); break;
      case ConeKind::Soc:
        out(c.off) = us.dot(ws);
        out.segment(c.off + 1, c.dim - 1) = us(0) * ws.tail(c.dim - 1) + ws(0) * us.tail(c.dim - 1);
        break;
      case ConeKind::Psd: {
        const Mat U = smat(us, c.order), W = smat(ws, c.order);
        const Mat P = 0.5 * (U * W + W * U);
        svec_into(P, c.order, out.segment(c.off, c.dim));
        break;
      }
      default: break;
    }
  }
  return out;
}

// solves lam o u = d for u; lam is the (scaled) NT point
Vec Ipm::jordan_div(const Vec& lam, const Vec& d) const {
  Vec out(m_);
  for (const auto& c : cones_) {
    auto ls = lam.segment(c.off, c.dim);
    auto ds = d.segment(c.off, c.dim);
    switch (c.kind) {
      case ConeKind::Nonneg: out.segment(c.off, c.dim) = ds.cwiseQuotient(ls); break;
      case ConeKind::Soc: {
        const double l0 = ls(0);
        const auto l1 = ls.tail(c.dim - 1);
        const double det = l0 * l0 - l1.squaredNorm();
        const double u0 = (l0 * ds(0) - l1.dot(ds.tail(c.dim - 1))) / det;
        out(c.off) = u0;
        out.segment(c.off + 1, c.dim - 1) = (ds.tail(c.dim - 1) - u0 * l1) / l0;
        break;
      }
      case ConeKind::Psd: {
        for (int j = 0; j < c.order; ++j)
          for (int i = j; i < c.order; ++i) {
            const int idx = svec_index(c.order, i, j);
            out(c.off + idx) = ds(idx) * 2.0 / (c.lam_diag(i) + c.lam_diag(j));
          }
        break;
      }
      default: break;
    }
  }
  return out;
}

double Ipm::max_step(const Vec& lam, const Vec& d) const {
  double alpha = kInf;
  for (const auto& c : cones_) {
    auto ls = lam.segment(c.off, c.dim);
    auto ds = d.segment(c.off, c.dim);
    switch (c.kind) {
      case ConeKind::Nonneg:
        for (int i = 0; i < c.dim; ++i)
          if (ds(i) < 0) alpha = std::min(alpha, -ls(i) / ds(i));
        break;
      case ConeKind::Soc: {
        const double l0 = ls(0), d0 = ds(0);
        const auto l1 = ls.tail(c.dim - 1);
        const auto d1 = ds.tail(c.dim - 1);
        const double a = d0 * d0 - d1.squaredNorm();
        const double bq = l0 * d0 - l1.dot(d1);
        const double cq = std::max(l0 * l0 - l1.squaredNorm(), 0.0);
        double t = kInf;
        if (std::abs(a) < 1e-300) {
          if (bq < 0) t = -cq / (2 * bq);
        } else {
          const double disc = bq * bq - a * cq;
          if (a < 0) {
            t = (-bq - std::sqrt(std::max(disc, 0.0))) / a;
          } else if (bq < 0 && disc >= 0) {
            // smaller positive root, computed stably
            t = cq / (-bq + std::sqrt(disc));
          }
        }
        if (d0 < 0) t = std::min(t, -l0 / d0);
        alpha = std::min(alpha, std::max(t, 0.0));
        break;
      }
      case ConeKind::Psd: {
        const Mat D = smat(ds, c.order);
        const Vec is = c.lam_diag.cwiseSqrt().cwiseInverse();
        const Mat M = is.asDiagonal() * D * is.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
        const double mn = es.eigenvalues()(0);
        if (mn < 0) alpha = std::min(alpha, -1.0 / mn);
        break;
      }
      default: break;
    }
  }
  return alpha;
}

double Ipm::min_eig(const Vec& s) const {
  double mn = kInf;
  for (const auto& c : cones_) {
    auto ss = s.segment(c.off, c.dim);
    switch (c.kind) {
      case ConeKind::Nonneg: mn = std::min(mn, ss.minCoeff()); break;
      case ConeKind::Soc: mn = std::min(mn, ss(0) - ss.tail(c.dim - 1).norm()); break;
      case ConeKind::Psd: {
        Eigen::SelfAdjointEigenSolver<Mat> es(smat(ss, c.order), Eigen::EigenvaluesOnly);
        mn = std::min(mn, es.eigenvalues()(0));
        break;
      }
      default: break;
    }
  }
  return mn;
}

void Ipm::identity_scaling() {
  lp_w_ = Vec::Ones(sf_.n_nonneg);
  lp_d_ = Vec::Ones(sf_.n_nonneg);
  for (auto& c : cones_) {
    if (c.kind == ConeKind::Soc) {
      c.beta = 1.0;
      c.v = Vec::Zero(c.dim);
      c.v(0) = 1.0;
    } else if (c.kind == ConeKind::Psd) {
      c.r = Mat::Identity(c.order, c.order);
      c.rinv = c.r;
      c.lam_diag = Vec::Ones(c.order);
    }
  }
}

// ------------------------------------------------------------------ scaling ops

Vec Ipm::apply_W(const Vec& u) const {
  Vec out(m_);
  for (const auto& c : cones_) {
    auto us = u.segment(c.off, c.dim);
    auto os = out.segment(c.off, c.dim);
    switch (c.kind) {
      case ConeKind::Nonneg: os = lp_w_.cwiseProduct(us); break;
      case ConeKind::Soc: {
        Vec Ju = us;
        Ju.tail(c.dim - 1) *= -1.0;
        os = c.beta * (2.0 * c.v * c.v.dot(us) - Ju);
        break;
      }
      case ConeKind::Psd: {
        const Mat U = smat(us, c.order);
        svec_into(c.r.transpose() * U * c.r, c.order, os);
        break;
      }
      default: break;
    }
  }
  return out;
}

Vec Ipm::apply_WT(const Vec& u) const {
  // orthant and SOC scalings are symmetric
  Vec out = apply_W(u);
  for (const auto& c : cones_) {
    if (c.kind != ConeKind::Psd) continue;
    const Mat U = smat(u.segment(c.off, c.dim), c.order);
    svec_into(c.r * U * c.r.transpose(), c.order, out.segment(c.off, c.dim));
  }
  return out;
}

Vec Ipm::apply_Winv(const Vec& u) const {
  Vec out(m_);
  for (const auto& c : cones_) {
    auto us = u.segment(c.off, c.dim);
    auto os = out.segment(c.off, c.dim);
    switch (c.kind) {
      case ConeKind::Nonneg: os = us.cwiseQuotient(lp_w_); break;
      case ConeKind::Soc: {
        Vec Jv = c.v;
        Jv.tail(c.dim - 1) *= -1.0;
        Vec Ju = us;
        Ju.tail(c.dim - 1) *= -1.0;
        os = (2.0 * Jv * Jv.dot(us) - Ju) / c.beta;
        break;
      }
      case ConeKind::Psd: {
        const Mat U = smat(us, c.order);
        svec_into(c.rinv.transpose() * U * c.rinv, c.order, os);
        break;
      }
      default: break;
    }
  }
  return out;
}

Vec Ipm::apply_WinvT(const Vec& u) const {
  Vec out = apply_Winv(u);
  for (const auto& c : cones_) {
    if (c.kind != ConeKind::Psd) continue;
    const Mat U = smat(u.segment(c.off, c.dim), c.order);
    svec_into(c.rinv * U * c.rinv.transpose(), c.order, out.segment(c.off, c.dim));
  }
  return out;
}

Vec Ipm::apply_Winv2(const Vec& u) const { return apply_Winv(apply_WinvT(u)); }


// ------------------------------------------------------------------ NT scaling

bool Ipm::compute_scaling(const Vec& s, const Vec& z) {
  if (sf_.n_nonneg > 0) {
    const auto ss = s.head(sf_.n_nonneg);
    const auto zz = z.head(sf_.n_nonneg);
    if ((ss.array() <= 0).any() || (zz.array() <= 0).any()) return false;
    lp_w_ = ss.cwiseQuotient(zz).cwiseSqrt();
    lp_d_ = zz.cwiseQuotient(ss);
  }
  for (auto& c : cones_) {
    auto ss = s.segment(c.off, c.dim);
    auto zs = z.segment(c.off, c.dim);
    if (c.kind == ConeKind::Soc) {
      const double sj = ss(0) * ss(0) - ss.tail(c.dim - 1).squaredNorm();
      const double zj = zs(0) * zs(0) - zs.tail(c.dim - 1).squaredNorm();
      if (!(sj > 0) || !(zj > 0) || ss(0) <= 0 || zs(0) <= 0) return false;
      const Vec sb = ss / std::sqrt(sj);
      const Vec zb = zs / std::sqrt(zj);
      const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
      Vec Jz = zb;
      Jz.tail(c.dim - 1) *= -1.0;
      const Vec wb = (sb + Jz) / (2.0 * gamma);
      c.v = wb;
      c.v(0) += 1.0;
      c.v /= std::sqrt(2.0 * (wb(0) + 1.0));
      c.beta = std::pow(sj / zj, 0.25);
    } else if (c.kind == ConeKind::Psd) {
      const Mat S = smat(ss, c.order), Z = smat(zs, c.order);
      Eigen::LLT<Mat> ls(S), lz(Z);
      if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
      const Mat Ls = ls.matrixL();
      const Mat Lz = lz.matrixL();
      Eigen::JacobiSVD<Mat> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const Vec lam = svd.singularValues();
      if (!(lam.minCoeff() > 0)) return false;
      const Vec isq = lam.cwiseSqrt().cwiseInverse();
      c.r = Ls * svd.matrixV() * isq.asDiagonal();
      // r^{-1} = diag(sqrt(lam)) V' Ls^{-1}
      const Mat LsInv = Ls.triangularView<Eigen::Lower>().solve(Mat::Identity(c.order, c.order));
      c.rinv = lam.cwiseSqrt().asDiagonal() * svd.matrixV().transpose() * LsInv;
      c.lam_diag = lam;
    }
  }
  lam_ = apply_W(z);
  for (const auto& c : cones_) {
    if (c.kind != ConeKind::Psd) continue;
    auto ls = lam_.segment(c.off, c.dim);
    ls.setZero();
    for (int i = 0; i < c.order; ++i) ls(svec_index(c.order, i, i)) = c.lam_diag(i);
  }
  return true;
}

// ------------------------------------------------------------------ KKT system

bool Ipm::factor() {
  H_ = Mat::Zero(n_, n_);
  if (sf_.n_nonneg > 0) {
    const Vec sq = lp_d_.cwiseSqrt();
    const Eigen::SparseMatrix<double> Gw = sq.asDiagonal() * Glp_;
    H_ += Mat(Gw.transpose() * Gw);
  }
  for (const auto& c : cones_) {
    if (c.kind == ConeKind::Nonneg || c.cols.empty()) continue;
    Mat Hk;
    if (c.kind == ConeKind::Soc) {
      Vec Jv = c.v;
      Jv.tail(c.dim - 1) *= -1.0;
      const Vec g = c.Gk.transpose() * Jv;
      const Vec hv = c.Gk.transpose() * c.v;
      Hk = (c.GtG + 4.0 * c.v.squaredNorm() * g * g.transpose() - 2.0 * (g * hv.transpose() + hv * g.transpose())) /
           (c.beta * c.beta);
    } else {
      Mat Gh(c.dim, static_cast<int>(c.cols.size()));
      for (int q = 0; q < static_cast<int>(c.cols.size()); ++q) {
        const Mat U = smat(c.Gk.col(q), c.order);
        svec_into(c.rinv * U * c.rinv.transpose(), c.order, Gh.col(q));
      }
      Hk = Gh.transpose() * Gh;
    }
    for (size_t a = 0; a < c.cols.size(); ++a)
      for (size_t bb = 0; bb < c.cols.size(); ++bb) H_(c.cols[a], c.cols[bb]) += Hk(a, bb);
  }
  const double dmax = std::max(1.0, H_.diagonal().cwiseAbs().maxCoeff());
  reg_ = 1e-13 * dmax;
  Mat Hr = H_;
  Hr.diagonal().array() += reg_;
  llt_H_.compute(Hr);
  if (llt_H_.info() != Eigen::Success) {
    reg_ = 1e-9 * dmax;
    Hr = H_;
    Hr.diagonal().array() += reg_;
    llt_H_.compute(Hr);
    if (llt_H_.info() != Eigen::Success) return false;
  }
  if (p_ > 0) {
    const Mat At = Mat(A_.transpose());
    HinvAt_ = llt_H_.solve(At);
    Mat S = Mat(A_ * HinvAt_);
    S.diagonal().array() += 1e-13 * std::max(1.0, S.diagonal().cwiseAbs().maxCoeff());
    llt_S_.compute(S);
    if (llt_S_.info() != Eigen::Success) return false;
  }
  return true;
}

void Ipm::kkt_solve(const Vec& p1, const Vec& p2, const Vec& p3, Vec& x, Vec& y, Vec& z) const {
  // reduced solve of  A'y + G'z = p1,  A x = p2,  G x - W'W z = p3
  auto reduced = [&](const Vec& r1, const Vec& r2, const Vec& r3, Vec& xo, Vec& yo, Vec& zo) {
    const Vec rx = r1 + G_.transpose() * apply_Winv2(r3);
    if (p_ == 0) {
      xo = llt_H_.solve(rx);
      yo = Vec::Zero(0);
    } else {
      const Vec t = llt_H_.solve(rx);
      yo = llt_S_.solve(A_ * t - r2);
      xo = t - HinvAt_ * yo;
    }
    zo = apply_Winv2(G_ * xo - r3);
  };
  reduced(p1, p2, p3, x, y, z);
  // refinement against the unreduced system
  auto residual = [&](const Vec& xx, const Vec& yy, const Vec& zz, Vec& e1, Vec& e2, Vec& e3) {
    e1 = p1 - G_.transpose() * zz;
    if (p_ > 0) {
      e1 -= A_.transpose() * yy;
      e2 = p2 - A_ * xx;
    } else {
      e2 = Vec::Zero(0);
    }
    e3 = p3 - G_ * xx + apply_WT(apply_W(zz));
    return std::max({e1.cwiseAbs().maxCoeff(), p_ > 0 ? e2.cwiseAbs().maxCoeff() : 0.0, e3.cwiseAbs().maxCoeff()});
  };
  const double scale = std::max({1.0, p1.cwiseAbs().maxCoeff(), p_ > 0 ? p2.cwiseAbs().maxCoeff() : 0.0,
                                 p3.size() ? p3.cwiseAbs().maxCoeff() : 0.0});
  Vec e1, e2, e3;
  double err = residual(x, y, z, e1, e2, e3);
  for (int it = 0; it < 5 && err > 1e-15 * scale; ++it) {
    Vec dx, dy, dz;
    reduced(e1, e2, e3, dx, dy, dz);
    const Vec xn = x + dx, yn = p_ > 0 ? Vec(y + dy) : y, zn = z + dz;
    Vec f1, f2, f3;
    const double en = residual(xn, yn, zn, f1, f2, f3);
    if (!(en < err)) break;
    x = xn;
    y = yn;
    z = zn;
    e1 = f1;
    e2 = f2;
    e3 = f3;
    err = en;
  }
}

// ------------------------------------------------------------------ main loop

Solution Ipm::run() {
  const auto t_start = std::chrono::steady_clock::now();
  Solution sol;
  n_ = static_cast<int>(sf_.c.size());
  p_ = static_cast<int>(sf_.A.rows());
  m_ = static_cast<int>(sf_.G.rows());
  // best iterate seen so far, used when the last iterations lose accuracy
  struct Best {
    bool valid = false;
    double score = 0.0, pres = 0.0, dres = 0.0, gap = 0.0, obj = 0.0;
    Vec x, y, z;
  } best;
  auto finish = [&](SolveStatus st) {
    if ((st == SolveStatus::NumericalFailure || st == SolveStatus::IterationLimit) && best.valid &&
        best.pres <= 10.0 * opt_.tol && best.score <= 100.0 * opt_.tol) {
      st = SolveStatus::Optimal;
      sol.inaccurate = true;
      sol.x = best.x;
      sol.objective = best.obj;
      sol.primal_residual = best.pres;
      sol.dual_residual = best.dres;
      sol.gap = best.gap;
      sol.duals.resize(sf_.row_map.size());
      for (size_t k = 0; k < sf_.row_map.size(); ++k) {
        const auto& rm = sf_.row_map[k];
        sol.duals[k] = rm.kind == ConeKind::Zero ? Vec(best.y.segment(rm.offset, rm.rows))
                                                 : Vec(best.z.segment(rm.offset, rm.rows));
      }
    }
    sol.status = st;
    sol.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return sol;
  };
  if (m_ == 0) return finish(SolveStatus::NumericalFailure);

  A_ = sf_.A;
  G_ = sf_.G;
  equilibrate();
  A_ = rowA_.asDiagonal() * sf_.A * colscale_.asDiagonal();
  G_ = rowG_.asDiagonal() * sf_.G * colscale_.asDiagonal();
  A_.makeCompressed();
  G_.makeCompressed();
  c_ = colscale_.cwiseProduct(sf_.c);
  b_ = rowA_.cwiseProduct(sf_.b);
  h_ = rowG_.cwiseProduct(sf_.h);
  build_cones();

  const double nb = std::max(1.0, sf_.b.norm());
  const double nh = std::max(1.0, sf_.h.norm());
  const double nc = std::max(1.0, sf_.c.norm());

  // starting point
  identity_scaling();
  if (!factor()) return finish(SolveStatus::NumericalFailure);
  Vec x, y, z, s, tmpx, tmpy;
  kkt_solve(Vec::Zero(n_), b_, h_, x, y, z);
  s = -z;
  kkt_solve(-c_, Vec::Zero(p_), Vec::Zero(m_), tmpx, y, z);
  const Vec e = identity();
  {
    const double as = -min_eig(s);
    if (as >= -1e-8) s += (1.0 + std::max(as, 0.0)) * e;
    const double az = -min_eig(z);
    if (az >= -1e-8) z += (1.0 + std::max(az, 0.0)) * e;
  }
  double tau = 1.0, kappa = 1.0;

  for (int iter = 0; iter <= opt_.max_iterations; ++iter) {
    sol.iterations = iter;
    // residuals of the embedding (scaled space)
    const Vec rx = (p_ > 0 ? Vec(A_.transpose() * y) : Vec::Zero(n_)) + G_.transpose() * z + c_ * tau;
    const Vec ry = p_ > 0 ? Vec(A_ * x - b_ * tau) : Vec::Zero(0);
    const Vec rz = s + G_ * x - h_ * tau;
    const double cx = c_.dot(x), by = p_ > 0 ? b_.dot(y) : 0.0, hz = h_.dot(z);
    const double rt = kappa + cx + by + hz;

    // convergence tests on unscaled quantities
    const Vec xu = colscale_.cwiseProduct(x) / tau;
    const Vec su = s.cwiseQuotient(rowG_) / tau;
    const Vec zu = rowG_.cwiseProduct(z) / tau;
    const Vec yu = rowA_.cwiseProduct(y) / tau;
    const double pres = std::max(p_ > 0 ? (sf_.A * xu - sf_.b).norm() / nb : 0.0, (sf_.G * xu + su - sf_.h).norm() / nh);
    const Vec dual_lin = (p_ > 0 ? Vec(sf_.A.transpose() * yu) : Vec::Zero(n_)) + sf_.G.transpose() * zu;
    const double dres = (dual_lin + sf_.c).norm() / nc;
    const double pcost = sf_.c.dot(xu);
    const double dcost = -(p_ > 0 ? sf_.b.dot(yu) : 0.0) - sf_.h.dot(zu);
    const double gap = su.dot(zu);
    sol.primal_residual = pres;
    sol.dual_residual = dres;
    sol.gap = gap;
    if (opt_.verbose)
      std::fprintf(stderr, "%3d pcost % .6e dcost % .6e gap %.2e pres %.2e dres %.2e tau %.2e kap %.2e\n", iter, pcost,
                   dcost, gap, pres, dres, tau, kappa);
    if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(gap)) return finish(SolveStatus::NumericalFailure);
    {
      const double relgap = std::abs(gap) / std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));
      const double score = std::max({pres, dres, relgap});
      if (!best.valid || score < best.score) {
        best.valid = true;
        best.score = score;
        best.pres = pres;
        best.dres = dres;
        best.gap = gap;
        best.obj = pcost + sf_.c0;
        best.x = xu;
        best.y = yu;
        best.z = zu;
      }
    }
    if (pres <= opt_.tol && dres <= opt_.tol &&
        std::abs(gap) <= opt_.tol * std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)))) {
      sol.x = xu;
      sol.objective = pcost + sf_.c0;
      sol.duals.resize(sf_.row_map.size());
      for (size_t k = 0; k < sf_.row_map.size(); ++k) {
        const auto& rm = sf_.row_map[k];
        sol.duals[k] = rm.kind == ConeKind::Zero ? Vec(yu.segment(rm.offset, rm.rows)) : Vec(zu.segment(rm.offset, rm.rows));
      }
      return finish(SolveStatus::Optimal);
    }
    // infeasibility certificates (unnormalised iterates)
    {
      const double byhz = (p_ > 0 ? sf_.b.dot(rowA_.cwiseProduct(y)) : 0.0) + sf_.h.dot(rowG_.cwiseProduct(z));
      if (byhz < 0) {
        const Vec yy = rowA_.cwiseProduct(y), zz = rowG_.cwiseProduct(z);
        const Vec lin = (p_ > 0 ? Vec(sf_.A.transpose() * yy) : Vec::Zero(n_)) + sf_.G.transpose() * zz;
        if (lin.norm() / nc <= opt_.tol * (-byhz) / nc && kappa > tau * 1e-3) return finish(SolveStatus::Infeasible);
      }
      const double cxu = sf_.c.dot(colscale_.cwiseProduct(x));
      if (cxu < 0) {
        const Vec xx = colscale_.cwiseProduct(x);
        const double r1 = p_ > 0 ? (sf_.A * xx).norm() : 0.0;
        const double r2 = (sf_.G * xx + s.cwiseQuotient(rowG_)).norm();
        if (std::max(r1, r2) <= opt_.tol * (-cxu) && kappa > tau * 1e-3) return finish(SolveStatus::Unbounded);
      }
    }
    if (iter == opt_.max_iterations) break;

    if (!compute_scaling(s, z)) return finish(SolveStatus::NumericalFailure);
    if (!factor()) return finish(SolveStatus::NumericalFailure);
    Vec x1, y1, z1;
    kkt_solve(-c_, b_, h_, x1, y1, z1);
    const double denom = c_.dot(x1) + (p_ > 0 ? b_.dot(y1) : 0.0) + h_.dot(z1) - kappa / tau;

    struct Dir {
      Vec x, y, z, st, zt;
      double tau, kappa;
    };
    auto newton = [&](double eta, const Vec& ds, double dk) {
      Dir d;
      const Vec r3 = -eta * rz - apply_WT(jordan_div(lam_, ds));
      Vec x2, y2, z2;
      kkt_solve(-eta * rx, -eta * ry, r3, x2, y2, z2);
      const double num = -eta * rt - dk / tau - (c_.dot(x2) + (p_ > 0 ? b_.dot(y2) : 0.0) + h_.dot(z2));
      d.tau = num / denom;
      d.x = x2 + d.tau * x1;
      d.y = p_ > 0 ? Vec(y2 + d.tau * y1) : Vec::Zero(0);
      d.z = z2 + d.tau * z1;
      d.zt = apply_W(d.z);
      d.st = jordan_div(lam_, ds) - d.zt;
      d.kappa = (dk - kappa * d.tau) / tau;
      return d;
    };
    auto step_len = [&](const Dir& d) {
      double a = std::min(max_step(lam_, d.st), max_step(lam_, d.zt));
      if (d.tau < 0) a = std::min(a, -tau / d.tau);
      if (d.kappa < 0) a = std::min(a, -kappa / d.kappa);
      return a;
    };

    const double mu = (s.dot(z) + tau * kappa) / (degree_ + 1);
    const Vec ll = jordan_prod(lam_, lam_);
    Dir aff = newton(1.0, -ll, -tau * kappa);
    const double a_aff = std::min(1.0, step_len(aff));
    const double sigma = std::clamp(std::pow(1.0 - a_aff, 3), 0.0, 1.0);
    const Vec ds = -ll - jordan_prod(aff.st, aff.zt) + sigma * mu * e;
    const double dk = -tau * kappa - aff.tau * aff.kappa + sigma * mu;
    Dir d = newton(1.0 - sigma, ds, dk);
    const double amax = step_len(d);
    const double alpha = std::min(1.0, 0.99 * amax);
    if (!(alpha > 1e-13)) return finish(SolveStatus::NumericalFailure);

    x += alpha * d.x;
    if (p_ > 0) y += alpha * d.y;
    z += alpha * d.z;
    s += alpha * apply_WT(d.st);
    tau += alpha * d.tau;
    kappa += alpha * d.kappa;
    if (!(tau > 0) || !(kappa > 0)) return finish(SolveStatus::NumericalFailure);
  }
  return finish(SolveStatus::IterationLimit);
}

}  // namespace

Solution solve_standard(const StandardForm& sf, const SolverOptions& opt) {
  Ipm ipm(sf, opt);
  return ipm.run();
}

Solution solve(const ConicProgram& p, const SolverOptions& opt) {
  const StandardForm sf = p.standard_form();
  return solve_standard(sf, opt);
}

}  // namespace isac
