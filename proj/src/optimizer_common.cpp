#include "isac/optimizer.hpp"

#include <cmath>
#include <numbers>

namespace isac {

double SnapshotDecision::power() const {
  double p = R.size() ? R.trace().real() : 0.0;
  for (const auto& w : W) p += w.trace().real();
  return p;
}

CMat SnapshotDecision::Rx() const {
  CMat X = R;
  for (const auto& w : W) X += w;
  return X;
}

double average_power(const Decisions& d, double T_tot) {
  if (!(T_tot > 0)) throw std::invalid_argument("average_power: T_tot must be positive");
  double s = 0.0;
  for (const auto& q : d) s += q.t * q.power();
  return s / T_tot;
}

LinExpr rate_row(const std::vector<int>& xi_vars, const Vec& t, double r_min, double T_tot) {
  if (static_cast<Eigen::Index>(xi_vars.size()) != t.size()) throw std::invalid_argument("rate_row: size mismatch");
  LinExpr e(-r_min);
  for (size_t q = 0; q < xi_vars.size(); ++q) e.add(xi_vars[q], t(static_cast<Eigen::Index>(q)) / T_tot);
  return e;
}

LinExpr c10a_tangent(int xi_var, int lambda_var, double xi0) {
  // 2^xi - 1 >= 2^xi0 - 1 + ln2 2^xi0 (xi - xi0)
  const double p = std::exp2(xi0);
  const double slope = std::numbers::ln2 * p;
  LinExpr e = LinExpr::var(lambda_var);
  e.add(xi_var, -slope);
  e.constant = -(p - 1.0 - slope * xi0);
  return e;
}

double c10a_violation(double xi, double lambda) { return std::exp2(xi) - 1.0 - lambda; }

double sca_product_bound(double t, double xi, double t0, double xi0) {
  // t xi = ((t + xi)^2 - t^2 - xi^2) / 2 with the convex square linearized
  const double s0 = t0 + xi0;
  return 0.5 * (s0 * s0 + 2.0 * s0 * ((t + xi) - s0)) - 0.5 * (t * t + xi * xi);
}

CMat sprocedure_matrix(const CVec& h, double mu, const CMat& F, const CMat& I_sum, double lambda, double iota,
                       double sigma2, LmiForm form) {
  const Eigen::Index n = h.size();
  if (F.rows() != n || F.cols() != n || I_sum.rows() != n || I_sum.cols() != n)
    throw std::invalid_argument("sprocedure_matrix: shape mismatch");
  // quadratic form in c = conj(h) so that c^H X c = h^T X conj(h)
  const CVec c = h.conjugate();
  CMat M(n + 1, n + 1);
  if (form == LmiForm::Corrected) {
    const CMat A = F - lambda * I_sum;
    M.topLeftCorner(n, n) = A + iota * CMat::Identity(n, n);
    M.topRightCorner(n, 1) = A * c;
    M.bottomLeftCorner(1, n) = (A * c).adjoint();
    M(n, n) = (c.adjoint() * A * c)(0, 0).real() - lambda * sigma2 - iota * mu * mu;
  } else {
    const CMat A = F - lambda * I_sum;
    M.topLeftCorner(n, n) = iota * CMat::Identity(n, n) - A;
    M.topRightCorner(n, 1) = -(F * c);
    M.bottomLeftCorner(1, n) = -(F * c).adjoint();
    M(n, n) = -iota * mu * mu - ((c.adjoint() * F * c)(0, 0).real() - lambda * sigma2);
  }
  return M;
}

namespace {
double min_eig(const CMat& M) {
  Eigen::SelfAdjointEigenSolver<CMat> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}
}  // namespace

IotaSearch best_iota(const CVec& h, double mu, const CMat& F, const CMat& I_sum, double lambda, double sigma2,
                     LmiForm form) {
  auto f = [&](double iota) { return min_eig(sprocedure_matrix(h, mu, F, I_sum, lambda, iota, sigma2, form)); };
  // lambda_min of an affine matrix function is concave in iota; bracket then golden-section
  const double scale = std::max({1.0, F.cwiseAbs().maxCoeff(), I_sum.cwiseAbs().maxCoeff() * std::abs(lambda)}) *
                       std::max(1.0, h.squaredNorm());
  double lo = 0.0, hi = scale;
  while (f(2.0 * hi) > f(hi) && hi < 1e12 * scale) hi *= 2.0;
  hi *= 2.0;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
  double fa = f(a), fb = f(b);
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = lo + g * (hi - lo);
      fb = f(b);
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = hi - g * (hi - lo);
      fa = f(a);
    }
  }
  IotaSearch r{f(0.0), 0.0};
  const double mid = 0.5 * (lo + hi);
  const double fm = f(mid);
  if (fm > r.min_eig) r = {fm, mid};
  return r;
}

double power_unit(const Scenario& sc, const Vec& t) {
  double pu = 0.0;
  for (int q = 0; q < sc.Q(); ++q)
    if (sc.sensing.gamma_th > 0) pu = std::max(pu, sc.gain_floor(q, t(q)) / sc.N());
  for (int k = 0; k < sc.K(); ++k) {
    const double s2 = sc.channel_scale(k) * sc.channel_scale(k);
    if (s2 > 0) pu = std::max(pu, sc.sensing.sigma2 * std::max(1.0, std::exp2(2.0 * sc.r_min(k)) - 1.0) / s2);
  }
  return pu > 0 ? pu : 1.0;
}

RankOne extract_rank_one(const CMat& W) {
  RankOne r;
  if (W.rows() == 0) return r;
  const double tr = W.trace().real();
  Eigen::SelfAdjointEigenSolver<CMat> es((W + W.adjoint()) / 2.0);
  const Eigen::Index top = W.rows() - 1;
  const double lmax = std::max(0.0, es.eigenvalues()(top));
  r.w = std::sqrt(lmax) * es.eigenvectors().col(top);
  r.ratio = tr > 0 ? lmax / tr : 1.0;
  return r;
}

double binary_penalty(const Vec& x, const Vec& x0) {
  if (x.size() != x0.size()) throw std::invalid_argument("binary_penalty: size mismatch");
  return (x.array() - x0.array() * (2.0 * x.array() - x0.array())).sum();
}

CMat lemma3_block(const CMat& S, const CMat& F, const CMat& T, const Mat& B, const CMat& W) {
  const Eigen::Index mn = S.rows(), n = B.cols();
  if (S.cols() != mn || F.rows() != mn || F.cols() != mn || T.rows() != mn || T.cols() != mn || B.rows() != mn ||
      W.rows() != n || W.cols() != n)
    throw std::invalid_argument("lemma3_block: shape mismatch");
  const CMat Bc = B.cast<cd>();
  const CMat BW = Bc * W;
  CMat M = CMat::Zero(2 * mn + n, 2 * mn + n);
  M.block(0, 0, mn, mn) = S;
  M.block(0, mn, mn, mn) = F;
  M.block(mn, 0, mn, mn) = F.adjoint();
  M.block(mn, mn, mn, mn) = T;
  M.block(0, 2 * mn, mn, W.cols()) = BW;
  M.block(2 * mn, 0, W.cols(), mn) = BW.adjoint();
  M.block(mn, 2 * mn, mn, n) = Bc;
  M.block(2 * mn, mn, n, mn) = Bc.adjoint();
  M.block(2 * mn, 2 * mn, n, n) = CMat::Identity(n, n);
  return M;
}

}  // namespace isac
