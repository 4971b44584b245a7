#include "isac/channel_model.hpp"

#include <cmath>
#include <numbers>

namespace isac {

PathSet sample_user_paths(Rng& rng, const UserGeometry& user, const ChannelParams& params) {
  if (params.num_paths < 1) throw std::invalid_argument("sample_user_paths: need at least one path");
  if (!(user.distance > 0) || !(params.L0 > 0) || params.kappa < 0 || params.path_excess < 0)
    throw std::invalid_argument("sample_user_paths: invalid distribution parameters");
  const int L = params.num_paths;
  PathSet p;
  p.theta.resize(L);
  p.phi.resize(L);
  p.weight.resize(L);
  p.path_distance.resize(L);
  constexpr double half_pi = std::numbers::pi / 2.0;
  for (int l = 0; l < L; ++l) {
    // density cos(theta) / 2 on elevation, uniform azimuth
    p.theta(l) = std::asin(2.0 * rng.uniform() - 1.0);
    p.phi(l) = rng.uniform(-half_pi, half_pi);
    p.path_distance(l) = user.distance * (1.0 + rng.uniform(0.0, params.path_excess));
    p.weight(l) = rng.complex_normal(params.L0 * std::pow(p.path_distance(l), -params.alpha));
  }
  p.los_theta = user.theta;
  p.los_phi = user.phi;
  p.distance = user.distance;
  p.kappa = params.kappa;
  p.alpha = params.alpha;
  p.L0 = params.L0;
  p.wavelength = params.wavelength;
  return p;
}

double frv_phase(Point2 p, Point2 ref, double theta, double phi, double wavelength) {
  return 2.0 * std::numbers::pi / wavelength *
         ((p.x - ref.x) * std::cos(theta) * std::sin(phi) + (p.y - ref.y) * std::sin(theta));
}

CVec transmit_frv(Point2 p, Point2 ref, const Vec& theta, const Vec& phi, double wavelength) {
  CVec g(theta.size());
  for (Eigen::Index l = 0; l < theta.size(); ++l) g(l) = std::polar(1.0, frv_phase(p, ref, theta(l), phi(l), wavelength));
  return g;
}

cd channel_coefficient(Point2 p, Point2 ref, const PathSet& paths) {
  const cd los = std::sqrt(paths.L0 / paths.distance) *
                 std::polar(1.0, frv_phase(p, ref, paths.los_theta, paths.los_phi, paths.wavelength));
  if (std::isinf(paths.kappa)) return los;
  const cd nlos = (paths.weight.array() * transmit_frv(p, ref, paths.theta, paths.phi, paths.wavelength).array()).sum();
  return std::sqrt(paths.kappa / (paths.kappa + 1.0)) * los + std::sqrt(1.0 / (paths.kappa + 1.0)) * nlos;
}

CMat ChannelTable::full(int N) const {
  CMat H(K(), static_cast<Eigen::Index>(M()) * N);
  for (int n = 0; n < N; ++n) H.middleCols(static_cast<Eigen::Index>(n) * M(), M()) = per_position;
  return H;
}

CMat ChannelTable::effective(const SelectionState& s) const {
  CMat H(K(), s.N());
  for (int n = 0; n < s.N(); ++n) H.col(n) = per_position.col(s.index[n]);
  return H;
}

ChannelTable build_channel_table(const std::vector<Point2>& positions, Point2 ref, const std::vector<PathSet>& users) {
  ChannelTable t;
  t.per_position.resize(static_cast<Eigen::Index>(users.size()), static_cast<Eigen::Index>(positions.size()));
  for (size_t k = 0; k < users.size(); ++k)
    for (size_t m = 0; m < positions.size(); ++m)
      t.per_position(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)) =
          channel_coefficient(positions[m], ref, users[k]);
  return t;
}

ChannelTable build_channel_table(const PositionGrid& grid, const std::vector<PathSet>& users) {
  return build_channel_table(grid.positions, grid.positions.front(), users);
}

CMat effective_channel(const CMat& H_hat, const Mat& B) {
  if (H_hat.cols() != B.rows()) throw std::invalid_argument("effective_channel: shape mismatch");
  return H_hat * B.cast<cd>();
}

CVec sample_csi_error(Rng& rng, int dim, double mu, bool surface) {
  if (mu < 0) throw std::invalid_argument("sample_csi_error: negative radius");
  CVec e(dim);
  if (mu == 0.0 || dim == 0) return CVec::Zero(dim);
  for (int i = 0; i < dim; ++i) e(i) = rng.complex_normal();
  const double r = surface ? mu : mu * std::pow(rng.uniform(), 1.0 / (2.0 * dim));
  return e * (r / e.norm());
}

namespace {
void require_psd(const CMat& X, double tol, const char* what) {
  if (X.size() == 0) return;
  if (psd_residual(X) > tol * std::max(1.0, X.cwiseAbs().maxCoeff()))
    throw std::invalid_argument(std::string("sinr: ") + what + " is not positive semidefinite");
}
}  // namespace

double sinr(const CVec& h, const std::vector<CMat>& W, int k, const CMat& R, double sigma2, double psd_tol) {
  for (const auto& w : W) require_psd(w, psd_tol, "W");
  require_psd(R, psd_tol, "R");
  // Tr(h^H h X) = h X h^H for the row h
  auto quad = [&](const CMat& X) { return X.size() == 0 ? 0.0 : (h.transpose() * X * h.conjugate())(0, 0).real(); };
  const double signal = quad(W.at(k));
  double interference = quad(R);
  for (size_t i = 0; i < W.size(); ++i)
    if (static_cast<int>(i) != k) interference += quad(W[i]);
  return signal / (interference + sigma2);
}

}  // namespace isac
