#include "isac/sensing_model.hpp"

#include "isac/channel_model.hpp"

#include <cmath>
#include <numbers>

namespace isac {

namespace {
constexpr double kPi = std::numbers::pi;

std::vector<double> uniform_angles(int count) {
  std::vector<double> v(count);
  if (count == 1) {
    v[0] = 0.0;
    return v;
  }
  for (int i = 0; i < count; ++i) v[i] = -kPi / 2 + kPi * i / (count - 1);
  return v;
}

double radar_prefactor(double t, double T_tot, double omega, double sigma2, double psi, double L0) {
  return (t / T_tot) * omega * L0 * L0 / (16.0 * kPi * std::pow(psi, 4) * sigma2);
}
}  // namespace

double SectorScanPlan::slice_width() const { return width_deg * kPi / 180.0 / Q; }

SectorScanPlan build_scan_plan(double width_deg, int Q, double half_el, double half_az, int L, int J, double T_tot,
                               double t_min, double t_max) {
  if (Q < 1 || L < 1 || J < 1) throw std::invalid_argument("build_scan_plan: Q, L and J must be positive");
  if (!(width_deg > 0) || width_deg > 180.0) throw std::invalid_argument("build_scan_plan: sector width out of range");
  if (!(t_min > 0) || t_min > t_max) throw std::invalid_argument("build_scan_plan: invalid duration bounds");
  if (Q * t_min > T_tot * (1 + 1e-12)) throw std::invalid_argument("build_scan_plan: Q * t_min exceeds the period");
  SectorScanPlan p;
  p.width_deg = width_deg;
  p.Q = Q;
  p.L = L;
  p.J = J;
  p.T_tot = T_tot;
  p.t_min = t_min;
  p.t_max = t_max;
  const double w = p.slice_width();
  p.half_el = half_el < 0 ? w / 2 : half_el;
  p.half_az = half_az < 0 ? w / 2 : half_az;
  const double start = -width_deg * kPi / 360.0;
  for (int q = 0; q < Q; ++q) {
    p.theta_e.push_back(0.0);
    p.phi_e.push_back(start + (q + 0.5) * w);
  }
  p.theta_grid = uniform_angles(L);
  p.phi_grid = uniform_angles(J);
  return p;
}

CVec steering_block(const PositionGrid& grid, double theta, double phi) {
  CVec a(grid.size());
  const Point2 ref = grid.positions.front();
  for (int m = 0; m < grid.size(); ++m)
    a(m) = std::polar(1.0, frv_phase(grid.positions[m], ref, theta, phi, grid.wavelength));
  return a;
}

CVec steering_frv(const PositionGrid& grid, int N, double theta, double phi) {
  const CVec block = steering_block(grid, theta, phi);
  CVec a(block.size() * N);
  for (int n = 0; n < N; ++n) a.segment(n * block.size(), block.size()) = block;
  return a;
}

SteeringTable build_steering(const PositionGrid& grid, const SectorScanPlan& plan) {
  SteeringTable t;
  t.grid.resize(grid.size(), plan.grid_size());
  for (int l = 0; l < plan.L; ++l)
    for (int j = 0; j < plan.J; ++j) t.grid.col(plan.cell(l, j)) = steering_block(grid, plan.theta_grid[l], plan.phi_grid[j]);
  t.boresight.resize(grid.size(), plan.Q);
  for (int q = 0; q < plan.Q; ++q) t.boresight.col(q) = steering_block(grid, plan.theta_e[q], plan.phi_e[q]);
  return t;
}

CMat SteeringTable::effective(const SelectionState& s) const {
  CMat A(s.N(), grid.cols());
  for (int n = 0; n < s.N(); ++n) A.row(n) = grid.row(s.index[n]);
  return A;
}

CVec SteeringTable::effective_boresight(const SelectionState& s, int q) const {
  CVec a(s.N());
  for (int n = 0; n < s.N(); ++n) a(n) = boresight(s.index[n], q);
  return a;
}

CMat SteeringTable::stacked(int N) const {
  CMat S(grid.rows() * N, grid.cols());
  for (int n = 0; n < N; ++n) S.middleRows(n * grid.rows(), grid.rows()) = grid;
  return S;
}

IdealBeamPattern ideal_pattern(const SectorScanPlan& plan) {
  IdealBeamPattern p;
  const double tol = 1e-12;
  for (int q = 0; q < plan.Q; ++q) {
    Vec mask = Vec::Zero(plan.grid_size());
    for (int l = 0; l < plan.L; ++l)
      for (int j = 0; j < plan.J; ++j)
        if (std::abs(plan.theta_grid[l] - plan.theta_e[q]) <= plan.half_el + tol &&
            std::abs(plan.phi_grid[j] - plan.phi_e[q]) <= plan.half_az + tol)
          mask(plan.cell(l, j)) = 1.0;
    p.mask.push_back(mask);
  }
  return p;
}

double beam_gain(const CVec& a, const CMat& Rx) {
  if (Rx.size() == 0) return 0.0;
  return (a.adjoint() * Rx * a)(0, 0).real();
}

double beam_gain(const CVec& a_hat, const Mat& B, const CMat& Rx) {
  if (psd_residual(Rx) > 1e-9 * std::max(1.0, Rx.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("beam_gain: Rx is not positive semidefinite");
  const CVec a = B.transpose().cast<cd>() * a_hat;
  return beam_gain(a, Rx);
}

double beam_mse(double rho0, const Vec& mask, const CMat& A, const CMat& Rx) {
  // gain of column c is a_c^H Rx a_c
  const Vec gains = (A.adjoint() * Rx).cwiseProduct(A.transpose()).rowwise().sum().real();
  return (rho0 * mask - gains).squaredNorm() / static_cast<double>(mask.size());
}

double beam_mse(double rho0, const Vec& mask, const SteeringTable& table, const SelectionState& s, const CMat& Rx) {
  return beam_mse(rho0, mask, table.effective(s), Rx);
}

double radar_snr(double t, double T_tot, double omega, const CVec& a, const CMat& Rx, double sigma2, double psi,
                 double L0) {
  return radar_prefactor(t, T_tot, omega, sigma2, psi, L0) * beam_gain(a, Rx);
}

double radar_snr_combiner(double t, double T_tot, double omega, const CVec& a, const CVec& u, const CMat& Rx,
                          double sigma2, double psi, double L0) {
  // H = (eps L0 / (2 psi)) a a^H with eps^2 = omega / (4 pi psi^2)
  const double eps = std::sqrt(omega / (4.0 * kPi * psi * psi));
  const CMat H = (eps * L0 / (2.0 * psi)) * (a * a.adjoint());
  const double num = (t / T_tot) * (u.adjoint() * H * Rx * H.adjoint() * u)(0, 0).real();
  return num / (sigma2 * u.squaredNorm());
}

double chance_gain_floor(double nu, double omega_av, double t, double gamma_th, double psi, double sigma2, double L0,
                         double T_tot) {
  if (!(nu > 0) || !(nu < 1)) throw std::invalid_argument("chance_gain_floor: nu must lie in (0, 1)");
  if (!(t > 0) || !(omega_av > 0)) throw std::invalid_argument("chance_gain_floor: t and omega_av must be positive");
  return -T_tot * 16.0 * kPi * std::pow(psi, 4) * sigma2 * gamma_th / (t * std::log1p(-nu) * omega_av * L0 * L0);
}

double empirical_outage(Rng& rng, int samples, double omega_av, double beam_gain_value, double t, double T_tot,
                        double gamma_th, double psi, double sigma2, double L0) {
  if (samples < 1) throw std::invalid_argument("empirical_outage: need at least one sample");
  const double pre = radar_prefactor(t, T_tot, 1.0, sigma2, psi, L0) * beam_gain_value;
  int fails = 0;
  for (int s = 0; s < samples; ++s)
    if (pre * rng.exponential(omega_av) < gamma_th) ++fails;
  return static_cast<double>(fails) / samples;
}

}  // namespace isac
