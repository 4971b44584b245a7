#pragma once

// Sector scan geometry, steering tables, ideal beam patterns, beam-matching
// MSE, radar SNR and the deterministic floor of the sensing chance constraint.

#include "isac/conic.hpp"
#include "isac/grid_geometry.hpp"
#include "isac/random.hpp"

#include <vector>

namespace isac {

struct SectorScanPlan {
  double width_deg = 120.0;
  int Q = 1;
  std::vector<double> theta_e, phi_e;  // per-snapshot centers (rad)
  double half_el = 0.0;                // Delta
  double half_az = 0.0;                // delta
  int L = 32, J = 32;
  std::vector<double> theta_grid, phi_grid;
  double T_tot = 5e-3, t_min = 1e-4, t_max = 4e-3;

  double slice_width() const;  // rad
  int grid_size() const { return L * J; }
  // flat angular index of (l, j)
  int cell(int l, int j) const { return l * J + j; }
};

// Azimuth slicing of [-W/2, W/2] with elevation held at boresight. Negative
// half widths select the default of half a slice.
SectorScanPlan build_scan_plan(double width_deg, int Q, double half_el, double half_az, int L, int J, double T_tot,
                               double t_min, double t_max);

// Stacked steering vector of N element blocks over the grid (length MN).
CVec steering_frv(const PositionGrid& grid, int N, double theta, double phi);
// One block (length M).
CVec steering_block(const PositionGrid& grid, double theta, double phi);

// Per-position steering over the angular grid and the snapshot boresights.
struct SteeringTable {
  CMat grid;       // M x (L J), column cell(l, j)
  CMat boresight;  // M x Q

  int M() const { return static_cast<int>(grid.rows()); }
  // N x (L J) effective steering of a selection
  CMat effective(const SelectionState& s) const;
  CVec effective_boresight(const SelectionState& s, int q) const;
  CMat stacked(int N) const;  // MN x (L J)
};

SteeringTable build_steering(const PositionGrid& grid, const SectorScanPlan& plan);

struct IdealBeamPattern {
  std::vector<Vec> mask;  // per snapshot, 0/1 over cell(l, j)
};

IdealBeamPattern ideal_pattern(const SectorScanPlan& plan);

// a_hat^H B Rx B^T a_hat = a^H Rx a with a = B^T a_hat
double beam_gain(const CVec& a_hat, const Mat& B, const CMat& Rx);
double beam_gain(const CVec& a, const CMat& Rx);

// (1 / JL) sum |rho0 mask - gain|^2 over the grid; A is the effective N x (LJ)
// steering of the selection.
double beam_mse(double rho0, const Vec& mask, const CMat& A, const CMat& Rx);
double beam_mse(double rho0, const Vec& mask, const SteeringTable& table, const SelectionState& s, const CMat& Rx);

struct SensingSpec {
  double gamma_th = 10.0;       // linear
  double nu = 0.1;
  double psi = 50.0;            // m
  std::vector<double> omega_av; // per snapshot
  double sigma2 = 1e-11;        // W
  double L0 = 1e-3;
  double delta_d = 0.1;         // normalized beam-MSE cap
  double mse_ref_duration = 1e-3;  // duration whose gain floor normalizes delta_d
};

// SNR with the normalized steering vector as receive combiner (closed form).
double radar_snr(double t, double T_tot, double omega, const CVec& a, const CMat& Rx, double sigma2, double psi,
                 double L0);
// SNR for an arbitrary combiner u, from the round-trip channel model.
double radar_snr_combiner(double t, double T_tot, double omega, const CVec& a, const CVec& u, const CMat& Rx,
                          double sigma2, double psi, double L0);

// Smallest beam gain with Pr{SNR < gamma_th} <= nu under exponential RCS.
double chance_gain_floor(double nu, double omega_av, double t, double gamma_th, double psi, double sigma2, double L0,
                         double T_tot);

// Fraction of exponential RCS draws whose SNR falls below the threshold, for a
// fixed boresight beam gain.
double empirical_outage(Rng& rng, int samples, double omega_av, double beam_gain_value, double t, double T_tot,
                        double gamma_th, double psi, double sigma2, double L0);

}  // namespace isac
