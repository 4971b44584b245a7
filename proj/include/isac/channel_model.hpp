#pragma once

// Rician multiuser channels as a function of antenna position, the
// position-indexed channel table, and bounded CSI uncertainty.

#include "isac/conic.hpp"
#include "isac/grid_geometry.hpp"
#include "isac/random.hpp"

#include <limits>
#include <vector>

namespace isac {

struct ChannelParams {
  int num_paths = 4;           // L_p
  double kappa = 1.0;          // Rician factor, +inf for pure LoS
  double alpha = 2.2;          // path-loss exponent
  double L0 = 1e-3;            // reference gain
  double wavelength = 0.06;    // meters
  double path_excess = 0.5;    // D = d (1 + U(0, path_excess))
};

struct UserGeometry {
  double distance = 10.0;  // meters
  double theta = 0.0;      // LoS elevation
  double phi = 0.0;        // LoS azimuth
};

struct PathSet {
  Vec theta, phi;          // per-path AoD
  CVec weight;             // per-path complex gain
  Vec path_distance;       // D_{l_p}
  double los_theta = 0.0, los_phi = 0.0;
  double distance = 1.0;
  double kappa = 1.0, alpha = 2.2, L0 = 1e-3, wavelength = 0.06;

  int num_paths() const { return static_cast<int>(theta.size()); }
};

PathSet sample_user_paths(Rng& rng, const UserGeometry& user, const ChannelParams& params);

// phase (2 pi / wavelength) ((x - x_ref) cos(theta) sin(phi) + (y - y_ref) sin(theta))
double frv_phase(Point2 p, Point2 ref, double theta, double phi, double wavelength);
CVec transmit_frv(Point2 p, Point2 ref, const Vec& theta, const Vec& phi, double wavelength);

cd channel_coefficient(Point2 p, Point2 ref, const PathSet& paths);

// Position-indexed channels. Every element sees the same channel at a given
// position, so only the K x M block is stored; full() expands to K x MN.
struct ChannelTable {
  CMat per_position;  // K x M

  int K() const { return static_cast<int>(per_position.rows()); }
  int M() const { return static_cast<int>(per_position.cols()); }
  CMat full(int N) const;
  // K x N effective channel of a selection
  CMat effective(const SelectionState& s) const;
};

ChannelTable build_channel_table(const PositionGrid& grid, const std::vector<PathSet>& users);
ChannelTable build_channel_table(const std::vector<Point2>& positions, Point2 ref, const std::vector<PathSet>& users);

// H = H_hat B
CMat effective_channel(const CMat& H_hat, const Mat& B);

struct CsiEstimate {
  CMat nominal;   // K x M per-position nominal channels
  Vec mu;         // absolute uncertainty radius per user
  Vec sigma2;     // noise power per user (W)
};

// Uniform sample of the complex ball of radius mu in C^dim, or of its surface.
CVec sample_csi_error(Rng& rng, int dim, double mu, bool surface);

// Trace-form SINR of user k. h holds the entries of the user's channel row; W
// holds all users' covariances, all in the same (effective or lifted) domain.
double sinr(const CVec& h, const std::vector<CMat>& W, int k, const CMat& R, double sigma2, double psd_tol = 1e-9);

}  // namespace isac
