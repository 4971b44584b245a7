#pragma once

// Scenario configuration (simulation defaults plus the knobs the model leaves
// open) and deterministic scenario sampling.

#include "isac/channel_model.hpp"
#include "isac/grid_geometry.hpp"
#include "isac/sensing_model.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace isac {

struct ScenarioConfig {
  // system
  int N = 6;
  int K = 4;
  int Q = 8;
  double wavelength = 0.06;
  double a = 2.0;
  double step = 0.01;
  double d_min = 0.015;
  int grid_cap = kDefaultGridCap;
  // channel
  double alpha = 2.2;
  double L0_db = -30.0;
  double sigma2_dbm = -80.0;
  double kappa = 1.0;
  int num_paths = 4;
  double path_excess = 0.5;
  double user_dist_min = 10.0;
  double user_dist_max = 50.0;
  double mu = 0.1;  // relative CSI error radius
  // requirements
  double r_min = 0.5;
  double gamma_th_db = 10.0;
  double nu = 0.1;
  double p_max_dbm = 120.0;
  // sensing
  double psi = 50.0;
  double width_deg = 120.0;
  int L = 32;
  int J = 32;
  double half_el = -1.0;  // negative: half a slice
  double half_az = -1.0;
  std::vector<double> omega_av;  // empty: 1 for the first half of the snapshots, 0.1 after
  double delta_d = 0.1;
  double mse_ref_fraction = 0.9;  // beam-MSE reference: gain floor at this fraction of T_tot / Q
  // timing
  double t_min = 1e-4;
  double t_max = 4e-3;
  double T_tot = 5e-3;
  // algorithm
  int bcd_max_iters = 30;
  double eps_bcd = 1e-4;
  int ao_max_iters = 15;
  double eps_ao = 1e-3;
  int sca_max_iters = 20;
  double tau_init = 0.01;
  double tau_growth = 5.0;
  int window_radius = 1;
  int full_window_max_m = 9;
  double init_area = 0.5;   // side (in wavelengths) of the square holding the initial placement
  double fixed_area = 1.0;  // side (in wavelengths) of the square the fixed-random baseline samples from
  int as_subset_cap = 256;
  int randomization_samples = 100;
  double solver_tol = 1e-7;
  bool printed_lmi = false;
  // experiments
  int seeds = 10;
  std::uint64_t seed = 1;

  static ScenarioConfig paper();
  static ScenarioConfig desk();

  double sigma2() const;
  double L0() const;
  double gamma_th() const;
  double p_max() const;
  std::vector<double> omega_schedule() const;

  // key=value interface mirroring the field names
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_map() const;
  std::string canonical() const;  // sorted key=value lines
  std::string hash() const;       // 16 hex digits of the canonical form
};

ScenarioConfig load_config(std::istream& in, ScenarioConfig base = ScenarioConfig::desk());
ScenarioConfig load_config_file(const std::string& path, ScenarioConfig base = ScenarioConfig::desk());

struct Scenario {
  ScenarioConfig cfg;
  std::uint64_t seed = 0;
  PositionGrid grid;
  Mat D;
  std::vector<UserGeometry> users;
  std::vector<PathSet> paths;
  ChannelTable channels;  // true channels, also the nominal estimate
  CsiEstimate csi;
  Vec channel_scale;      // sqrt(N mean_m |h_k(p_m)|^2), position independent
  SectorScanPlan plan;
  SteeringTable steering;
  IdealBeamPattern pattern;
  SensingSpec sensing;
  Vec r_min;
  double p_max = 0.0;
  double time_budget = 0.0;   // C9 budget (T_tot unless restricted)
  std::vector<int> snapshot_ids;  // original snapshot index of each local one
  std::vector<int> init_area;     // positions inside the initialization square
  std::vector<int> fixed_area;    // positions inside the fixed-random square

  int N() const { return cfg.N; }
  int K() const { return cfg.K; }
  int Q() const { return plan.Q; }
  int M() const { return grid.size(); }
  double T_tot() const { return plan.T_tot; }
  // chance-constraint gain floor of snapshot q at duration t
  double gain_floor(int q, double t) const;
  // reference gain used to normalize the beam-MSE cap of snapshot q
  double mse_reference(int q) const;
};

Scenario sample_scenario(const ScenarioConfig& cfg, std::uint64_t seed);
// single-snapshot problem of snapshot q with an equal share of the rate and time budgets
Scenario restrict_to_snapshot(const Scenario& sc, int q);

}  // namespace isac
