#pragma once

// Power-minimizing resource allocation: constraint transformations, the
// S-procedure robust SINR LMI, the beamforming / duration blocks, the position
// subproblem and the alternating outer loop.

#include "isac/conic.hpp"
#include "isac/scenario.hpp"

#include <array>
#include <string>
#include <vector>

namespace isac {

struct SnapshotDecision {
  std::vector<CMat> W;  // per user, N x N, watts
  CMat R;               // sensing covariance, N x N
  double t = 0.0;       // seconds
  double rho0 = 0.0;    // pattern scale (watts)
  Vec xi, lambda, iota; // per user

  double power() const;
  CMat Rx() const;
};

using Decisions = std::vector<SnapshotDecision>;

// (1 / T) sum_q t_q (sum_k Tr W_kq + Tr R_q)
double average_power(const Decisions& d, double T_tot);

// Per-solve diagnostics record.
struct SolveRecord {
  std::string stage;
  SolveStatus status = SolveStatus::NumericalFailure;
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  double seconds = 0.0;
  int iterations = 0;
};

// ---------------------------------------------------------------- rate rows

// (1 / T) sum_q t_q xi_q - r_min >= 0 for fixed durations
LinExpr rate_row(const std::vector<int>& xi_vars, const Vec& t, double r_min, double T_tot);
// supporting tangent of 2^xi - 1 at xi0: lambda - tangent(xi) >= 0
LinExpr c10a_tangent(int xi_var, int lambda_var, double xi0);
// 2^xi - 1 - lambda (positive means violated)
double c10a_violation(double xi, double lambda);

// concave lower bound of t * xi around (t0, xi0)
double sca_product_bound(double t, double xi, double t0, double xi0);

// ---------------------------------------------------------------- S-procedure

enum class LmiForm { Corrected, Printed };

// Bordered robust-SINR matrix of user k for numeric data in any domain: h is
// the nominal channel row, F the user's covariance, I_sum the interference
// covariance sum_{i != k} F_i + Y. PSD (for some iota >= 0) certifies
// SINR >= lambda for every channel error of norm <= mu.
CMat sprocedure_matrix(const CVec& h, double mu, const CMat& F, const CMat& I_sum, double lambda, double iota,
                       double sigma2, LmiForm form = LmiForm::Corrected);

// Largest min-eigenvalue of sprocedure_matrix over iota >= 0 and the maximizer.
struct IotaSearch {
  double min_eig = 0.0;
  double iota = 0.0;
};
IotaSearch best_iota(const CVec& h, double mu, const CMat& F, const CMat& I_sum, double lambda, double sigma2,
                     LmiForm form = LmiForm::Corrected);

// ---------------------------------------------------------------- beamforming block

// Covariance normalization used inside the programs (watts per unit).
double power_unit(const Scenario& sc, const Vec& t);

struct P1Program {
  ConicProgram prog;
  double p_unit = 1.0;
  std::vector<std::vector<HermVar>> W;  // [q][k]
  std::vector<HermVar> R;               // [q]
  std::vector<int> rho;                 // [q]
  std::vector<std::vector<int>> xi;     // [q][k]
  std::vector<std::vector<int>> iota;   // [q][k]
};

// t: durations (s); lambda: K x Q SINR targets.
P1Program build_p1(const Scenario& sc, const SelectionState& sel, const Vec& t, const Mat& lambda);

struct P1Result {
  SolveRecord record;
  Decisions decisions;
  double objective = 0.0;  // watts
};
P1Result solve_p1(const Scenario& sc, const SelectionState& sel, const Vec& t, const Mat& lambda);

// ---------------------------------------------------------------- duration block

struct P2Program {
  ConicProgram prog;
  std::vector<int> t;                   // [q], milliseconds
  std::vector<std::vector<int>> lambda; // [q][k]
  std::vector<std::vector<int>> xi;     // [q][k]
  std::vector<std::vector<int>> iota;   // [q][k]
};

// Fixed W, R from `fixed`; (t0, xi0) is the expansion point; cuts lists extra
// tangent points per (q, k) for the exponential rate constraint.
P2Program build_p2(const Scenario& sc, const SelectionState& sel, const Decisions& fixed, const Vec& t0,
                   const Mat& xi0, const std::vector<std::vector<std::vector<double>>>& cuts = {});

struct P2Result {
  SolveRecord record;
  Vec t;
  Mat lambda, xi, iota;  // K x Q
  double objective = 0.0;
  int cut_rounds = 0;
  double c10a_gap = 0.0;
};
P2Result solve_p2(const Scenario& sc, const SelectionState& sel, const Decisions& fixed, const Vec& t0,
                  const Mat& xi0);

// ---------------------------------------------------------------- BCD

struct RankOne {
  CVec w;
  double ratio = 0.0;
};
RankOne extract_rank_one(const CMat& W);

struct BcdResult {
  bool feasible = false;
  std::string failure;
  Decisions decisions;
  double objective = 0.0;
  std::vector<double> trace;  // objective after every P1 and P2 solve
  int iterations = 0;
  std::vector<SolveRecord> records;
  double min_rank_one_ratio = 1.0;
  bool randomized = false;        // Gaussian randomization was needed
  double randomization_inflation = 0.0;
};

// Durations start at T/Q and SINR targets at the equal-rate split unless given.
BcdResult bcd_loop(const Scenario& sc, const SelectionState& sel, const Vec* t0 = nullptr,
                   const Mat* lambda0 = nullptr);

// Gaussian randomization for covariances that are not rank one: returns
// rank-one decisions (best of the configured number of draws) or an empty
// vector when no draw is feasible.
Decisions randomize_rank_one(const Scenario& sc, const SelectionState& sel, const Decisions& d, Rng& rng,
                             int samples);

// ---------------------------------------------------------------- positions

// x - x0 (2 x - x0) summed: the linearized binary penalty
double binary_penalty(const Vec& x, const Vec& x0);

// [[S, F, B W], [F^H, T, B], [W^H B^T, B^T, I]]
CMat lemma3_block(const CMat& S, const CMat& F, const CMat& T, const Mat& B, const CMat& W);

struct P3Program {
  ConicProgram prog;
  double p_unit = 1.0;
  std::vector<std::vector<int>> b;  // [n][m]
  std::vector<int> phi;             // glover layout over the full grid
  GloverLayout layout;
  double constant = 0.0;            // average power of the fixed covariances (units of p_unit)
};

// Lifted position problem over relaxed B with Schur-complement lifting and the
// four penalty terms. Intended for small grids (dense MN x MN blocks).
P3Program build_p3(const Scenario& sc, const Decisions& fixed, const std::vector<Vec>& b0, const Vec& phi0,
                   const std::array<double, 4>& tau);

// Argmax rounding with greedy minimum-distance repair. Throws when no feasible
// assignment is found.
SelectionState round_selection(const std::vector<Vec>& b, const Mat& D, double d_min);

// Value of the compact position program with the selection fixed: the
// time-weighted power after rescaling the fixed covariances, relative to the
// current average power. +inf when the selection cannot support them.
double evaluate_selection(const Scenario& sc, const SelectionState& sel, const Decisions& fixed);

struct PositionResult {
  SelectionState selection;
  double value = 1.0;  // evaluate_selection of the returned selection
  int iterations = 0;
  std::vector<double> penalties;
  std::vector<SolveRecord> records;
};

PositionResult position_sca_loop(const Scenario& sc, const SelectionState& init, const Decisions& fixed);

// ---------------------------------------------------------------- verification and AO

struct FeasibilityReport {
  bool feasible = true;
  std::vector<std::string> violations;
  double min_rate_margin = 0.0;      // worst sampled average rate minus R_min
  double max_outage = 0.0;           // worst empirical sensing outage
  double max_mse_ratio = 0.0;        // beam MSE over its cap
  double min_gain_ratio = 0.0;       // boresight gain over its floor
};

FeasibilityReport verify_solution(const Scenario& sc, const SelectionState& sel, const Decisions& d,
                                  int csi_samples = 1000, int rcs_samples = 0, std::uint64_t seed = 1);

struct AoResult {
  bool feasible = false;
  std::string failure;
  SelectionState selection;
  Decisions decisions;
  double objective = 0.0;
  std::vector<double> trace;                  // accepted AO objectives
  std::vector<std::vector<double>> bcd_traces;
  int iterations = 0;
  double min_rank_one_ratio = 1.0;
  bool randomized = false;
  double seconds = 0.0;
};

SelectionState initial_selection(const Scenario& sc);
AoResult ao_loop(const Scenario& sc, const SelectionState* init = nullptr);

}  // namespace isac
