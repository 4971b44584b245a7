#pragma once

// Comparison schemes and the brute-force position oracle.

#include "isac/optimizer.hpp"

#include <string>
#include <vector>

namespace isac {

enum class Scheme { Proposed, AntennaSelection, FixedRandom, PerSnapshot, BruteForce };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& name);  // "proposed", "as", "fixed-random", "per-snapshot", "brute-force"

struct BaselineResult {
  Scheme scheme = Scheme::Proposed;
  bool feasible = false;
  std::string failure;
  double power = 0.0;  // watts, meaningful only when feasible
  // one selection for the period, or one per snapshot for the per-snapshot scheme
  std::vector<SelectionState> selections;
  Decisions decisions;
  std::vector<double> trace;  // outer objective trace (proposed and per-snapshot: AO)
  std::vector<std::vector<double>> inner_traces;
  int iterations = 0;
  int candidates = 0;         // subsets / selections evaluated
  double min_rank_one_ratio = 1.0;
  bool randomized = false;
  double seconds = 0.0;
};

// Scenario whose candidate positions are the 2 x N half-wavelength UPA, sharing
// users, paths and the scan plan with `sc`.
Scenario upa_scenario(const Scenario& sc);

// All k-subsets of {0, ..., n-1} in lexicographic order.
std::vector<std::vector<int>> combinations(int n, int k);

BaselineResult proposed_scheme(const Scenario& sc);
// Subsets are ranked by the first beamforming solve; the best `refine` of them
// get the full BCD loop.
BaselineResult antenna_selection_baseline(const Scenario& sc, int subset_cap, int refine = 4);
BaselineResult fixed_random_baseline(const Scenario& sc, std::uint64_t seed);
BaselineResult per_snapshot_upper_bound(const Scenario& sc);
// Requires M <= 16, N <= 3 and at most 1e4 feasible selections.
BaselineResult brute_force_positions(const Scenario& sc);

BaselineResult run_scheme(Scheme s, const Scenario& sc);

// Scenario the scheme's decisions refer to (the UPA scenario for AS).
Scenario scheme_scenario(Scheme s, const Scenario& sc);

}  // namespace isac
