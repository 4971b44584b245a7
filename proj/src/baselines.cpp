#include "isac/baselines.hpp"

#include "isac/random.hpp"
#include "optimizer_detail.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <numeric>

namespace isac {

namespace {

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void take_bcd(BaselineResult& r, const SelectionState& sel, BcdResult&& b) {
  r.feasible = true;
  r.failure.clear();
  r.power = b.objective;
  r.selections = {sel};
  r.decisions = std::move(b.decisions);
  r.trace = b.trace;
  r.inner_traces = {std::move(b.trace)};
  r.iterations = b.iterations;
  r.min_rank_one_ratio = b.min_rank_one_ratio;
  r.randomized = b.randomized;
}

}  // namespace

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Proposed: return "proposed";
    case Scheme::AntennaSelection: return "as";
    case Scheme::FixedRandom: return "fixed-random";
    case Scheme::PerSnapshot: return "per-snapshot";
    case Scheme::BruteForce: return "brute-force";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
  for (Scheme s : {Scheme::Proposed, Scheme::AntennaSelection, Scheme::FixedRandom, Scheme::PerSnapshot,
                   Scheme::BruteForce})
    if (to_string(s) == name) return s;
  throw std::invalid_argument("unknown scheme '" + name + "'");
}

std::vector<std::vector<int>> combinations(int n, int k) {
  std::vector<std::vector<int>> out;
  if (k < 0 || k > n) return out;
  std::vector<int> c(k);
  std::iota(c.begin(), c.end(), 0);
  while (true) {
    out.push_back(c);
    int i = k - 1;
    while (i >= 0 && c[i] == n - k + i) --i;
    if (i < 0) break;
    ++c[i];
    for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
  }
  return out;
}

Scenario upa_scenario(const Scenario& sc) {
  Scenario s = sc;
  s.grid = lattice_grid(sc.N(), 2, sc.cfg.wavelength / 2.0, {}, sc.cfg.wavelength);
  s.D = distance_matrix(s.grid);
  s.channels = build_channel_table(s.grid, s.paths);
  s.csi.nominal = s.channels.per_position;
  s.steering = build_steering(s.grid, s.plan);
  s.init_area.resize(s.grid.size());
  std::iota(s.init_area.begin(), s.init_area.end(), 0);
  s.fixed_area = s.init_area;
  return s;
}

BaselineResult proposed_scheme(const Scenario& sc) {
  BaselineResult r;
  r.scheme = Scheme::Proposed;
  AoResult ao = ao_loop(sc);
  r.seconds = ao.seconds;
  r.candidates = 1;
  if (!ao.feasible) {
    r.failure = ao.failure;
    return r;
  }
  r.feasible = true;
  r.power = ao.objective;
  r.selections = {ao.selection};
  r.decisions = std::move(ao.decisions);
  r.trace = ao.trace;
  r.inner_traces = ao.bcd_traces;
  r.iterations = ao.iterations;
  r.min_rank_one_ratio = ao.min_rank_one_ratio;
  r.randomized = ao.randomized;
  return r;
}

BaselineResult antenna_selection_baseline(const Scenario& sc, int subset_cap, int refine) {
  const Stopwatch clock;
  BaselineResult r;
  r.scheme = Scheme::AntennaSelection;
  const Scenario upa = upa_scenario(sc);
  auto subsets = combinations(upa.M(), sc.N());
  if (subset_cap > 0 && static_cast<int>(subsets.size()) > subset_cap) {
    // fixed-seed uniform sample, kept in lexicographic order
    Rng rng(derive_seed(sc.seed, 31));
    for (int i = 0; i < subset_cap; ++i) std::swap(subsets[i], subsets[i + rng.index(static_cast<int>(subsets.size()) - i)]);
    subsets.resize(subset_cap);
    std::sort(subsets.begin(), subsets.end());
  }
  const Vec t = detail::default_durations(upa);
  const Mat lam = detail::default_lambdas(upa, t);
  std::vector<std::pair<double, int>> ranked;
  for (int i = 0; i < static_cast<int>(subsets.size()); ++i) {
    SelectionState s;
    s.M = upa.M();
    s.index = subsets[i];
    if (!validate_selection(s, upa.D, sc.cfg.d_min).empty()) continue;
    const P1Result p1 = solve_p1(upa, s, t, lam);
    if (p1.record.status == SolveStatus::Optimal) ranked.emplace_back(p1.objective, i);
  }
  r.candidates = static_cast<int>(subsets.size());
  std::stable_sort(ranked.begin(), ranked.end());
  for (int j = 0; j < std::min<int>(refine, static_cast<int>(ranked.size())); ++j) {
    SelectionState s;
    s.M = upa.M();
    s.index = subsets[ranked[j].second];
    BcdResult b = bcd_loop(upa, s);
    if (b.feasible && (!r.feasible || b.objective < r.power)) take_bcd(r, s, std::move(b));
  }
  if (!r.feasible) r.failure = "no feasible antenna subset";
  r.seconds = clock.seconds();
  return r;
}

BaselineResult fixed_random_baseline(const Scenario& sc, std::uint64_t seed) {
  const Stopwatch clock;
  BaselineResult r;
  r.scheme = Scheme::FixedRandom;
  std::vector<int> pool = sc.fixed_area;
  if (pool.empty()) {
    pool.resize(sc.M());
    std::iota(pool.begin(), pool.end(), 0);
  }
  Rng rng(derive_seed(seed, 41));
  SelectionState s;
  s.M = sc.M();
  bool found = false;
  for (int attempt = 0; attempt < 10000 && !found; ++attempt) {
    s.index.clear();
    for (int n = 0; n < sc.N(); ++n) s.index.push_back(pool[rng.index(static_cast<int>(pool.size()))]);
    found = validate_selection(s, sc.D, sc.cfg.d_min).empty();
  }
  r.candidates = 1;
  if (!found) {
    r.failure = "no minimum-distance feasible random placement after 1e4 draws";
  } else {
    BcdResult b = bcd_loop(sc, s);
    if (b.feasible)
      take_bcd(r, s, std::move(b));
    else
      r.failure = b.failure;
    if (!r.feasible) r.selections = {s};
  }
  r.seconds = clock.seconds();
  return r;
}

BaselineResult per_snapshot_upper_bound(const Scenario& sc) {
  const Stopwatch clock;
  BaselineResult r;
  r.scheme = Scheme::PerSnapshot;
  r.feasible = true;
  for (int q = 0; q < sc.Q(); ++q) {
    const Scenario one = restrict_to_snapshot(sc, q);
    AoResult ao = ao_loop(one);
    r.inner_traces.push_back(ao.trace);
    r.iterations = std::max(r.iterations, ao.iterations);
    if (!ao.feasible) {
      r.feasible = false;
      r.failure = "snapshot " + std::to_string(q) + ": " + ao.failure;
      break;
    }
    r.power += ao.objective;
    r.selections.push_back(ao.selection);
    r.decisions.push_back(ao.decisions.front());
    r.min_rank_one_ratio = std::min(r.min_rank_one_ratio, ao.min_rank_one_ratio);
    r.randomized = r.randomized || ao.randomized;
  }
  if (!r.feasible) {
    r.power = 0.0;
    r.decisions.clear();
  } else {
    r.trace = {r.power};
  }
  r.candidates = sc.Q();
  r.seconds = clock.seconds();
  return r;
}

BaselineResult brute_force_positions(const Scenario& sc) {
  const Stopwatch clock;
  if (sc.M() > 16 || sc.N() > 3) throw std::invalid_argument("brute_force_positions: needs M <= 16 and N <= 3");
  BaselineResult r;
  r.scheme = Scheme::BruteForce;
  std::vector<SelectionState> feasible;
  for (const auto& c : combinations(sc.M(), sc.N())) {
    SelectionState s;
    s.M = sc.M();
    s.index = c;
    if (validate_selection(s, sc.D, sc.cfg.d_min).empty()) feasible.push_back(s);
  }
  if (feasible.size() > 10000) throw std::invalid_argument("brute_force_positions: more than 1e4 selections");
  r.candidates = static_cast<int>(feasible.size());
  for (const auto& s : feasible) {
    BcdResult b = bcd_loop(sc, s);
    if (b.feasible && (!r.feasible || b.objective < r.power)) take_bcd(r, s, std::move(b));
  }
  if (!r.feasible) r.failure = "no feasible selection";
  r.seconds = clock.seconds();
  return r;
}

BaselineResult run_scheme(Scheme s, const Scenario& sc) {
  switch (s) {
    case Scheme::Proposed: return proposed_scheme(sc);
    case Scheme::AntennaSelection: return antenna_selection_baseline(sc, sc.cfg.as_subset_cap);
    case Scheme::FixedRandom: return fixed_random_baseline(sc, sc.seed);
    case Scheme::PerSnapshot: return per_snapshot_upper_bound(sc);
    case Scheme::BruteForce: return brute_force_positions(sc);
  }
  throw std::invalid_argument("run_scheme: unknown scheme");
}

Scenario scheme_scenario(Scheme s, const Scenario& sc) {
  return s == Scheme::AntennaSelection ? upa_scenario(sc) : sc;
}

}  // namespace isac
