// Acceptance suite: one PASS/FAIL line per criterion. AC10 is soft (reported,
// never fails the run). Sweep outputs land in argv[1] (default ./acceptance_out).
// Set ISAC_ACCEPTANCE_CACHE to a directory to reuse sweep runs across invocations.

#include "isac/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

#ifndef ISAC_UNIT_DIR
#define ISAC_UNIT_DIR "."
#endif

using namespace isac;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Line {
  std::string id;
  bool pass = false;
  bool soft = false;
  std::string detail;
};

std::vector<Line> g_lines;
const auto g_start = std::chrono::steady_clock::now();

double elapsed() { return std::chrono::duration<double>(std::chrono::steady_clock::now() - g_start).count(); }

void report(const std::string& id, bool pass, const std::string& detail, bool soft = false) {
  g_lines.push_back({id, pass, soft, detail});
  std::cout << id << " " << (soft ? (pass ? "SOFT-PASS" : "SOFT-FAIL (logged)") : (pass ? "PASS" : "FAIL")) << "  "
            << detail << "  [" << static_cast<long>(elapsed()) << " s]" << std::endl;
}

std::string num(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

ScenarioConfig ac1_config() {
  ScenarioConfig c = ScenarioConfig::desk();
  c.N = 2;
  c.K = 1;
  c.Q = 2;
  c.a = 1.0 / 3.0;  // 3 x 3 grid at 0.01 m
  c.mse_ref_fraction = 0.55;  // the N = 2 pattern cannot meet the default cap
  return c;
}

bool non_increasing(const std::vector<double>& tr, double rel = 1e-6) {
  for (size_t i = 1; i < tr.size(); ++i)
    if (tr[i] > tr[i - 1] + rel * std::abs(tr[i - 1])) return false;
  return true;
}

// ---------------------------------------------------------------- independent oracles

// Exponential-RCS outage of one snapshot, written from the radar equation.
double outage_oracle(const Scenario& sc, const SelectionState& sel, const SnapshotDecision& d, int q, int draws,
                     std::uint64_t seed, double gain_override = -1.0) {
  const CVec a = sc.steering.effective_boresight(sel, q);
  const double gain = gain_override >= 0 ? gain_override : (a.adjoint() * d.Rx() * a)(0, 0).real();
  const SensingSpec& s = sc.sensing;
  const double pre = (d.t / sc.T_tot()) * s.L0 * s.L0 * gain / (16.0 * kPi * std::pow(s.psi, 4) * s.sigma2);
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> omega(1.0 / s.omega_av[q]);
  int fails = 0;
  for (int i = 0; i < draws; ++i) fails += pre * omega(rng) < s.gamma_th;
  return static_cast<double>(fails) / draws;
}

// Worst average rate of user k over `draws` channel errors on the radius-mu sphere.
double worst_rate_oracle(const Scenario& sc, const SelectionState& sel, const Decisions& d, int k, int draws,
                         std::uint64_t seed) {
  const CVec h0 = sc.channels.effective(sel).row(k).transpose();
  const double mu = sc.csi.mu(k);
  const double noise = sc.csi.sigma2(k);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  auto rate = [&](const CVec& h) {
    double r = 0.0;
    for (const auto& x : d) {
      const double sig = (h.transpose() * x.W[k] * h.conjugate())(0, 0).real();
      double interf = (h.transpose() * x.R * h.conjugate())(0, 0).real();
      for (size_t i = 0; i < x.W.size(); ++i)
        if (static_cast<int>(i) != k) interf += (h.transpose() * x.W[i] * h.conjugate())(0, 0).real();
      r += (x.t / sc.T_tot()) * std::log2(1.0 + sig / (interf + noise));
    }
    return r;
  };
  double worst = rate(h0);
  for (int i = 0; i < draws; ++i) {
    CVec e(h0.size());
    for (Eigen::Index j = 0; j < e.size(); ++j) e(j) = cd(g(rng), g(rng));
    worst = std::min(worst, rate(h0 + e * (mu / e.norm())));
  }
  return worst;
}

// ---------------------------------------------------------------- sweeps

struct SweepRun {
  std::vector<ResultRecord> records;
  std::vector<SummaryRow> rows;
};

SweepRun sweep(const std::string& name, const ScenarioConfig& base, const std::string& axis,
               const std::vector<double>& values, const std::vector<Scheme>& schemes, RunCache& cache,
               const fs::path& out) {
  SweepSpec spec;
  spec.axis = axis;
  spec.values = values;
  spec.schemes = schemes;
  spec.seeds = 10;
  SweepOptions opt;
  opt.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  opt.cache = &cache;
  SweepRun r;
  r.records = run_sweep(spec, base, opt);
  r.rows = summarize(r.records);
  fs::create_directories(out);
  write_jsonl(out / (name + ".jsonl"), r.records);
  write_summary_csv(out / (name + "_summary.csv"), axis, r.rows);
  write_plot_data(out / (name + "_plot.dat"), axis, r.rows);
  std::cout << "  " << name << ":\n";
  for (const auto& row : r.rows)
    std::cout << "    " << std::left << std::setw(13) << to_string(row.scheme) << std::right << " " << axis << "="
              << std::setw(6) << row.value << "  mean " << std::setw(12) << num(row.mean, 8) << " W ("
              << num(row.mean > 0 ? watts_to_dbm(row.mean) : 0.0, 6) << " dBm)  se " << std::setw(10)
              << num(row.se, 4) << "  n=" << row.count << " failed=" << row.failed << "\n";
  return r;
}

const SummaryRow& row_of(const SweepRun& s, Scheme sch, double v) {
  static const SummaryRow empty{};
  const SummaryRow* r = find_row(s.rows, sch, v);
  return r ? *r : empty;
}

bool separated_below(const SummaryRow& lo, const SummaryRow& hi) {
  return lo.count > 0 && hi.count > 0 && lo.mean + lo.se < hi.mean - hi.se;
}

int failed_runs(const SweepRun& s) {
  int f = 0;
  for (const auto& r : s.rows) f += r.failed;
  return f;
}

// ---------------------------------------------------------------- criteria

void ac1() {
  const ScenarioConfig cfg = ac1_config();
  bool pass = true;
  double worst = 0.0;
  std::string note;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Scenario sc = sample_scenario(cfg, seed);
    const BaselineResult ao = proposed_scheme(sc);
    const BaselineResult bf = brute_force_positions(sc);
    if (!ao.feasible || !bf.feasible) {
      pass = false;
      note += " seed " + std::to_string(seed) + " infeasible (" + ao.failure + bf.failure + ")";
      continue;
    }
    const double ratio = ao.power / bf.power;
    worst = std::max(worst, ratio);
    pass = pass && ratio <= 1.05;
  }
  report("AC1", pass, "worst ao/brute-force power ratio " + num(worst, 8) + " over 10 seeds (limit 1.05)" + note);
}

struct DeskRun {
  Scenario sc;
  BaselineResult r;
};

std::vector<DeskRun> desk_runs(int n) {
  std::vector<DeskRun> out;
  for (int s = 1; s <= n; ++s) {
    Scenario sc = sample_scenario(ScenarioConfig::desk(), static_cast<std::uint64_t>(s));
    BaselineResult r = proposed_scheme(sc);
    out.push_back({std::move(sc), std::move(r)});
  }
  return out;
}

void ac2(const std::vector<DeskRun>& runs) {
  bool pass = true;
  int traces = 0, max_iter = 0;
  std::string note;
  for (size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i].r;
    if (!r.feasible) {
      pass = false;
      note += " seed " + std::to_string(i + 1) + " infeasible";
      continue;
    }
    max_iter = std::max(max_iter, r.iterations);
    pass = pass && r.iterations <= 15 && non_increasing(r.trace);
    ++traces;
    for (const auto& t : r.inner_traces) {
      ++traces;
      if (!non_increasing(t)) {
        pass = false;
        note += " seed " + std::to_string(i + 1) + " BCD trace increases";
      }
    }
  }
  report("AC2", pass,
         std::to_string(traces) + " AO/BCD traces on 20 seeds, max AO iterations " + std::to_string(max_iter) + note);
}

void ac3(const std::vector<DeskRun>& runs) {
  bool pass = true;
  double worst = 0.0;
  int snapshots = 0;
  for (size_t i = 0; i < 10 && i < runs.size(); ++i) {
    const auto& [sc, r] = runs[i];
    if (!r.feasible) {
      pass = false;
      continue;
    }
    for (int q = 0; q < sc.Q(); ++q) {
      const double o = outage_oracle(sc, r.selections[0], r.decisions[q], q, 100000, derive_seed(i + 1, 500 + q));
      worst = std::max(worst, o);
      ++snapshots;
    }
  }
  pass = pass && worst <= runs.front().sc.sensing.nu + 0.01;
  // beam gain clamped exactly to the floor
  const auto& [sc, r] = runs.front();
  const double floor = sc.gain_floor(0, r.decisions[0].t);
  const double clamped =
      outage_oracle(sc, r.selections[0], r.decisions[0], 0, 100000, derive_seed(1, 999), floor);
  const bool clamp_ok = clamped >= 0.095 && clamped <= 0.105;
  report("AC3", pass && clamp_ok,
         "max outage " + num(worst, 5) + " over " + std::to_string(snapshots) +
             " snapshots (limit nu + 0.01); outage at the floor " + num(clamped, 5) + " (band [0.095, 0.105])");
}

void ac4(const std::vector<DeskRun>& runs) {
  bool pass = true;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < runs.size(); ++i) {
    const auto& [sc, r] = runs[i];
    if (!r.feasible) {
      pass = false;
      continue;
    }
    for (int k = 0; k < sc.K(); ++k) {
      const double w = worst_rate_oracle(sc, r.selections[0], r.decisions, k, 10000, derive_seed(i + 1, 700 + k));
      worst_margin = std::min(worst_margin, w - sc.r_min(k));
    }
  }
  pass = pass && worst_margin >= -1e-6;
  report("AC4", pass,
         "worst sampled average rate minus R_min " + num(worst_margin, 6) + " bit/s/Hz over " +
             std::to_string(runs.size()) + " instances x 1e4 sphere errors per user");
}

void ac5() {
  bool pass = true;
  double min_ratio = 1.0, max_inflation = 0.0;
  int fallbacks = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Scenario sc = sample_scenario(ScenarioConfig::desk(), seed);
    const SelectionState sel = initial_selection(sc);
    const Vec t = Vec::Constant(sc.Q(), sc.T_tot() / sc.Q());
    Mat lam(sc.K(), sc.Q());
    for (int k = 0; k < sc.K(); ++k) lam.row(k).setConstant(std::exp2(sc.r_min(k)) - 1.0);
    const P1Result p1 = solve_p1(sc, sel, t, lam);
    if (p1.record.status != SolveStatus::Optimal) {
      pass = false;
      std::cout << "  AC5 seed " << seed << ": P1 " << to_string(p1.record.status) << "\n";
      continue;
    }
    double ratio = 1.0;
    for (const auto& d : p1.decisions)
      for (const auto& W : d.W) ratio = std::min(ratio, extract_rank_one(W).ratio);
    min_ratio = std::min(min_ratio, ratio);
    if (ratio >= 0.999) continue;
    ++fallbacks;
    Rng rng(derive_seed(seed, 77));
    const Decisions rd = randomize_rank_one(sc, sel, p1.decisions, rng, sc.cfg.randomization_samples);
    const bool ok = !rd.empty() && verify_solution(sc, sel, rd, 1000, 0, seed).feasible;
    const double infl = ok ? average_power(rd, sc.T_tot()) / p1.objective - 1.0 : INFINITY;
    max_inflation = std::max(max_inflation, infl);
    std::cout << "  AC5 seed " << seed << ": rank-one ratio " << num(ratio) << ", randomization "
              << (ok ? "feasible" : "failed") << ", inflation " << num(infl) << "\n";
    pass = pass && ok && infl <= 0.01;
  }
  report("AC5", pass,
         "min rank-one ratio " + num(min_ratio, 8) + " over 20 P1 solves; randomization fallbacks " +
             std::to_string(fallbacks) + ", max inflation " + num(max_inflation));
}

void ac6(RunCache& cache, const fs::path& out) {
  const std::vector<double> g = {5, 10, 15};
  const std::vector<Scheme> schemes = {Scheme::Proposed, Scheme::AntennaSelection, Scheme::FixedRandom};
  const SweepRun s = sweep("sweep_gamma_nu0.1", ScenarioConfig::desk(), "gamma_th_db", g, schemes, cache, out);
  ScenarioConfig nu05 = ScenarioConfig::desk();
  nu05.nu = 0.05;
  const SweepRun s05 = sweep("sweep_gamma_nu0.05", nu05, "gamma_th_db", g, {Scheme::Proposed}, cache, out);

  std::vector<std::string> bad;
  for (Scheme sch : schemes)
    for (size_t i = 1; i < g.size(); ++i)
      if (!(row_of(s, sch, g[i]).mean > row_of(s, sch, g[i - 1]).mean) || row_of(s, sch, g[i]).count == 0)
        bad.push_back(to_string(sch) + " not strictly increasing at " + num(g[i]) + " dB");
  auto ordered = [&](const SweepRun& lo_run, Scheme lo, const SweepRun& hi_run, Scheme hi, bool strict,
                     const std::string& what) {
    int sep = 0;
    for (double v : g) {
      const SummaryRow &a = row_of(lo_run, lo, v), &b = row_of(hi_run, hi, v);
      const bool ok = strict ? a.mean < b.mean : a.mean <= b.mean;
      if (!ok || a.count == 0 || b.count == 0) bad.push_back(what + " violated at " + num(v) + " dB");
      sep += separated_below(a, b);
    }
    if (sep < 2) bad.push_back(what + ": +-1 SE bands separated at " + std::to_string(sep) + " of 3 points");
  };
  ordered(s, Scheme::Proposed, s, Scheme::FixedRandom, true, "proposed < fixed-random");
  ordered(s, Scheme::Proposed, s, Scheme::AntennaSelection, true, "proposed < AS");
  ordered(s, Scheme::Proposed, s05, Scheme::Proposed, false, "nu=0.1 <= nu=0.05");
  std::string detail = std::to_string(failed_runs(s) + failed_runs(s05)) + " failed runs";
  for (const auto& b : bad) detail += "; " + b;
  report("AC6", bad.empty(), detail);
}

void ac7(RunCache& cache, const fs::path& out) {
  const std::vector<double> a = {1, 2, 3};
  const SweepRun s = sweep("sweep_a", ScenarioConfig::desk(), "a", a,
                           {Scheme::Proposed, Scheme::AntennaSelection, Scheme::FixedRandom}, cache, out);
  std::vector<std::string> bad;
  for (size_t i = 1; i < a.size(); ++i) {
    const SummaryRow &p0 = row_of(s, Scheme::Proposed, a[i - 1]), &p1 = row_of(s, Scheme::Proposed, a[i]);
    if (p1.count == 0 || p1.mean > p0.mean * (1 + 1e-6)) bad.push_back("proposed increases at a=" + num(a[i]));
  }
  for (Scheme sch : {Scheme::AntennaSelection, Scheme::FixedRandom})
    for (size_t i = 0; i < a.size(); ++i)
      for (size_t j = i + 1; j < a.size(); ++j) {
        const SummaryRow &x = row_of(s, sch, a[i]), &y = row_of(s, sch, a[j]);
        if (std::abs(x.mean - y.mean) > x.se + y.se + 1e-9 * std::abs(x.mean))
          bad.push_back(to_string(sch) + " not flat between a=" + num(a[i]) + " and a=" + num(a[j]));
      }
  std::string detail = std::to_string(failed_runs(s)) + " failed runs";
  for (const auto& b : bad) detail += "; " + b;
  report("AC7", bad.empty(), detail);
}

void ac8(RunCache& cache, const fs::path& out) {
  const std::vector<double> psi = {30, 40, 50};
  const std::vector<Scheme> schemes = {Scheme::Proposed, Scheme::AntennaSelection, Scheme::FixedRandom};
  const SweepRun s = sweep("sweep_psi", ScenarioConfig::desk(), "psi", psi, schemes, cache, out);
  std::vector<std::string> bad;
  for (Scheme sch : schemes)
    for (size_t i = 1; i < psi.size(); ++i)
      if (!(row_of(s, sch, psi[i]).mean > row_of(s, sch, psi[i - 1]).mean))
        bad.push_back(to_string(sch) + " not increasing at " + num(psi[i]) + " m");
  // least-squares slope of log power against log range
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double v : psi) {
    const double x = std::log(v), y = std::log(row_of(s, Scheme::Proposed, v).mean);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(psi.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  if (!(slope >= 3.0 && slope <= 5.0)) bad.push_back("log-log slope " + num(slope) + " outside [3, 5]");
  std::string detail = "proposed log-log slope " + num(slope, 6) + ", " + std::to_string(failed_runs(s)) + " failed runs";
  for (const auto& b : bad) detail += "; " + b;
  report("AC8", bad.empty(), detail);
}

void ac9() {
  struct Suite {
    const char* binary;
    const char* filter;
  };
  const Suite suites[] = {
      {"test_grid_geometry", "Glover.ProductIdentityByExhaustion"},
      {"test_optimizer", "SProcedure.BoundarySamplingSoundness"},
      {"test_optimizer", "ScaMinorant.*"},
      {"test_conic", "HermitianEmbed.PsdEquivalenceOnRandomMatrices"},
      {"test_optimizer", "SchurBlock.*"},
  };
  bool pass = true;
  std::string detail;
  for (const auto& s : suites) {
    const fs::path bin = fs::path(ISAC_UNIT_DIR) / s.binary;
    // an empty filter match also exits 0, so require a nonzero PASSED count in the log
    const fs::path log = fs::temp_directory_path() / (std::string("isac_ac9_") + s.binary + ".log");
    const std::string cmd =
        "\"" + bin.string() + "\" --gtest_filter=" + s.filter + " > \"" + log.string() + "\" 2>&1";
    bool ok = fs::exists(bin) && std::system(cmd.c_str()) == 0;
    std::ifstream in(log);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ok = ok && std::regex_search(text, std::regex(R"(\[  PASSED  \] [1-9])"));
    pass = pass && ok;
    detail += std::string(detail.empty() ? "" : ", ") + s.filter + (ok ? " ok" : " FAILED");
  }
  report("AC9", pass, detail);
}

void ac10(RunCache& cache, const fs::path& out) {
  const SweepRun s = sweep("timescale", ScenarioConfig::desk(), "gamma_th_db", {10.0},
                           {Scheme::Proposed, Scheme::PerSnapshot}, cache, out);
  const SummaryRow &p = row_of(s, Scheme::Proposed, 10), &b = row_of(s, Scheme::PerSnapshot, 10);
  const double gap = p.mean > 0 ? (p.mean - b.mean) / p.mean : INFINITY;
  const bool ok = b.count > 0 && p.count > 0 && b.mean <= p.mean * (1 + 1e-6) && gap <= 0.10;
  report("AC10", ok,
         "per-snapshot mean " + num(b.mean, 10) + " W, proposed mean " + num(p.mean, 10) + " W, gap " +
             num(100 * gap, 4) + "% (soft band 10%)",
         true);
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  std::optional<fs::path> cache_dir;
  if (const char* c = std::getenv("ISAC_ACCEPTANCE_CACHE"); c && *c) cache_dir = fs::path(c);
  RunCache cache(cache_dir);
  std::cout << "acceptance suite (desk profile, outputs in " << out.string() << ")" << std::endl;

  try {
    ac9();
    ac1();
    const std::vector<DeskRun> runs = desk_runs(20);
    ac2(runs);
    ac3(runs);
    ac4(runs);
    ac5();
    ac6(cache, out);
    ac7(cache, out);
    ac8(cache, out);
    ac10(cache, out);
  } catch (const std::exception& e) {
    std::cout << "internal error: " << e.what() << std::endl;
    return 1;
  }

  std::cout << "\nsummary\n";
  int hard_fail = 0;
  for (const auto& l : g_lines) {
    std::cout << "  " << l.id << " "
              << (l.soft ? (l.pass ? "SOFT-PASS" : "SOFT-FAIL (logged)") : (l.pass ? "PASS" : "FAIL")) << "\n";
    hard_fail += !l.soft && !l.pass;
  }
  std::cout << hard_fail << " hard criteria failed, total " << static_cast<long>(elapsed()) << " s" << std::endl;
  return hard_fail ? 1 : 0;
}
