// Command-line front end: solve, sweep, baseline, verify, oracle.
//
// Exit codes: 0 every run feasible and verified, 2 some run infeasible or
// failing re-verification, 1 internal error.

#include "isac/harness.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace isac;

namespace {

struct Common {
  std::string config;
  std::string profile = "desk";
  std::uint64_t seed = 1;
  int seeds = 0;  // 0: the configuration's value
  std::string out;
  int workers = 1;
  int csi_samples = 1000;
  int rcs_samples = 10000;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key=value configuration file (ScenarioConfig field names)");
  app->add_option("--profile", c.profile, "base profile")->check(CLI::IsMember({"desk", "paper"}));
  app->add_option("--seed", c.seed, "first seed");
  app->add_option("--seeds", c.seeds, "number of seeds");
  app->add_option("--out", c.out, "output directory (default: $ISAC_OUT_DIR or ./isac_out)");
  app->add_option("--workers", c.workers, "concurrent runs")->check(CLI::PositiveNumber);
  app->add_option("--csi-samples", c.csi_samples, "CSI error draws per user in re-verification");
  app->add_option("--rcs-samples", c.rcs_samples, "RCS draws per snapshot in re-verification");
}

ScenarioConfig base_config(const Common& c) {
  ScenarioConfig cfg = c.profile == "paper" ? ScenarioConfig::paper() : ScenarioConfig::desk();
  if (c.profile == "paper")
    std::cerr << "warning: the full profile (N=" << cfg.N << ", M up to " << cfg.grid_cap
              << ") can take hours per run\n";
  if (!c.config.empty()) cfg = load_config_file(c.config, cfg);
  return cfg;
}

fs::path out_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("ISAC_OUT_DIR"); env && *env) return env;
  return "isac_out";
}

int seed_count(const Common& c, const ScenarioConfig& cfg) { return c.seeds > 0 ? c.seeds : cfg.seeds; }

std::vector<Scheme> parse_schemes(const std::vector<std::string>& names) {
  std::vector<Scheme> out;
  for (const auto& n : names) out.push_back(scheme_from_string(n));
  return out;
}

void print_records(const std::vector<ResultRecord>& recs) {
  std::cout << std::left << std::setw(14) << "scheme" << std::setw(10) << "value" << std::setw(6) << "seed"
            << std::setw(16) << "power_w" << std::setw(10) << "dBm" << std::setw(8) << "ok" << "note\n";
  for (const auto& r : recs) {
    std::cout << std::left << std::setw(14) << to_string(r.scheme) << std::setw(10) << r.value << std::setw(6)
              << r.seed << std::setw(16) << r.power << std::setw(10) << std::setprecision(5)
              << (r.power > 0 ? watts_to_dbm(r.power) : 0.0) << std::setw(8) << (r.ok() ? "yes" : "no")
              << r.failure << std::setprecision(6) << "\n";
    for (const auto& v : r.diagnostics.violations) std::cout << "    violation: " << v << "\n";
  }
}

int status_of(const std::vector<ResultRecord>& recs) {
  for (const auto& r : recs)
    if (!r.ok()) return 2;
  return 0;
}

void persist(const fs::path& dir, const std::string& stem, const std::string& axis,
             const std::vector<ResultRecord>& recs) {
  fs::create_directories(dir);
  write_jsonl(dir / (stem + ".jsonl"), recs, true);
  const auto rows = summarize(recs);
  write_summary_csv(dir / (stem + "_summary.csv"), axis, rows);
  write_plot_data(dir / (stem + "_plot.dat"), axis, rows);
  std::cerr << "wrote " << (dir / (stem + ".jsonl")).string() << ", " << stem << "_summary.csv, " << stem
            << "_plot.dat\n";
}

std::vector<ResultRecord> run_seeds(const ScenarioConfig& cfg, const Common& c, const std::vector<Scheme>& schemes,
                                    const fs::path& dir) {
  SweepSpec spec;
  spec.schemes = schemes;
  spec.values = {0.0};
  spec.seeds = seed_count(c, cfg);
  spec.first_seed = c.seed;
  RunCache cache(dir / "cache");
  SweepOptions opt;
  opt.workers = c.workers;
  opt.verify = {c.csi_samples, c.rcs_samples};
  opt.cache = &cache;
  opt.progress = true;
  return run_sweep(spec, cfg, opt);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Movable-antenna ISAC resource allocation"};
  app.require_subcommand(1);

  Common solve_c, sweep_c, base_c, verify_c, oracle_c;
  auto* solve = app.add_subcommand("solve", "run the proposed scheme on one seed");
  add_common(solve, solve_c);

  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep over one configuration axis");
  add_common(sweep, sweep_c);
  std::string axis;
  std::vector<double> values;
  std::vector<std::string> schemes = {"proposed", "as", "fixed-random"};
  sweep->add_option("--axis", axis, "configuration key or alias (gamma_th, a, N, psi, nu, mu, d)")->required();
  sweep->add_option("--values", values, "axis values")->required()->delimiter(',');
  sweep->add_option("--schemes", schemes, "proposed, as, fixed-random, per-snapshot, brute-force")->delimiter(',');

  auto* baseline = app.add_subcommand("baseline", "run comparison schemes over seeds");
  add_common(baseline, base_c);
  std::vector<std::string> base_schemes = {"as", "fixed-random", "per-snapshot"};
  baseline->add_option("--schemes", base_schemes, "schemes to run")->delimiter(',');

  auto* verify = app.add_subcommand(
      "verify", "re-check stored records (--input) against the original constraints; without --input, solve one seed");
  add_common(verify, verify_c);
  std::string verify_input;
  verify->add_option("--input", verify_input, "JSONL file written by solve, sweep, baseline or oracle")
      ->check(CLI::ExistingFile);
  verify_c.csi_samples = 10000;
  verify_c.rcs_samples = 100000;

  auto* oracle = app.add_subcommand("oracle", "compare the proposed scheme with brute-force positions");
  add_common(oracle, oracle_c);

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) {
      const ScenarioConfig cfg = base_config(solve_c);
      const ResultRecord rec =
          run_one(cfg, Scheme::Proposed, solve_c.seed, {solve_c.csi_samples, solve_c.rcs_samples});
      print_records({rec});
      std::cout << "\nAO convergence\n iter  objective_w        rel_change\n";
      for (const auto& row : convergence_report(rec.trace))
        std::cout << " " << std::setw(4) << row.iteration << "  " << std::setw(18) << std::setprecision(10)
                  << row.objective << " " << std::setw(12) << std::setprecision(3) << row.rel_change
                  << (row.flagged ? "  INCREASE" : "") << "\n";
      if (!rec.selections.empty()) {
        const PositionGrid grid = build_grid(cfg.a, cfg.wavelength, cfg.step, cfg.grid_cap);
        std::cout << "positions (m):";
        for (int m : rec.selections.front())
          std::cout << " (" << grid.positions[m].x << ", " << grid.positions[m].y << ")";
        std::cout << "\n";
      }
      persist(out_dir(solve_c), "solve", "", {rec});
      return status_of({rec});
    }
    if (sweep->parsed()) {
      const ScenarioConfig cfg = base_config(sweep_c);
      const fs::path dir = out_dir(sweep_c);
      SweepSpec spec;
      spec.axis = axis;
      spec.values = values;
      spec.schemes = parse_schemes(schemes);
      spec.seeds = seed_count(sweep_c, cfg);
      spec.first_seed = sweep_c.seed;
      RunCache cache(dir / "cache");
      SweepOptions opt;
      opt.workers = sweep_c.workers;
      opt.verify = {sweep_c.csi_samples, sweep_c.rcs_samples};
      opt.cache = &cache;
      opt.progress = true;
      const auto recs = run_sweep(spec, cfg, opt);
      persist(dir, "sweep_" + axis_key(axis), axis_key(axis), recs);
      std::cout << "scheme,value,mean_w,se_w,count,failed\n";
      for (const auto& row : summarize(recs))
        std::cout << to_string(row.scheme) << "," << row.value << "," << row.mean << "," << row.se << ","
                  << row.count << "," << row.failed << "\n";
      return status_of(recs);
    }
    if (baseline->parsed()) {
      const ScenarioConfig cfg = base_config(base_c);
      const fs::path dir = out_dir(base_c);
      const auto recs = run_seeds(cfg, base_c, parse_schemes(base_schemes), dir);
      print_records(recs);
      persist(dir, "baseline", "", recs);
      return status_of(recs);
    }
    if (verify->parsed() && !verify_input.empty()) {
      const VerifyOptions vo{verify_c.csi_samples, verify_c.rcs_samples};
      std::vector<ResultRecord> checked;
      for (const auto& rec : read_jsonl(verify_input)) {
        checked.push_back(rec.feasible ? reverify_record(rec, vo) : rec);
        const ResultRecord& r = checked.back();
        std::cerr << to_string(r.scheme) << " seed " << r.seed << ": " << (r.ok() ? "ok" : "FAILED") << "\n";
      }
      print_records(checked);
      persist(out_dir(verify_c), "verify", checked.empty() ? "" : checked.front().axis, checked);
      return status_of(checked);
    }
    if (verify->parsed()) {
      const ScenarioConfig cfg = base_config(verify_c);
      const ResultRecord rec =
          run_one(cfg, Scheme::Proposed, verify_c.seed, {verify_c.csi_samples, verify_c.rcs_samples});
      print_records({rec});
      const Diagnostics& d = rec.diagnostics;
      std::cout << "worst sampled rate margin " << d.min_rate_margin << " bit/s/Hz\n"
                << "largest empirical outage  " << d.max_outage << "\n"
                << "largest beam-MSE ratio    " << d.max_mse_ratio << "\n"
                << "smallest gain/floor ratio " << d.min_gain_ratio << "\n"
                << "smallest rank-one ratio   " << d.min_rank_one_ratio << (d.randomized ? " (randomized)" : "")
                << "\n";
      persist(out_dir(verify_c), "verify", "", {rec});
      return status_of({rec});
    }
    if (oracle->parsed()) {
      const ScenarioConfig cfg = base_config(oracle_c);
      const fs::path dir = out_dir(oracle_c);
      const auto recs = run_seeds(cfg, oracle_c, {Scheme::Proposed, Scheme::BruteForce}, dir);
      print_records(recs);
      std::cout << "\nseed  proposed/brute-force\n";
      for (size_t i = 0; i + 1 < recs.size(); i += 2)
        if (recs[i].ok() && recs[i + 1].ok())
          std::cout << recs[i].seed << "  " << recs[i].power / recs[i + 1].power << "\n";
      persist(dir, "oracle", "", recs);
      return status_of(recs);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
