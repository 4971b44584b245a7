#pragma once

// Sweeps over one configuration axis, result records, persistence and summaries.

#include "isac/baselines.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace isac {

struct SweepSpec {
  std::string axis;  // a ScenarioConfig key or an alias (gamma_th, d)
  std::vector<double> values;
  std::vector<Scheme> schemes;
  int seeds = 10;
  std::uint64_t first_seed = 1;
};

// Map axis aliases to config keys and set the value.
std::string axis_key(const std::string& axis);
ScenarioConfig apply_axis(ScenarioConfig cfg, const std::string& axis, double value);

struct Diagnostics {
  double min_rank_one_ratio = 1.0;
  bool randomized = false;
  double min_rate_margin = 0.0;
  double max_outage = 0.0;
  double max_mse_ratio = 0.0;
  double min_gain_ratio = 0.0;
  int candidates = 0;
  std::vector<std::string> violations;
};

struct ResultRecord {
  std::string config_hash;  // hash of the fields the scheme depends on
  Scheme scheme = Scheme::Proposed;
  std::string axis;
  double value = 0.0;
  std::uint64_t seed = 0;
  bool feasible = false;  // the solver returned a solution
  bool verified = false;  // and it passed re-verification
  double power = 0.0;     // watts, zero unless feasible
  std::string failure;
  std::vector<double> trace;
  int iterations = 0;
  double seconds = 0.0;
  Diagnostics diagnostics;
  std::vector<std::vector<int>> selections;
  Decisions decisions;  // covariances and durations, so the record can be re-verified later
  std::map<std::string, std::string> config;

  bool ok() const { return feasible && verified; }
};

nlohmann::json to_json(const ResultRecord& r);
ResultRecord record_from_json(const nlohmann::json& j);

struct VerifyOptions {
  int csi_samples = 1000;
  int rcs_samples = 10000;
};

// Hash of the configuration with the fields the scheme ignores reset.
std::string run_key(const ScenarioConfig& cfg, Scheme scheme);

// Solve one (config, scheme, seed) and re-verify the result.
ResultRecord run_one(const ScenarioConfig& cfg, Scheme scheme, std::uint64_t seed, const VerifyOptions& vo = {});

// Re-verification of a scheme result against the nonconvex constraints.
FeasibilityReport verify_result(const Scenario& sc, const BaselineResult& r, const VerifyOptions& vo,
                                std::uint64_t seed);

// Rebuild the scenario from the record's configuration and seed and re-check
// its stored decisions. Returns the record with verification fields replaced.
ResultRecord reverify_record(const ResultRecord& rec, const VerifyOptions& vo);

ScenarioConfig config_from_map(const std::map<std::string, std::string>& m);

// Thread-safe record cache, optionally backed by one JSON file per run.
class RunCache {
 public:
  explicit RunCache(std::optional<std::filesystem::path> dir = std::nullopt);
  std::optional<ResultRecord> find(const std::string& key);
  void store(const std::string& key, const ResultRecord& r);
  static std::string key(const ScenarioConfig& cfg, Scheme scheme, std::uint64_t seed);

 private:
  std::optional<std::filesystem::path> dir_;
  std::map<std::string, ResultRecord> mem_;
  std::mutex mu_;
};

struct SweepOptions {
  int workers = 1;
  VerifyOptions verify;
  RunCache* cache = nullptr;
  bool progress = false;  // one line per finished run on stderr
};

// Records sorted by (value, seed, scheme).
std::vector<ResultRecord> run_sweep(const SweepSpec& spec, const ScenarioConfig& base, const SweepOptions& opt = {});

struct SummaryRow {
  Scheme scheme = Scheme::Proposed;
  double value = 0.0;
  double mean = 0.0;  // watts, over feasible and verified runs
  double se = 0.0;    // standard error of the mean
  int count = 0;
  int failed = 0;
};

std::vector<SummaryRow> summarize(const std::vector<ResultRecord>& records);
const SummaryRow* find_row(const std::vector<SummaryRow>& rows, Scheme s, double value);

void write_jsonl(const std::filesystem::path& path, const std::vector<ResultRecord>& records, bool append = false);
std::vector<ResultRecord> read_jsonl(const std::filesystem::path& path);
void write_summary_csv(const std::filesystem::path& path, const std::string& axis, const std::vector<SummaryRow>& rows);
// Whitespace-separated table, one block per scheme separated by blank lines.
void write_plot_data(const std::filesystem::path& path, const std::string& axis, const std::vector<SummaryRow>& rows);

struct ConvergenceRow {
  int iteration = 0;
  double objective = 0.0;
  double rel_change = 0.0;  // (F_s - F_{s-1}) / F_{s-1}
  bool flagged = false;     // increase beyond the tolerance
};

std::vector<ConvergenceRow> convergence_report(const std::vector<double>& trace, double tol = 1e-6);

double watts_to_dbm(double w);

}  // namespace isac
