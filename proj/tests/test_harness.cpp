#include "isac/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace isac;
namespace fs = std::filesystem;

namespace {

ScenarioConfig small_config() {
  ScenarioConfig c = ScenarioConfig::desk();
  c.N = 2;
  c.K = 1;
  c.Q = 2;
  c.a = 1.0 / 3.0;
  c.mse_ref_fraction = 0.55;
  return c;
}

ResultRecord synthetic(Scheme s, double value, std::uint64_t seed, double power, bool ok = true) {
  ResultRecord r;
  r.scheme = s;
  r.value = value;
  r.seed = seed;
  r.feasible = ok;
  r.verified = ok;
  r.power = ok ? power : 0.0;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("isac_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(SampleScenario, DeterministicAndWithinRanges) {
  const ScenarioConfig c = ScenarioConfig::desk();
  const Scenario a = sample_scenario(c, 4), b = sample_scenario(c, 4);
  EXPECT_EQ(a.channels.per_position, b.channels.per_position);
  for (const auto& u : a.users) {
    EXPECT_GE(u.distance, 10.0);
    EXPECT_LE(u.distance, 50.0);
  }
  EXPECT_EQ(c.psi, 50.0);
  EXPECT_EQ(a.M(), 49);
  EXPECT_NE(sample_scenario(c, 5).channels.per_position, a.channels.per_position);
}

TEST(Config, MapRoundTripPreservesHash) {
  ScenarioConfig c = small_config();
  c.gamma_th_db = 12.5;
  c.omega_av = {1.0, 0.3};
  EXPECT_EQ(config_from_map(c.to_map()).hash(), c.hash());
  std::istringstream in("N = 3\n# comment\npsi=40\n");
  const ScenarioConfig l = load_config(in);
  EXPECT_EQ(l.N, 3);
  EXPECT_EQ(l.psi, 40.0);
  EXPECT_THROW(c.set("no_such_key", "1"), std::invalid_argument);
}

TEST(Axis, AliasesAndApply) {
  EXPECT_EQ(axis_key("gamma_th"), "gamma_th_db");
  EXPECT_EQ(axis_key("d"), "step");
  EXPECT_EQ(axis_key("Psi"), "psi");
  EXPECT_EQ(axis_key("a"), "a");
  const ScenarioConfig c = apply_axis(ScenarioConfig::desk(), "gamma_th", 15.0);
  EXPECT_EQ(c.gamma_th_db, 15.0);
  EXPECT_EQ(apply_axis(ScenarioConfig::desk(), "N", 3.0).N, 3);
  EXPECT_EQ(apply_axis(ScenarioConfig::desk(), "a", 1.0 / 3.0).a, 1.0 / 3.0);
}

TEST(RunKey, IgnoresFieldsTheSchemeDoesNotUse) {
  ScenarioConfig a = ScenarioConfig::desk(), b = a;
  b.a = 3.0;
  EXPECT_EQ(run_key(a, Scheme::AntennaSelection), run_key(b, Scheme::AntennaSelection));
  EXPECT_NE(run_key(a, Scheme::Proposed), run_key(b, Scheme::Proposed));
  b = a;
  b.gamma_th_db = 5.0;
  EXPECT_NE(run_key(a, Scheme::AntennaSelection), run_key(b, Scheme::AntennaSelection));
  b = a;
  b.tau_init = 0.5;
  EXPECT_EQ(run_key(a, Scheme::FixedRandom), run_key(b, Scheme::FixedRandom));
}

TEST(Summary, SingleRecordAndEqualPowersHaveZeroError) {
  auto rows = summarize({synthetic(Scheme::Proposed, 5, 1, 2.0)});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].count, 1);
  EXPECT_EQ(rows[0].mean, 2.0);
  EXPECT_EQ(rows[0].se, 0.0);
  rows = summarize({synthetic(Scheme::Proposed, 5, 1, 3.0), synthetic(Scheme::Proposed, 5, 2, 3.0)});
  EXPECT_EQ(rows[0].se, 0.0);
}

TEST(Summary, KnownMeanAndStandardError) {
  // powers 1, 2, 3, 6: mean 3, sample variance 14 / 3, SE sqrt(14 / 12)
  std::vector<ResultRecord> recs;
  const double p[] = {1, 2, 3, 6};
  for (int i = 0; i < 4; ++i) recs.push_back(synthetic(Scheme::AntennaSelection, 10, i + 1, p[i]));
  recs.push_back(synthetic(Scheme::AntennaSelection, 10, 9, 0, false));
  recs.push_back(synthetic(Scheme::Proposed, 10, 1, 7));
  const auto rows = summarize(recs);
  const SummaryRow* as = find_row(rows, Scheme::AntennaSelection, 10);
  ASSERT_NE(as, nullptr);
  EXPECT_DOUBLE_EQ(as->mean, 3.0);
  EXPECT_NEAR(as->se, std::sqrt(14.0 / 12.0), 1e-15);
  EXPECT_EQ(as->count, 4);
  EXPECT_EQ(as->failed, 1);
  EXPECT_EQ(find_row(rows, Scheme::Proposed, 10)->mean, 7.0);
  EXPECT_EQ(find_row(rows, Scheme::FixedRandom, 10), nullptr);
}

TEST(Convergence, Flags) {
  for (const auto& r : convergence_report({5, 5, 5})) {
    EXPECT_EQ(r.rel_change, 0.0);
    EXPECT_FALSE(r.flagged);
  }
  for (const auto& r : convergence_report({5, 4, 3.5, 3.4})) EXPECT_FALSE(r.flagged);
  const auto rows = convergence_report({5, 4, 4.1, 4.0});
  EXPECT_TRUE(rows[2].flagged);
  EXPECT_NEAR(rows[2].rel_change, 0.025, 1e-12);
  EXPECT_FALSE(rows[3].flagged);
}

TEST(Units, WattsToDbm) {
  EXPECT_DOUBLE_EQ(watts_to_dbm(1.0), 30.0);
  EXPECT_NEAR(watts_to_dbm(1e-3), 0.0, 1e-12);
}

TEST(Records, JsonRoundTripWithDecisions) {
  ResultRecord r = synthetic(Scheme::FixedRandom, 2.0, 7, 1.5);
  r.axis = "a";
  r.trace = {3, 2, 1.5};
  r.selections = {{0, 8}};
  r.config = small_config().to_map();
  r.diagnostics.violations = {"x"};
  SnapshotDecision d;
  d.t = 2.5e-3;
  d.rho0 = 0.7;
  d.xi = Vec::Constant(1, 0.4);
  d.lambda = Vec::Constant(1, 0.32);
  d.iota = Vec::Constant(1, 1e-3);
  CMat W(2, 2);
  W << 1.0, cd(0.2, -0.1), cd(0.2, 0.1), 0.5;
  d.W = {W};
  d.R = CMat::Identity(2, 2);
  r.decisions = {d, d};
  const ResultRecord back = record_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(to_json(back), to_json(r));
  EXPECT_EQ(back.decisions[1].W[0], W);
  EXPECT_EQ(back.decisions[0].t, 2.5e-3);
}

TEST(Records, FilesRoundTrip) {
  const fs::path dir = scratch("files");
  std::vector<ResultRecord> recs = {synthetic(Scheme::Proposed, 5, 1, 2.0), synthetic(Scheme::Proposed, 10, 1, 4.0)};
  write_jsonl(dir / "r.jsonl", recs);
  write_jsonl(dir / "r.jsonl", {synthetic(Scheme::Proposed, 15, 1, 8.0)}, true);
  const auto back = read_jsonl(dir / "r.jsonl");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[2].power, 8.0);

  recs.push_back(back[2]);
  const auto rows = summarize(recs);
  write_summary_csv(dir / "s.csv", "gamma_th_db", rows);
  std::ifstream csv(dir / "s.csv");
  std::string header, line;
  std::getline(csv, header);
  EXPECT_NE(header.find("gamma_th_db"), std::string::npos);
  int lines = 0;
  while (std::getline(csv, line)) lines += !line.empty();
  EXPECT_EQ(lines, 3);

  write_plot_data(dir / "p.dat", "gamma_th_db", rows);
  std::ifstream plot(dir / "p.dat");
  std::stringstream ss;
  ss << plot.rdbuf();
  EXPECT_NE(ss.str().find("proposed"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cache, PersistsAcrossInstances) {
  const fs::path dir = scratch("cache");
  const ResultRecord r = synthetic(Scheme::Proposed, 0, 3, 9.0);
  {
    RunCache c(dir);
    c.store("k", r);
  }
  RunCache c2(dir);
  const auto hit = c2.find("k");
  ASSERT_TRUE(hit.has_value());
  EXPECT_EQ(hit->power, 9.0);
  EXPECT_FALSE(c2.find("other").has_value());
  fs::remove_all(dir);
}

TEST(Sweep, DeterministicAcrossWorkerCountsAndVerified) {
  SweepSpec spec;
  spec.axis = "gamma_th";
  spec.values = {5.0, 10.0};
  spec.schemes = {Scheme::FixedRandom};
  spec.seeds = 2;
  SweepOptions one, two;
  two.workers = 2;
  const auto a = run_sweep(spec, small_config(), one);
  const auto b = run_sweep(spec, small_config(), two);
  ASSERT_EQ(a.size(), 4u);
  ASSERT_EQ(b.size(), 4u);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].value, b[i].value);
    EXPECT_EQ(a[i].seed, b[i].seed);
    EXPECT_EQ(a[i].feasible, b[i].feasible);
    EXPECT_NEAR(a[i].power, b[i].power, 1e-9 * std::max(1.0, a[i].power));
    EXPECT_TRUE(a[i].ok()) << a[i].failure;
  }
  EXPECT_EQ(a[0].value, 5.0);
  EXPECT_EQ(a[3].value, 10.0);
  EXPECT_EQ(std::stod(a[3].config.at("gamma_th_db")), 10.0);
}

TEST(Reverify, StoredRecordPassesAndTamperingFails) {
  const ResultRecord r = run_one(small_config(), Scheme::Proposed, 3, {500, 20000});
  ASSERT_TRUE(r.ok()) << r.failure;
  ASSERT_EQ(r.decisions.size(), 2u);
  const ResultRecord stored = record_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_TRUE(reverify_record(stored, {500, 20000}).ok());

  ResultRecord bad = stored;
  bad.power *= 0.9;
  EXPECT_FALSE(reverify_record(bad, {500, 20000}).verified);
  bad = stored;
  bad.decisions[0].R *= 0.5;
  bad.decisions[0].W[0] *= 0.5;
  EXPECT_FALSE(reverify_record(bad, {500, 20000}).verified);
}

TEST(RunOne, ReportsErrorsAsInfeasible) {
  ScenarioConfig c = ScenarioConfig::desk();
  const ResultRecord r = run_one(c, Scheme::BruteForce, 1);  // M = 49 exceeds the enumeration limit
  EXPECT_FALSE(r.feasible);
  EXPECT_NE(r.failure.find("error"), std::string::npos);
}
