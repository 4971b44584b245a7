#include "isac/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace isac {

using nlohmann::json;

std::string axis_key(const std::string& axis) {
  static const std::map<std::string, std::string> alias = {
      {"gamma_th", "gamma_th_db"}, {"gamma", "gamma_th_db"}, {"d", "step"}, {"Psi", "psi"}};
  const auto it = alias.find(axis);
  return it == alias.end() ? axis : it->second;
}

ScenarioConfig apply_axis(ScenarioConfig cfg, const std::string& axis, double value) {
  std::ostringstream os;
  os << std::setprecision(17) << value;
  cfg.set(axis_key(axis), os.str());
  return cfg;
}

double watts_to_dbm(double w) { return w > 0 ? 10.0 * std::log10(w) + 30.0 : -std::numeric_limits<double>::infinity(); }

// ---------------------------------------------------------------- records

namespace {

json matrix_json(const CMat& X) {
  json re = json::array(), im = json::array();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    std::vector<double> a(X.cols()), b(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      a[j] = X(i, j).real();
      b[j] = X(i, j).imag();
    }
    re.push_back(a);
    im.push_back(b);
  }
  return json{{"re", re}, {"im", im}};
}

CMat matrix_from_json(const json& j) {
  const auto re = j.at("re").get<std::vector<std::vector<double>>>();
  const auto im = j.at("im").get<std::vector<std::vector<double>>>();
  const Eigen::Index n = static_cast<Eigen::Index>(re.size());
  const Eigen::Index m = n ? static_cast<Eigen::Index>(re[0].size()) : 0;
  CMat X(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < m; ++k) X(i, k) = cd(re[i][k], im[i][k]);
  return X;
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

json decisions_json(const Decisions& ds) {
  json out = json::array();
  for (const auto& d : ds) {
    json W = json::array();
    for (const auto& w : d.W) W.push_back(matrix_json(w));
    out.push_back({{"t", d.t},
                   {"rho0", d.rho0},
                   {"xi", to_std(d.xi)},
                   {"lambda", to_std(d.lambda)},
                   {"iota", to_std(d.iota)},
                   {"W", W},
                   {"R", matrix_json(d.R)}});
  }
  return out;
}

Decisions decisions_from_json(const json& j) {
  Decisions ds;
  for (const auto& e : j) {
    SnapshotDecision d;
    d.t = e.at("t").get<double>();
    d.rho0 = e.at("rho0").get<double>();
    d.xi = to_vec(e.at("xi").get<std::vector<double>>());
    d.lambda = to_vec(e.at("lambda").get<std::vector<double>>());
    d.iota = to_vec(e.at("iota").get<std::vector<double>>());
    for (const auto& w : e.at("W")) d.W.push_back(matrix_from_json(w));
    d.R = matrix_from_json(e.at("R"));
    ds.push_back(std::move(d));
  }
  return ds;
}

}  // namespace

json to_json(const ResultRecord& r) {
  const Diagnostics& d = r.diagnostics;
  return json{{"config_hash", r.config_hash},
              {"scheme", to_string(r.scheme)},
              {"axis", r.axis},
              {"value", r.value},
              {"seed", r.seed},
              {"feasible", r.feasible},
              {"verified", r.verified},
              {"power_w", r.power},
              {"power_dbm", r.power > 0 ? watts_to_dbm(r.power) : 0.0},
              {"failure", r.failure},
              {"trace", r.trace},
              {"trace_length", r.trace.size()},
              {"iterations", r.iterations},
              {"seconds", r.seconds},
              {"diagnostics",
               {{"min_rank_one_ratio", d.min_rank_one_ratio},
                {"randomized", d.randomized},
                {"min_rate_margin", d.min_rate_margin},
                {"max_outage", d.max_outage},
                {"max_mse_ratio", d.max_mse_ratio},
                {"min_gain_ratio", d.min_gain_ratio},
                {"candidates", d.candidates},
                {"violations", d.violations}}},
              {"selections", r.selections},
              {"decisions", decisions_json(r.decisions)},
              {"config", r.config}};
}

ResultRecord record_from_json(const json& j) {
  ResultRecord r;
  r.config_hash = j.at("config_hash").get<std::string>();
  r.scheme = scheme_from_string(j.at("scheme").get<std::string>());
  r.axis = j.value("axis", "");
  r.value = j.value("value", 0.0);
  r.seed = j.at("seed").get<std::uint64_t>();
  r.feasible = j.at("feasible").get<bool>();
  r.verified = j.at("verified").get<bool>();
  r.power = j.at("power_w").get<double>();
  r.failure = j.value("failure", "");
  r.trace = j.value("trace", std::vector<double>{});
  r.iterations = j.value("iterations", 0);
  r.seconds = j.value("seconds", 0.0);
  if (j.contains("diagnostics")) {
    const json& d = j["diagnostics"];
    r.diagnostics.min_rank_one_ratio = d.value("min_rank_one_ratio", 1.0);
    r.diagnostics.randomized = d.value("randomized", false);
    r.diagnostics.min_rate_margin = d.value("min_rate_margin", 0.0);
    r.diagnostics.max_outage = d.value("max_outage", 0.0);
    r.diagnostics.max_mse_ratio = d.value("max_mse_ratio", 0.0);
    r.diagnostics.min_gain_ratio = d.value("min_gain_ratio", 0.0);
    r.diagnostics.candidates = d.value("candidates", 0);
    r.diagnostics.violations = d.value("violations", std::vector<std::string>{});
  }
  r.selections = j.value("selections", std::vector<std::vector<int>>{});
  if (j.contains("decisions")) r.decisions = decisions_from_json(j["decisions"]);
  r.config = j.value("config", std::map<std::string, std::string>{});
  return r;
}

// ---------------------------------------------------------------- single runs

std::string run_key(const ScenarioConfig& cfg, Scheme scheme) {
  ScenarioConfig c = cfg;
  const ScenarioConfig def;
  c.seeds = def.seeds;
  if (scheme == Scheme::AntennaSelection) {
    // the UPA does not use the movable-antenna grid or the position search
    c.a = def.a;
    c.step = def.step;
    c.grid_cap = def.grid_cap;
    c.init_area = def.init_area;
    c.fixed_area = def.fixed_area;
    c.window_radius = def.window_radius;
    c.full_window_max_m = def.full_window_max_m;
    c.tau_init = def.tau_init;
    c.tau_growth = def.tau_growth;
    c.sca_max_iters = def.sca_max_iters;
    c.ao_max_iters = def.ao_max_iters;
    c.eps_ao = def.eps_ao;
  } else if (scheme == Scheme::FixedRandom || scheme == Scheme::BruteForce) {
    c.init_area = def.init_area;
    c.window_radius = def.window_radius;
    c.full_window_max_m = def.full_window_max_m;
    c.tau_init = def.tau_init;
    c.tau_growth = def.tau_growth;
    c.sca_max_iters = def.sca_max_iters;
    c.ao_max_iters = def.ao_max_iters;
    c.eps_ao = def.eps_ao;
    if (scheme == Scheme::BruteForce) c.fixed_area = def.fixed_area;
  }
  return c.hash();
}

FeasibilityReport verify_result(const Scenario& sc, const BaselineResult& r, const VerifyOptions& vo,
                                std::uint64_t seed) {
  if (r.scheme != Scheme::PerSnapshot)
    return verify_solution(scheme_scenario(r.scheme, sc), r.selections.at(0), r.decisions, vo.csi_samples,
                           vo.rcs_samples, seed);
  FeasibilityReport agg;
  agg.min_rate_margin = std::numeric_limits<double>::infinity();
  agg.min_gain_ratio = std::numeric_limits<double>::infinity();
  for (int q = 0; q < sc.Q(); ++q) {
    const FeasibilityReport f = verify_solution(restrict_to_snapshot(sc, q), r.selections.at(q), {r.decisions.at(q)},
                                                vo.csi_samples, vo.rcs_samples, seed + q);
    agg.feasible = agg.feasible && f.feasible;
    for (const auto& v : f.violations) agg.violations.push_back("snapshot " + std::to_string(q) + ": " + v);
    agg.min_rate_margin = std::min(agg.min_rate_margin, f.min_rate_margin);
    agg.max_outage = std::max(agg.max_outage, f.max_outage);
    agg.max_mse_ratio = std::max(agg.max_mse_ratio, f.max_mse_ratio);
    agg.min_gain_ratio = std::min(agg.min_gain_ratio, f.min_gain_ratio);
  }
  return agg;
}

ResultRecord run_one(const ScenarioConfig& cfg, Scheme scheme, std::uint64_t seed, const VerifyOptions& vo) {
  ResultRecord rec;
  rec.config_hash = run_key(cfg, scheme);
  rec.scheme = scheme;
  rec.seed = seed;
  rec.config = cfg.to_map();
  try {
    const Scenario sc = sample_scenario(cfg, seed);
    BaselineResult r = run_scheme(scheme, sc);
    rec.seconds = r.seconds;
    rec.trace = r.trace;
    rec.iterations = r.iterations;
    rec.diagnostics.min_rank_one_ratio = r.min_rank_one_ratio;
    rec.diagnostics.randomized = r.randomized;
    rec.diagnostics.candidates = r.candidates;
    for (const auto& s : r.selections) rec.selections.push_back(s.index);
    rec.feasible = r.feasible;
    if (!r.feasible) {
      rec.failure = r.failure;
      return rec;
    }
    rec.power = r.power;
    rec.decisions = r.decisions;
    const FeasibilityReport f = verify_result(sc, r, vo, derive_seed(seed, 97));
    rec.verified = f.feasible;
    rec.diagnostics.min_rate_margin = f.min_rate_margin;
    rec.diagnostics.max_outage = f.max_outage;
    rec.diagnostics.max_mse_ratio = f.max_mse_ratio;
    rec.diagnostics.min_gain_ratio = f.min_gain_ratio;
    rec.diagnostics.violations = f.violations;
    if (!f.feasible) rec.failure = "re-verification failed";
  } catch (const std::exception& e) {
    rec.feasible = false;
    rec.verified = false;
    rec.power = 0.0;
    rec.failure = std::string("error: ") + e.what();
  }
  return rec;
}

ScenarioConfig config_from_map(const std::map<std::string, std::string>& m) {
  ScenarioConfig cfg = ScenarioConfig::desk();
  for (const auto& [k, v] : m) cfg.set(k, v);
  return cfg;
}

ResultRecord reverify_record(const ResultRecord& rec, const VerifyOptions& vo) {
  ResultRecord out = rec;
  out.verified = false;
  out.diagnostics.violations.clear();
  if (!rec.feasible) return out;
  try {
    const ScenarioConfig cfg = config_from_map(rec.config);
    const Scenario sc = sample_scenario(cfg, rec.seed);
    BaselineResult r;
    r.scheme = rec.scheme;
    r.decisions = rec.decisions;
    const Scenario own = scheme_scenario(rec.scheme, sc);
    for (const auto& idx : rec.selections) {
      SelectionState s;
      s.M = own.M();
      s.index = idx;
      r.selections.push_back(s);
    }
    const FeasibilityReport f = verify_result(sc, r, vo, derive_seed(rec.seed, 101));
    out.verified = f.feasible;
    out.diagnostics.min_rate_margin = f.min_rate_margin;
    out.diagnostics.max_outage = f.max_outage;
    out.diagnostics.max_mse_ratio = f.max_mse_ratio;
    out.diagnostics.min_gain_ratio = f.min_gain_ratio;
    out.diagnostics.violations = f.violations;
    if (rec.scheme != Scheme::PerSnapshot) {
      const double p = average_power(rec.decisions, sc.T_tot());
      if (std::abs(p - rec.power) > 1e-6 * std::max(1.0, std::abs(rec.power))) {
        out.verified = false;
        out.diagnostics.violations.push_back("stored power does not match the stored decisions");
      }
    }
    out.failure = out.verified ? "" : "re-verification failed";
  } catch (const std::exception& e) {
    out.failure = std::string("error: ") + e.what();
  }
  return out;
}

// ---------------------------------------------------------------- cache

RunCache::RunCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
  if (dir_) std::filesystem::create_directories(*dir_);
}

std::string RunCache::key(const ScenarioConfig& cfg, Scheme scheme, std::uint64_t seed) {
  return run_key(cfg, scheme) + "_" + to_string(scheme) + "_" + std::to_string(seed);
}

std::optional<ResultRecord> RunCache::find(const std::string& key) {
  std::lock_guard lock(mu_);
  if (auto it = mem_.find(key); it != mem_.end()) return it->second;
  if (!dir_) return std::nullopt;
  std::ifstream in(*dir_ / (key + ".json"));
  if (!in) return std::nullopt;
  try {
    ResultRecord r = record_from_json(json::parse(in));
    mem_[key] = r;
    return r;
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable entry: recompute
  }
}

void RunCache::store(const std::string& key, const ResultRecord& r) {
  std::lock_guard lock(mu_);
  mem_[key] = r;
  if (!dir_) return;
  const auto tmp = *dir_ / (key + ".json.tmp");
  {
    std::ofstream out(tmp);
    out << to_json(r).dump() << "\n";
  }
  std::filesystem::rename(tmp, *dir_ / (key + ".json"));
}

// ---------------------------------------------------------------- sweeps

std::vector<ResultRecord> run_sweep(const SweepSpec& spec, const ScenarioConfig& base, const SweepOptions& opt) {
  if (spec.values.empty()) throw std::invalid_argument("run_sweep: empty value list");
  if (spec.schemes.empty()) throw std::invalid_argument("run_sweep: no schemes");
  struct Job {
    double value;
    std::uint64_t seed;
    Scheme scheme;
    ScenarioConfig cfg;
  };
  std::vector<Job> jobs;
  for (double v : spec.values) {
    const ScenarioConfig cfg = spec.axis.empty() ? base : apply_axis(base, spec.axis, v);
    for (int s = 0; s < spec.seeds; ++s)
      for (Scheme sch : spec.schemes) jobs.push_back({v, spec.first_seed + static_cast<std::uint64_t>(s), sch, cfg});
  }
  std::vector<ResultRecord> out(jobs.size());
  std::atomic<size_t> next{0};
  std::mutex log_mu;
  auto worker = [&]() {
    for (size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      const std::string key = RunCache::key(job.cfg, job.scheme, job.seed);
      std::optional<ResultRecord> hit = opt.cache ? opt.cache->find(key) : std::nullopt;
      ResultRecord r = hit ? *hit : run_one(job.cfg, job.scheme, job.seed, opt.verify);
      if (!hit && opt.cache) opt.cache->store(key, r);
      r.axis = spec.axis;
      r.value = job.value;
      if (opt.progress) {
        std::lock_guard lock(log_mu);
        std::cerr << spec.axis << "=" << job.value << " seed " << job.seed << " " << to_string(job.scheme) << ": "
                  << (r.ok() ? "ok " : "FAILED ") << r.power << " W" << (hit ? " (cached)" : "") << "\n";
      }
      out[i] = std::move(r);
    }
  };
  const int n = std::max(1, std::min<int>(opt.workers, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::stable_sort(out.begin(), out.end(), [](const ResultRecord& a, const ResultRecord& b) {
    if (a.value != b.value) return a.value < b.value;
    if (a.seed != b.seed) return a.seed < b.seed;
    return static_cast<int>(a.scheme) < static_cast<int>(b.scheme);
  });
  return out;
}

// ---------------------------------------------------------------- summaries and files

std::vector<SummaryRow> summarize(const std::vector<ResultRecord>& records) {
  std::map<std::pair<int, double>, std::vector<const ResultRecord*>> groups;
  for (const auto& r : records) groups[{static_cast<int>(r.scheme), r.value}].push_back(&r);
  std::vector<SummaryRow> rows;
  for (const auto& [key, recs] : groups) {
    SummaryRow row;
    row.scheme = static_cast<Scheme>(key.first);
    row.value = key.second;
    double sum = 0.0;
    for (const auto* r : recs) {
      if (r->ok()) {
        sum += r->power;
        ++row.count;
      } else {
        ++row.failed;
      }
    }
    if (row.count > 0) row.mean = sum / row.count;
    if (row.count > 1) {
      double ss = 0.0;
      for (const auto* r : recs)
        if (r->ok()) ss += (r->power - row.mean) * (r->power - row.mean);
      row.se = std::sqrt(ss / (row.count - 1)) / std::sqrt(static_cast<double>(row.count));
    }
    rows.push_back(row);
  }
  return rows;
}

const SummaryRow* find_row(const std::vector<SummaryRow>& rows, Scheme s, double value) {
  for (const auto& r : rows)
    if (r.scheme == s && r.value == value) return &r;
  return nullptr;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<ResultRecord>& records, bool append) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << "\n";
}

std::vector<ResultRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<ResultRecord> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(record_from_json(json::parse(line)));
  return out;
}

void write_summary_csv(const std::filesystem::path& path, const std::string& axis, const std::vector<SummaryRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "scheme," << (axis.empty() ? "value" : axis) << ",mean_w,se_w,mean_dbm,count,failed\n";
  out << std::setprecision(10);
  for (const auto& r : rows)
    out << to_string(r.scheme) << "," << r.value << "," << r.mean << "," << r.se << ","
        << (r.count ? watts_to_dbm(r.mean) : 0.0) << "," << r.count << "," << r.failed << "\n";
}

void write_plot_data(const std::filesystem::path& path, const std::string& axis, const std::vector<SummaryRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(10);
  std::vector<Scheme> order;
  for (const auto& r : rows)
    if (std::find(order.begin(), order.end(), r.scheme) == order.end()) order.push_back(r.scheme);
  bool first = true;
  for (Scheme s : order) {
    if (!first) out << "\n\n";
    first = false;
    out << "# scheme " << to_string(s) << "\n# " << (axis.empty() ? "value" : axis)
        << " mean_w se_w mean_dbm lo_dbm hi_dbm count\n";
    for (const auto& r : rows) {
      if (r.scheme != s || r.count == 0) continue;
      out << r.value << " " << r.mean << " " << r.se << " " << watts_to_dbm(r.mean) << " "
          << watts_to_dbm(std::max(r.mean - r.se, r.mean * 1e-12)) << " " << watts_to_dbm(r.mean + r.se) << " "
          << r.count << "\n";
    }
  }
}

std::vector<ConvergenceRow> convergence_report(const std::vector<double>& trace, double tol) {
  std::vector<ConvergenceRow> rows;
  for (size_t i = 0; i < trace.size(); ++i) {
    ConvergenceRow r;
    r.iteration = static_cast<int>(i);
    r.objective = trace[i];
    if (i > 0) {
      const double prev = trace[i - 1];
      r.rel_change = prev != 0.0 ? (trace[i] - prev) / std::abs(prev) : trace[i] - prev;
      r.flagged = r.rel_change > tol;
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace isac
