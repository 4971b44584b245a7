#include "isac/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace isac {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(t, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != t.size() || t.empty()) throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
  return x;
}

long long parse_int(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  long long x = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (ec != std::errc() || p != t.data() + t.size()) throw std::invalid_argument("config: bad integer for " + key);
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "1" || t == "true" || t == "yes") return true;
  if (t == "0" || t == "false" || t == "no") return false;
  throw std::invalid_argument("config: bad boolean for " + key);
}

std::string fmt(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

struct Field {
  std::function<void(ScenarioConfig&, const std::string&)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

#define ISAC_DOUBLE(name)                                                                      \
  {                                                                                            \
#name, {[](ScenarioConfig& c, const std::string& v) { c.name = parse_double(#name, v); }, \
            [](const ScenarioConfig& c) { return fmt(c.name); } }                              \
  }
#define ISAC_INT(name)                                                                                       \
  {                                                                                                          \
#name, {[](ScenarioConfig& c, const std::string& v) { c.name = static_cast<int>(parse_int(#name, v)); }, \
            [](const ScenarioConfig& c) { return std::to_string(c.name); } }                                 \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = {
      ISAC_INT(N),
      ISAC_INT(K),
      ISAC_INT(Q),
      ISAC_DOUBLE(wavelength),
      ISAC_DOUBLE(a),
      ISAC_DOUBLE(step),
      ISAC_DOUBLE(d_min),
      ISAC_INT(grid_cap),
      ISAC_DOUBLE(alpha),
      ISAC_DOUBLE(L0_db),
      ISAC_DOUBLE(sigma2_dbm),
      ISAC_DOUBLE(kappa),
      ISAC_INT(num_paths),
      ISAC_DOUBLE(path_excess),
      ISAC_DOUBLE(user_dist_min),
      ISAC_DOUBLE(user_dist_max),
      ISAC_DOUBLE(mu),
      ISAC_DOUBLE(r_min),
      ISAC_DOUBLE(gamma_th_db),
      ISAC_DOUBLE(nu),
      ISAC_DOUBLE(p_max_dbm),
      ISAC_DOUBLE(psi),
      ISAC_DOUBLE(width_deg),
      ISAC_INT(L),
      ISAC_INT(J),
      ISAC_DOUBLE(half_el),
      ISAC_DOUBLE(half_az),
      ISAC_DOUBLE(delta_d),
      ISAC_DOUBLE(mse_ref_fraction),
      ISAC_DOUBLE(t_min),
      ISAC_DOUBLE(t_max),
      ISAC_DOUBLE(T_tot),
      ISAC_INT(bcd_max_iters),
      ISAC_DOUBLE(eps_bcd),
      ISAC_INT(ao_max_iters),
      ISAC_DOUBLE(eps_ao),
      ISAC_INT(sca_max_iters),
      ISAC_DOUBLE(tau_init),
      ISAC_DOUBLE(tau_growth),
      ISAC_INT(window_radius),
      ISAC_INT(full_window_max_m),
      ISAC_DOUBLE(init_area),
      ISAC_DOUBLE(fixed_area),
      ISAC_INT(as_subset_cap),
      ISAC_INT(randomization_samples),
      ISAC_DOUBLE(solver_tol),
      ISAC_INT(seeds),
      {"printed_lmi",
       {[](ScenarioConfig& c, const std::string& v) { c.printed_lmi = parse_bool("printed_lmi", v); },
        [](const ScenarioConfig& c) { return std::string(c.printed_lmi ? "true" : "false"); }}},
      {"seed",
       {[](ScenarioConfig& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(parse_int("seed", v)); },
        [](const ScenarioConfig& c) { return std::to_string(c.seed); }}},
      {"omega_av",
       {[](ScenarioConfig& c, const std::string& v) {
          c.omega_av.clear();
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ','))
            if (!trim(item).empty()) c.omega_av.push_back(parse_double("omega_av", item));
        },
        [](const ScenarioConfig& c) {
          std::string s;
          for (size_t i = 0; i < c.omega_av.size(); ++i) s += (i ? "," : "") + fmt(c.omega_av[i]);
          return s;
        }}},
  };
  return f;
}

#undef ISAC_DOUBLE
#undef ISAC_INT

}  // namespace

ScenarioConfig ScenarioConfig::paper() { return ScenarioConfig{}; }

ScenarioConfig ScenarioConfig::desk() {
  ScenarioConfig c;
  c.N = 4;
  c.K = 2;
  c.Q = 4;
  c.a = 1.0;
  return c;
}

double ScenarioConfig::sigma2() const { return std::pow(10.0, (sigma2_dbm - 30.0) / 10.0); }
double ScenarioConfig::L0() const { return std::pow(10.0, L0_db / 10.0); }
double ScenarioConfig::gamma_th() const { return std::pow(10.0, gamma_th_db / 10.0); }
double ScenarioConfig::p_max() const { return std::pow(10.0, (p_max_dbm - 30.0) / 10.0); }

std::vector<double> ScenarioConfig::omega_schedule() const {
  if (!omega_av.empty()) {
    if (static_cast<int>(omega_av.size()) != Q) throw std::invalid_argument("config: omega_av needs Q entries");
    return omega_av;
  }
  std::vector<double> w(Q);
  for (int q = 0; q < Q; ++q) w[q] = 2 * q < Q ? 1.0 : 0.1;
  return w;
}

void ScenarioConfig::set(const std::string& key, const std::string& value) {
  const auto it = fields().find(trim(key));
  if (it == fields().end()) throw std::invalid_argument("config: unknown key '" + key + "'");
  it->second.set(*this, value);
}

std::map<std::string, std::string> ScenarioConfig::to_map() const {
  std::map<std::string, std::string> m;
  for (const auto& [k, f] : fields()) m[k] = f.get(*this);
  return m;
}

std::string ScenarioConfig::canonical() const {
  std::string s;
  for (const auto& [k, v] : to_map())
    if (k != "seed" && k != "seeds") s += k + "=" + v + "\n";
  return s;
}

std::string ScenarioConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

ScenarioConfig load_config(std::istream& in, ScenarioConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    base.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return base;
}

ScenarioConfig load_config_file(const std::string& path, ScenarioConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  return load_config(in, base);
}

double Scenario::gain_floor(int q, double t) const {
  return chance_gain_floor(sensing.nu, sensing.omega_av.at(q), t, sensing.gamma_th, sensing.psi, sensing.sigma2,
                           sensing.L0, plan.T_tot);
}

double Scenario::mse_reference(int q) const { return gain_floor(q, sensing.mse_ref_duration); }

Scenario sample_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  if (cfg.N < 1 || cfg.K < 0 || cfg.Q < 1) throw std::invalid_argument("sample_scenario: N, Q >= 1 and K >= 0");
  if (!(cfg.user_dist_min > 0) || cfg.user_dist_min > cfg.user_dist_max)
    throw std::invalid_argument("sample_scenario: invalid user distance range");
  Scenario sc;
  sc.cfg = cfg;
  sc.seed = seed;
  sc.grid = build_grid(cfg.a, cfg.wavelength, cfg.step, cfg.grid_cap);
  sc.D = distance_matrix(sc.grid);

  // user draws depend only on the seed and K, so sweeps over geometry are paired
  Rng geo(derive_seed(seed, 1));
  Rng path_rng(derive_seed(seed, 2));
  ChannelParams cp;
  cp.num_paths = cfg.num_paths;
  cp.kappa = cfg.kappa;
  cp.alpha = cfg.alpha;
  cp.L0 = cfg.L0();
  cp.wavelength = cfg.wavelength;
  cp.path_excess = cfg.path_excess;
  const double half_sector = cfg.width_deg * std::numbers::pi / 360.0;
  for (int k = 0; k < cfg.K; ++k) {
    UserGeometry u;
    u.distance = geo.uniform(cfg.user_dist_min, cfg.user_dist_max);
    u.phi = geo.uniform(-half_sector, half_sector);
    u.theta = 0.0;
    sc.users.push_back(u);
    Rng user_rng = path_rng.split(static_cast<std::uint64_t>(k));
    sc.paths.push_back(sample_user_paths(user_rng, u, cp));
  }
  sc.channels = build_channel_table(sc.grid, sc.paths);

  sc.channel_scale.resize(cfg.K);
  sc.csi.nominal = sc.channels.per_position;
  sc.csi.mu.resize(cfg.K);
  sc.csi.sigma2 = Vec::Constant(cfg.K, cfg.sigma2());
  for (int k = 0; k < cfg.K; ++k) {
    sc.channel_scale(k) = std::sqrt(cfg.N * sc.channels.per_position.row(k).cwiseAbs2().mean());
    sc.csi.mu(k) = cfg.mu * sc.channel_scale(k);
  }

  sc.plan = build_scan_plan(cfg.width_deg, cfg.Q, cfg.half_el, cfg.half_az, cfg.L, cfg.J, cfg.T_tot, cfg.t_min,
                            cfg.t_max);
  sc.steering = build_steering(sc.grid, sc.plan);
  sc.pattern = ideal_pattern(sc.plan);
  sc.sensing.gamma_th = cfg.gamma_th();
  sc.sensing.nu = cfg.nu;
  sc.sensing.psi = cfg.psi;
  sc.sensing.omega_av = cfg.omega_schedule();
  sc.sensing.sigma2 = cfg.sigma2();
  sc.sensing.L0 = cfg.L0();
  sc.sensing.delta_d = cfg.delta_d;
  sc.sensing.mse_ref_duration = cfg.mse_ref_fraction * cfg.T_tot / cfg.Q;

  sc.r_min = Vec::Constant(cfg.K, cfg.r_min);
  sc.p_max = cfg.p_max();
  sc.time_budget = cfg.T_tot;
  for (int q = 0; q < cfg.Q; ++q) sc.snapshot_ids.push_back(q);
  auto square = [&](double side_wl) {
    const double side = std::min(side_wl, cfg.a) * cfg.wavelength + 1e-9;
    std::vector<int> out;
    for (int m = 0; m < sc.M(); ++m)
      if (sc.grid.positions[m].x <= side && sc.grid.positions[m].y <= side) out.push_back(m);
    return out;
  };
  sc.init_area = square(cfg.init_area);
  sc.fixed_area = square(cfg.fixed_area);
  return sc;
}

Scenario restrict_to_snapshot(const Scenario& sc, int q) {
  if (q < 0 || q >= sc.Q()) throw std::out_of_range("restrict_to_snapshot: bad snapshot index");
  Scenario s = sc;
  const int Q = sc.Q();
  s.plan.Q = 1;
  s.plan.width_deg = sc.plan.width_deg / Q;
  s.plan.theta_e = {sc.plan.theta_e[q]};
  s.plan.phi_e = {sc.plan.phi_e[q]};
  s.steering.boresight = sc.steering.boresight.col(q);
  s.pattern.mask = {sc.pattern.mask[q]};
  s.sensing.omega_av = {sc.sensing.omega_av[q]};
  s.r_min = sc.r_min / Q;
  s.time_budget = sc.time_budget / Q;
  s.snapshot_ids = {sc.snapshot_ids[q]};
  return s;
}

}  // namespace isac
