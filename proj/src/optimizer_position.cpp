#include "isac/optimizer.hpp"

#include "optimizer_detail.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace isac {

using detail::BorderedA;

namespace {

constexpr double kGainMargin = 1e-9;
constexpr double kPenaltyTol = 1e-5;

CMat scalar(double v) {
  CMat m(1, 1);
  m(0, 0) = v;
  return m;
}

double mu_rel(const Scenario& sc, int k) {
  return sc.channel_scale(k) > 0 ? sc.csi.mu(k) / sc.channel_scale(k) : 0.0;
}

double safe_scale(const Scenario& sc, int k) { return sc.channel_scale(k) > 0 ? sc.channel_scale(k) : 1.0; }

Vec durations(const Decisions& d) {
  Vec t(static_cast<Eigen::Index>(d.size()));
  for (size_t q = 0; q < d.size(); ++q) t(static_cast<Eigen::Index>(q)) = d[q].t;
  return t;
}

// Position program over per-element windows. The fixed covariances are
// rescaled per snapshot by 1 / v_q; the objective is the resulting average
// power relative to the current one plus the binary penalties.
struct PositionProgram {
  ConicProgram prog;
  GloverLayout layout;
  std::vector<std::vector<int>> b;  // [n][window entry]
  std::vector<int> phi;
  std::vector<int> v, e;
  LinExpr power_part;               // objective without penalties
};

PositionProgram build_position_program(const Scenario& sc, const Decisions& fixed,
                                       const std::vector<std::vector<int>>& windows, const std::vector<Vec>& b0,
                                       const Vec& phi0, double tau_b, double tau_phi) {
  const int N = sc.N(), K = sc.K(), Q = sc.Q();
  if (static_cast<int>(fixed.size()) != Q) throw std::invalid_argument("position program: one decision per snapshot");
  PositionProgram P;
  ConicProgram& prog = P.prog;
  P.layout = glover_layout(windows);
  const GloverLayout& L = P.layout;
  const Vec t = durations(fixed);
  const double Pu = power_unit(sc, t);
  const double T = sc.T_tot();
  const double F_cur = average_power(fixed, T);
  if (!(F_cur > 0)) throw std::invalid_argument("position program: current power must be positive");

  // selection variables with the box, sum-to-one and binary penalty terms
  LinExpr penalty;
  P.b.resize(N);
  for (int n = 0; n < N; ++n) {
    LinExpr sum(-1.0);
    for (size_t a = 0; a < windows[n].size(); ++a) {
      const int x = prog.add_variable("b");
      P.b[n].push_back(x);
      prog.add_nonneg(LinExpr::var(x), "C12a");
      prog.add_nonneg(1.0 - LinExpr::var(x), "C12a");
      sum.add(x, 1.0);
      const double x0 = b0[n](static_cast<Eigen::Index>(a));
      penalty += tau_b * (LinExpr::var(x, 1.0 - 2.0 * x0) + x0 * x0);
    }
    prog.add_equality(sum, "C3");
  }
  P.phi = prog.add_variables(L.size, "phi");
  for (int f = 0; f < L.size; ++f) {
    prog.add_nonneg(LinExpr::var(P.phi[f]), "C13a");
    prog.add_nonneg(1.0 - LinExpr::var(P.phi[f]), "C13a");
    const double x0 = phi0(f);
    penalty += tau_phi * (LinExpr::var(P.phi[f], 1.0 - 2.0 * x0) + x0 * x0);
  }
  const GloverRows rows = glover_constraints(L, sc.D, sc.cfg.d_min, P.b, P.phi);
  for (const auto& r : rows.c5a) prog.add_nonneg(r, "C5a");
  for (const auto& r : rows.c5b) prog.add_nonneg(r, "C5b");
  for (const auto& r : rows.c5c) prog.add_nonneg(r, "C5c");
  // product consistency (valid because each element picks exactly one position)
  for (int p = 0; p < static_cast<int>(L.pairs.size()); ++p) {
    const auto& pr = L.pairs[p];
    const int na = static_cast<int>(windows[pr.n].size()), nc = static_cast<int>(windows[pr.n2].size());
    for (int a = 0; a < na; ++a) {
      LinExpr e = LinExpr::var(P.b[pr.n][a], -1.0);
      for (int c = 0; c < nc; ++c) e.add(P.phi[L.phi(p, a, c)], 1.0);
      prog.add_equality(e, "RLT");
    }
    for (int c = 0; c < nc; ++c) {
      LinExpr e = LinExpr::var(P.b[pr.n2][c], -1.0);
      for (int a = 0; a < na; ++a) e.add(P.phi[L.phi(p, a, c)], 1.0);
      prog.add_equality(e, "RLT");
    }
    for (int a = 0; a < na; ++a)
      for (int c = 0; c < nc; ++c)
        if (sc.D(windows[pr.n][a], windows[pr.n2][c]) < sc.cfg.d_min - 1e-12)
          prog.add_equality(LinExpr::var(P.phi[L.phi(p, a, c)]), "Dmin");
  }

  // a^H X a for the selection-dependent steering a_n = sum_i b_n[i] col(i)
  auto quad = [&](const CMat& X, const auto& value_at) {
    LinExpr g;
    for (int n = 0; n < N; ++n)
      for (size_t a = 0; a < windows[n].size(); ++a)
        g.add(P.b[n][a], X(n, n).real() * std::norm(value_at(windows[n][a])));
    for (int p = 0; p < static_cast<int>(L.pairs.size()); ++p) {
      const auto& pr = L.pairs[p];
      const cd x = X(pr.n, pr.n2);
      for (size_t a = 0; a < windows[pr.n].size(); ++a)
        for (size_t c = 0; c < windows[pr.n2].size(); ++c) {
          const cd val = std::conj(value_at(windows[pr.n][a])) * x * value_at(windows[pr.n2][c]);
          g.add(P.phi[L.phi(p, static_cast<int>(a), static_cast<int>(c))], 2.0 * val.real());
        }
    }
    return g;
  };

  LinExpr objective;
  for (int q = 0; q < Q; ++q) {
    const std::string tag = "[" + std::to_string(q) + "]";
    const double Pq = fixed[q].power();
    const CMat Rx = fixed[q].Rx() / Pu;
    const int v = prog.add_variable("v" + tag), e = prog.add_variable("e" + tag);
    P.v.push_back(v);
    P.e.push_back(e);
    prog.add_rotated_soc(LinExpr::var(e), LinExpr::var(v), {LinExpr(1.0)}, "e*v>=1" + tag);
    prog.add_nonneg(LinExpr::var(v) - Pq / sc.p_max, "C1" + tag);
    objective.add(e, t(q) * Pq / (T * F_cur));

    if (sc.sensing.gamma_th > 0) {
      const double floor = sc.gain_floor(q, t(q)) * (1.0 + kGainMargin) / Pu;
      LinExpr g = quad(Rx, [&](int m) { return sc.steering.boresight(m, q); });
      g.add(v, -floor);
      prog.add_nonneg(g, "C7" + tag);
    }

    if (std::isfinite(sc.sensing.delta_d)) {
      const int rho = prog.add_variable("rho" + tag);
      prog.add_nonneg(LinExpr::var(rho), "rho>=0" + tag);
      const Vec& mask = sc.pattern.mask[q];
      const int cells = static_cast<int>(mask.size());
      std::vector<LinExpr> rows_c;
      rows_c.reserve(cells);
      for (int c = 0; c < cells; ++c) {
        LinExpr r = LinExpr::var(rho, mask(c));
        r -= quad(Rx, [&](int m) { return sc.steering.grid(m, c); });
        rows_c.push_back(std::move(r));
      }
      const double cap = std::sqrt(sc.sensing.delta_d * cells) * sc.mse_reference(q) / Pu;
      prog.add_soc(LinExpr::var(v, cap), rows_c, "C6" + tag);
    }

    for (int k = 0; k < K; ++k) {
      const std::string kt = "[" + std::to_string(q) + "," + std::to_string(k) + "]";
      const double lam = fixed[q].lambda(k);
      const CMat Wk = fixed[q].W[k] / Pu;
      const CMat A = (1.0 + lam) * Wk - lam * Rx;
      const double s = safe_scale(sc, k), mu = mu_rel(sc, k);
      const int io = prog.add_variable("iota" + kt);
      prog.add_nonneg(LinExpr::var(io), "iota>=0" + kt);
      HermExpr M(N + 1);
      M.add_constant(A, 0, 0);
      M.add_scaled(io, CMat::Identity(N, N), 0, 0);
      auto hc = [&](int m) { return std::conj(sc.channels.per_position(k, m)) / s; };
      // off-diagonal column A c(b)
      for (int n = 0; n < N; ++n)
        for (size_t a = 0; a < windows[n].size(); ++a) M.add_scaled(P.b[n][a], A.col(n) * hc(windows[n][a]), 0, N);
      // c(b)^H A c(b): the same quadratic structure as the gains, in conj(h)
      LinExpr br = quad(A, hc);
      br.add(v, -lam * sc.sensing.sigma2 / (Pu * s * s));
      br.add(io, -mu * mu);
      M.add_scaled(br, scalar(1.0), N, N);
      prog.add_lmi(M, "C10b" + kt);
    }
  }
  P.power_part = objective;
  prog.minimize(objective + penalty);
  return P;
}

std::vector<std::vector<int>> single_windows(const SelectionState& s) {
  std::vector<std::vector<int>> w;
  for (int m : s.index) w.push_back({m});
  return w;
}

std::vector<Vec> window_values(const std::vector<std::vector<int>>& windows, const SelectionState& s) {
  std::vector<Vec> b;
  for (size_t n = 0; n < windows.size(); ++n) {
    Vec v = Vec::Zero(static_cast<Eigen::Index>(windows[n].size()));
    for (size_t a = 0; a < windows[n].size(); ++a)
      if (windows[n][a] == s.index[n]) v(static_cast<Eigen::Index>(a)) = 1.0;
    b.push_back(v);
  }
  return b;
}

Vec product_values(const GloverLayout& L, const std::vector<Vec>& b) {
  Vec phi = Vec::Zero(L.size);
  for (int p = 0; p < static_cast<int>(L.pairs.size()); ++p) {
    const auto& pr = L.pairs[p];
    for (Eigen::Index a = 0; a < b[pr.n].size(); ++a)
      for (Eigen::Index c = 0; c < b[pr.n2].size(); ++c)
        phi(L.phi(p, static_cast<int>(a), static_cast<int>(c))) = b[pr.n](a) * b[pr.n2](c);
  }
  return phi;
}

}  // namespace

// ---------------------------------------------------------------- rounding

SelectionState round_selection(const std::vector<Vec>& b, const Mat& D, double d_min) {
  const int N = static_cast<int>(b.size());
  const int M = static_cast<int>(D.rows());
  SelectionState s;
  s.M = M;
  for (int n = 0; n < N; ++n) {
    if (b[n].size() != M) throw std::invalid_argument("round_selection: length mismatch");
    Eigen::Index best = 0;
    b[n].maxCoeff(&best);
    s.index.push_back(static_cast<int>(best));
  }
  auto clear_of_others = [&](int n, int m) {
    for (int o = 0; o < N; ++o)
      if (o != n && D(m, s.index[o]) < d_min - 1e-12) return false;
    return true;
  };
  for (int guard = 0; guard <= N * M; ++guard) {
    int bad_n = -1, bad_o = -1;
    for (int n = 0; n < N && bad_n < 0; ++n)
      for (int o = n + 1; o < N; ++o)
        if (D(s.index[n], s.index[o]) < d_min - 1e-12) {
          bad_n = n;
          bad_o = o;
          break;
        }
    if (bad_n < 0) return s;
    // move the element with less weight on its chosen position
    int mv = b[bad_n](s.index[bad_n]) < b[bad_o](s.index[bad_o]) ? bad_n : bad_o;
    int target = -1;
    for (int attempt = 0; attempt < 2 && target < 0; ++attempt) {
      double w = -1.0;
      for (int m = 0; m < M; ++m)
        if (clear_of_others(mv, m) && b[mv](m) > w) {
          w = b[mv](m);
          target = m;
        }
      if (target < 0) mv = mv == bad_n ? bad_o : bad_n;
    }
    if (target < 0) throw std::runtime_error("round_selection: no feasible position for the repaired element");
    s.index[mv] = target;
  }
  throw std::runtime_error("round_selection: repair did not converge");
}

// ---------------------------------------------------------------- evaluation and SCA loop

double evaluate_selection(const Scenario& sc, const SelectionState& sel, const Decisions& fixed) {
  if (!validate_selection(sel, sc.D, sc.cfg.d_min).empty()) return std::numeric_limits<double>::infinity();
  const auto windows = single_windows(sel);
  const auto b0 = window_values(windows, sel);
  const GloverLayout L = glover_layout(windows);
  PositionProgram P = build_position_program(sc, fixed, windows, b0, product_values(L, b0), 0.0, 0.0);
  const Solution s = solve(P.prog, detail::solver_options(sc));
  if (!s.optimal()) return std::numeric_limits<double>::infinity();
  return s.value(P.power_part);
}

PositionResult position_sca_loop(const Scenario& sc, const SelectionState& init, const Decisions& fixed) {
  PositionResult res;
  res.selection = init;
  res.value = evaluate_selection(sc, init, fixed);
  const int N = sc.N(), M = sc.M();
  std::vector<std::vector<int>> windows(N);
  for (int n = 0; n < N; ++n) {
    if (M <= sc.cfg.full_window_max_m) {
      for (int m = 0; m < M; ++m) windows[n].push_back(m);
    } else {
      windows[n] = lattice_window(sc.grid, init.index[n], sc.cfg.window_radius);
    }
  }
  std::vector<Vec> b0 = window_values(windows, init);
  Vec phi0 = product_values(glover_layout(windows), b0);
  double tau = sc.cfg.tau_init;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < sc.cfg.sca_max_iters; ++it) {
    res.iterations = it + 1;
    PositionProgram P = build_position_program(sc, fixed, windows, b0, phi0, tau, tau);
    const Solution s = solve(P.prog, detail::solver_options(sc));
    res.records.push_back(detail::make_record("P3", s));
    if (!s.optimal()) break;
    std::vector<Vec> b(N), full(N);
    double pen = 0.0;
    for (int n = 0; n < N; ++n) {
      b[n].resize(static_cast<Eigen::Index>(windows[n].size()));
      full[n] = Vec::Zero(M);
      for (size_t a = 0; a < windows[n].size(); ++a) {
        const double x = std::clamp(s.x(P.b[n][a]), 0.0, 1.0);
        b[n](static_cast<Eigen::Index>(a)) = x;
        full[n](windows[n][a]) = x;
        pen += x * (1.0 - x);
      }
    }
    Vec phi(P.layout.size);
    for (int f = 0; f < P.layout.size; ++f) {
      phi(f) = std::clamp(s.x(P.phi[f]), 0.0, 1.0);
      pen += phi(f) * (1.0 - phi(f));
    }
    res.penalties.push_back(pen);
    try {
      const SelectionState cand = round_selection(full, sc.D, sc.cfg.d_min);
      if (cand.index != res.selection.index) {
        const double val = evaluate_selection(sc, cand, fixed);
        if (val < res.value) {
          res.value = val;
          res.selection = cand;
        }
      }
    } catch (const std::runtime_error&) {
      // no feasible rounding at this iterate; keep going
    }
    const double obj = s.value(P.power_part);
    b0 = b;
    phi0 = phi;
    if (pen <= kPenaltyTol && std::isfinite(prev) && std::abs(prev - obj) <= 1e-4 * std::abs(prev)) break;
    prev = obj;
    if (pen > kPenaltyTol) tau *= sc.cfg.tau_growth;
  }
  return res;
}

// ---------------------------------------------------------------- lifted position program

P3Program build_p3(const Scenario& sc, const Decisions& fixed, const std::vector<Vec>& b0, const Vec& phi0,
                   const std::array<double, 4>& tau) {
  const int N = sc.N(), K = sc.K(), Q = sc.Q(), M = sc.M();
  const int MN = M * N;
  if (static_cast<int>(b0.size()) != N) throw std::invalid_argument("build_p3: b0 needs one vector per element");
  P3Program P;
  ConicProgram& prog = P.prog;
  P.layout = glover_layout(N, M);
  if (phi0.size() != P.layout.size) throw std::invalid_argument("build_p3: phi0 size mismatch");
  const Vec t = durations(fixed);
  P.p_unit = power_unit(sc, t);
  const double Pu = P.p_unit;
  P.constant = average_power(fixed, sc.T_tot()) / Pu;

  LinExpr objective(P.constant);
  P.b.assign(N, std::vector<int>(M));
  for (int n = 0; n < N; ++n) {
    LinExpr sum(-1.0);
    for (int m = 0; m < M; ++m) {
      const int x = P.b[n][m] = prog.add_variable("b");
      prog.add_nonneg(LinExpr::var(x), "C12a");
      prog.add_nonneg(1.0 - LinExpr::var(x), "C12a");
      sum.add(x, 1.0);
      const double x0 = b0[n](m);
      objective += tau[2] * (LinExpr::var(x, 1.0 - 2.0 * x0) + x0 * x0);
    }
    prog.add_equality(sum, "C3");
  }
  P.phi = prog.add_variables(P.layout.size, "phi");
  for (int f = 0; f < P.layout.size; ++f) {
    prog.add_nonneg(LinExpr::var(P.phi[f]), "C13a");
    prog.add_nonneg(1.0 - LinExpr::var(P.phi[f]), "C13a");
    objective += tau[3] * (LinExpr::var(P.phi[f], 1.0 - 2.0 * phi0(f)) + phi0(f) * phi0(f));
  }
  const GloverRows rows = glover_constraints(P.layout, sc.D, sc.cfg.d_min, P.b, P.phi);
  for (const auto& r : rows.c5a) prog.add_nonneg(r, "C5a");
  for (const auto& r : rows.c5b) prog.add_nonneg(r, "C5b");
  for (const auto& r : rows.c5c) prog.add_nonneg(r, "C5c");

  Mat B0 = selection_to_matrix(b0);
  const CMat Hfull = sc.channels.full(N);
  const CMat S_all = sc.steering.stacked(N);

  // [[S, F, B X], [F^H, T, B], [X^H B^T, B^T, I]] with B linear in b
  auto schur_lmi = [&](const HermVar& S, const HermVar& F, const HermVar& T, const CMat& X, const std::string& name) {
    HermExpr E(2 * MN + N);
    E.add_var_block(S, 1.0, 0, 0);
    E.add_var_block(F, 1.0, 0, MN);
    E.add_var_block(T, 1.0, MN, MN);
    for (int n = 0; n < N; ++n)
      for (int m = 0; m < M; ++m) {
        CMat row = CMat::Zero(MN, N);
        row.row(n * M + m) = X.row(n);
        E.add_scaled(P.b[n][m], row, 0, 2 * MN);
        CMat e = CMat::Zero(MN, N);
        e(n * M + m, n) = 1.0;
        E.add_scaled(P.b[n][m], e, MN, 2 * MN);
      }
    E.add_constant(CMat::Identity(N, N), 2 * MN, 2 * MN);
    prog.add_lmi(E, name);
  };
  // first-order expansion of Tr(B C B^T) around B0 (coefficient of b_n[m] is 2 Re (C B0^T)(n, nM + m))
  auto taylor = [&](const CMat& C) {
    const CMat CB = C * B0.transpose().cast<cd>();
    LinExpr g((B0.cast<cd>() * C * B0.transpose().cast<cd>()).trace().real());
    for (int n = 0; n < N; ++n)
      for (int m = 0; m < M; ++m) {
        const double coef = 2.0 * CB(n, n * M + m).real();
        g.add(P.b[n][m], coef);
        g.constant -= coef * b0[n](m);
      }
    return g;
  };

  for (int q = 0; q < Q; ++q) {
    const std::string tag = "[" + std::to_string(q) + "]";
    std::vector<HermVar> F(K);
    for (int k = 0; k < K; ++k) {
      const CMat Wk = fixed[q].W[k] / Pu;
      F[k] = prog.add_hermitian(MN, true, "F" + tag);
      const HermVar S = prog.add_hermitian(MN, false, "S" + tag);
      const HermVar Tm = prog.add_hermitian(MN, false, "T" + tag);
      schur_lmi(S, F[k], Tm, Wk, "C14a" + tag);
      objective += tau[0] * (S.trace() - taylor(Wk * Wk.adjoint()));
    }
    const CMat Rq = fixed[q].R / Pu;
    const HermVar Y = prog.add_hermitian(MN, true, "Y" + tag);
    const HermVar U = prog.add_hermitian(MN, false, "U" + tag);
    const HermVar V = prog.add_hermitian(MN, false, "V" + tag);
    schur_lmi(U, Y, V, Rq, "C15a" + tag);
    objective += tau[1] * (U.trace() - taylor(Rq * Rq.adjoint()));

    auto rx_with = [&](const CMat& C) {
      LinExpr e = Y.trace_with(C);
      for (const auto& f : F) e += f.trace_with(C);
      return e;
    };
    if (sc.sensing.gamma_th > 0) {
      const CVec a = sc.steering.boresight.col(q).replicate(N, 1);
      prog.add_nonneg(rx_with(a * a.adjoint()) - sc.gain_floor(q, t(q)) * (1.0 + kGainMargin) / Pu, "C7" + tag);
    }
    const int rho = prog.add_variable("rho0" + tag);
    prog.add_nonneg(LinExpr::var(rho), "rho0>=0" + tag);
    if (std::isfinite(sc.sensing.delta_d)) {
      const Vec& mask = sc.pattern.mask[q];
      std::vector<LinExpr> r;
      for (int c = 0; c < static_cast<int>(mask.size()); ++c) {
        const CVec ac = S_all.col(c);
        LinExpr e = LinExpr::var(rho, mask(c));
        e -= rx_with(ac * ac.adjoint());
        r.push_back(std::move(e));
      }
      const double cap = std::sqrt(sc.sensing.delta_d * static_cast<double>(mask.size())) * sc.mse_reference(q) / Pu;
      prog.add_soc(LinExpr(cap), r, "C6" + tag);
    }
    for (int k = 0; k < K; ++k) {
      const double lam = fixed[q].lambda(k);
      BorderedA A;
      for (int i = 0; i < K; ++i) A.vars.emplace_back(F[i], i == k ? 1.0 : -lam);
      A.vars.emplace_back(Y, -lam);
      const double s = safe_scale(sc, k), mu = mu_rel(sc, k);
      const CVec c = Hfull.row(k).transpose().conjugate() / s;
      const int io = prog.add_variable("iota" + tag);
      prog.add_nonneg(LinExpr::var(io), "iota>=0" + tag);
      prog.add_lmi(detail::bordered_lmi(A, c, LinExpr::var(io), mu * mu,
                                        LinExpr(-lam * sc.sensing.sigma2 / (Pu * s * s))),
                   "C10b" + tag);
    }
  }
  prog.minimize(objective);
  return P;
}

}  // namespace isac
