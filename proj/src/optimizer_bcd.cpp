#include "isac/optimizer.hpp"

#include "optimizer_detail.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace isac {

namespace detail {

HermExpr bordered_lmi(const BorderedA& A, const CVec& c, const LinExpr& iota, double mu2, const LinExpr& br) {
  const int n = static_cast<int>(c.size());
  HermExpr M(n + 1);
  M.add_scaled(iota, CMat::Identity(n, n), 0, 0);
  const CMat cc = c * c.adjoint();
  for (const auto& [X, coef] : A.vars) {
    for (int p = 0; p < X.num_params(); ++p) {
      const CMat E = coef * X.basis(p);
      M.add_scaled(X.offset + p, E, 0, 0);
      M.add_scaled(X.offset + p, E * c, 0, n);
    }
    CMat one(1, 1);
    one(0, 0) = 1.0;
    M.add_scaled(coef * X.trace_with(cc), one, n, n);
  }
  for (const auto& [coef, Mat_] : A.mats) {
    M.add_scaled(coef, Mat_, 0, 0);
    M.add_scaled(coef, Mat_ * c, 0, n);
    CMat q(1, 1);
    q(0, 0) = (c.adjoint() * Mat_ * c)(0, 0).real();
    M.add_scaled(coef, q, n, n);
  }
  CMat one(1, 1);
  one(0, 0) = 1.0;
  M.add_scaled(br - mu2 * iota, one, n, n);
  return M;
}

SolveRecord make_record(const std::string& stage, const Solution& s) {
  SolveRecord r;
  r.stage = stage;
  r.status = s.status;
  r.objective = s.objective;
  r.primal_residual = s.primal_residual;
  r.dual_residual = s.dual_residual;
  r.gap = s.gap;
  r.seconds = s.seconds;
  r.iterations = s.iterations;
  return r;
}

SolverOptions solver_options(const Scenario& sc) {
  SolverOptions o;
  o.tol = sc.cfg.solver_tol;
  o.verbose = std::getenv("ISAC_SOLVER_VERBOSE") != nullptr;
  return o;
}

}  // namespace detail

using detail::BorderedA;

namespace {

constexpr double kRateMargin = 1e-6;   // relative, duration block
constexpr double kInitRateMargin = 1e-4;
constexpr double kGainMargin = 1e-9;   // relative, sensing floor
constexpr double kLambdaTieBreak = 1e-7;

// A user covariance inside P1: a free PSD matrix, or alpha * d d^H with a fixed direction.
struct Cov {
  bool free = true;
  HermVar X;
  int alpha = -1;
  CMat D;

  LinExpr trace_with(const CMat& C) const {
    if (free) return X.trace_with(C);
    return LinExpr::var(alpha, (C * D).trace().real());
  }
  void add_to(BorderedA& A, double coef) const {
    if (free)
      A.vars.emplace_back(X, coef);
    else
      A.mats.emplace_back(LinExpr::var(alpha, coef), D);
  }
  CMat value(const Vec& x) const { return free ? X.value(x) : CMat(x(alpha) * D); }
};

struct P1Build {
  P1Program p;
  std::vector<std::vector<Cov>> cov;  // [q][k]
};

double mu_rel(const Scenario& sc, int k) {
  return sc.channel_scale(k) > 0 ? sc.csi.mu(k) / sc.channel_scale(k) : 0.0;
}

CVec scaled_conj_channel(const CMat& H, const Scenario& sc, int k) {
  const double s = sc.channel_scale(k) > 0 ? sc.channel_scale(k) : 1.0;
  return H.row(k).transpose().conjugate() / s;
}

P1Build build_p1_impl(const Scenario& sc, const SelectionState& sel, const Vec& t, const Mat& lambda,
                      const std::vector<std::vector<CVec>>* dirs) {
  const int N = sc.N(), K = sc.K(), Q = sc.Q();
  if (t.size() != Q || lambda.rows() != K || lambda.cols() != Q) throw std::invalid_argument("build_p1: shape mismatch");
  P1Build b;
  P1Program& P = b.p;
  ConicProgram& prog = P.prog;
  P.p_unit = power_unit(sc, t);
  const double Pu = P.p_unit;
  const double T = sc.T_tot();
  const CMat H = sc.channels.effective(sel);
  const CMat A = sc.steering.effective(sel);

  P.W.resize(Q);
  P.xi.assign(Q, std::vector<int>(K));
  P.iota.assign(Q, std::vector<int>(K));
  b.cov.resize(Q);
  LinExpr objective;
  for (int q = 0; q < Q; ++q) {
    const std::string tag = "[" + std::to_string(q) + "]";
    for (int k = 0; k < K; ++k) {
      Cov c;
      if (dirs) {
        c.free = false;
        c.alpha = prog.add_variable("alpha" + tag);
        prog.add_nonneg(LinExpr::var(c.alpha), "alpha>=0" + tag);
        const CVec& d = (*dirs)[q][k];
        const double nn = d.squaredNorm();
        c.D = nn > 0 ? CMat(d * d.adjoint() / nn) : CMat::Zero(N, N);
      } else {
        c.X = prog.add_hermitian(N, true, "W" + std::to_string(k) + tag);
        P.W[q].push_back(c.X);
      }
      b.cov[q].push_back(c);
    }
    P.R.push_back(prog.add_hermitian(N, true, "R" + tag));
    const HermVar& R = P.R.back();
    auto rx_with = [&](const CMat& C) {
      LinExpr e = R.trace_with(C);
      for (const auto& c : b.cov[q]) e += c.trace_with(C);
      return e;
    };
    const LinExpr power = rx_with(CMat::Identity(N, N));
    objective += (t(q) / T) * power;
    prog.add_nonneg(sc.p_max / Pu - power, "C1" + tag);

    // sensing floor on the boresight gain
    const CVec a = sc.steering.effective_boresight(sel, q);
    if (sc.sensing.gamma_th > 0) {
      const double floor = sc.gain_floor(q, t(q)) * (1.0 + kGainMargin) / Pu;
      prog.add_nonneg(rx_with(a * a.adjoint()) - floor, "C7" + tag);
    }

    // beam-pattern matching
    P.rho.push_back(prog.add_variable("rho0" + tag));
    prog.add_nonneg(LinExpr::var(P.rho.back()), "rho0>=0" + tag);
    if (std::isfinite(sc.sensing.delta_d)) {
      const Vec& mask = sc.pattern.mask[q];
      const int cells = static_cast<int>(mask.size());
      std::vector<LinExpr> rows;
      rows.reserve(cells);
      for (int c = 0; c < cells; ++c) {
        const CVec ac = A.col(c);
        LinExpr r = LinExpr::var(P.rho.back(), mask(c));
        r -= rx_with(ac * ac.adjoint());
        rows.push_back(std::move(r));
      }
      const double cap = std::sqrt(sc.sensing.delta_d * cells) * sc.mse_reference(q) / Pu;
      prog.add_soc(LinExpr(cap), rows, "C6" + tag);
    }

    // robust SINR and rate slacks
    for (int k = 0; k < K; ++k) {
      const std::string kt = "[" + std::to_string(q) + "," + std::to_string(k) + "]";
      const double lam = lambda(k, q);
      P.xi[q][k] = prog.add_variable("xi" + kt);
      prog.add_nonneg(LinExpr::var(P.xi[q][k]), "xi>=0" + kt);
      prog.add_nonneg(std::log2(1.0 + lam) - LinExpr::var(P.xi[q][k]), "C10a" + kt);
      P.iota[q][k] = prog.add_variable("iota" + kt);
      prog.add_nonneg(LinExpr::var(P.iota[q][k]), "iota>=0" + kt);

      BorderedA Ak;
      for (int i = 0; i < K; ++i) b.cov[q][i].add_to(Ak, i == k ? 1.0 : -lam);
      Ak.vars.emplace_back(R, -lam);
      const CVec c = scaled_conj_channel(H, sc, k);
      const double s = sc.channel_scale(k) > 0 ? sc.channel_scale(k) : 1.0;
      const double mu = mu_rel(sc, k);
      prog.add_lmi(detail::bordered_lmi(Ak, c, LinExpr::var(P.iota[q][k]), mu * mu,
                                        LinExpr(-lam * sc.sensing.sigma2 / (Pu * s * s))),
                   "C10b" + kt);
    }
  }
  for (int k = 0; k < K; ++k) {
    std::vector<int> xs(Q);
    for (int q = 0; q < Q; ++q) xs[q] = P.xi[q][k];
    prog.add_nonneg(rate_row(xs, t, sc.r_min(k), T), "C2[" + std::to_string(k) + "]");
  }
  prog.minimize(objective);
  return b;
}

P1Result solve_p1_impl(const Scenario& sc, const SelectionState& sel, const Vec& t, const Mat& lambda,
                       const std::vector<std::vector<CVec>>* dirs) {
  P1Build b = build_p1_impl(sc, sel, t, lambda, dirs);
  const Solution s = solve(b.p.prog, detail::solver_options(sc));
  P1Result r;
  r.record = detail::make_record(dirs ? "P1-rank1" : "P1", s);
  if (!s.optimal()) return r;
  const double Pu = b.p.p_unit;
  const int K = sc.K(), Q = sc.Q();
  r.decisions.resize(Q);
  for (int q = 0; q < Q; ++q) {
    SnapshotDecision& d = r.decisions[q];
    d.t = t(q);
    for (int k = 0; k < K; ++k) d.W.push_back(Pu * b.cov[q][k].value(s.x));
    d.R = Pu * b.p.R[q].value(s.x);
    d.rho0 = Pu * s.x(b.p.rho[q]);
    d.lambda = lambda.col(q);
    d.xi.resize(K);
    d.iota.resize(K);
    for (int k = 0; k < K; ++k) {
      d.xi(k) = std::log2(1.0 + lambda(k, q));
      d.iota(k) = Pu * s.x(b.p.iota[q][k]);
    }
  }
  r.objective = average_power(r.decisions, sc.T_tot());
  r.record.objective = r.objective;
  return r;
}

}  // namespace

P1Program build_p1(const Scenario& sc, const SelectionState& sel, const Vec& t, const Mat& lambda) {
  return build_p1_impl(sc, sel, t, lambda, nullptr).p;
}

P1Result solve_p1(const Scenario& sc, const SelectionState& sel, const Vec& t, const Mat& lambda) {
  return solve_p1_impl(sc, sel, t, lambda, nullptr);
}

// ---------------------------------------------------------------- P2

P2Program build_p2(const Scenario& sc, const SelectionState& sel, const Decisions& fixed, const Vec& t0,
                   const Mat& xi0, const std::vector<std::vector<std::vector<double>>>& cuts) {
  const int K = sc.K(), Q = sc.Q();
  if (static_cast<int>(fixed.size()) != Q || t0.size() != Q || xi0.rows() != K || xi0.cols() != Q)
    throw std::invalid_argument("build_p2: shape mismatch");
  P2Program P;
  ConicProgram& prog = P.prog;
  const double Pu = power_unit(sc, t0);
  const double T_ms = sc.T_tot() * 1e3;
  const CMat H = sc.channels.effective(sel);
  const Vec ms0 = t0 * 1e3;
  const double F_cur = std::max(average_power(fixed, sc.T_tot()), std::numeric_limits<double>::min());

  LinExpr objective, total;
  P.lambda.assign(Q, std::vector<int>(K));
  P.xi.assign(Q, std::vector<int>(K));
  P.iota.assign(Q, std::vector<int>(K));
  for (int q = 0; q < Q; ++q) {
    const std::string tag = "[" + std::to_string(q) + "]";
    const int tq = prog.add_variable("t" + tag);
    P.t.push_back(tq);
    prog.add_nonneg(LinExpr::var(tq) - sc.plan.t_min * 1e3, "C8lo" + tag);
    prog.add_nonneg(sc.plan.t_max * 1e3 - LinExpr::var(tq), "C8hi" + tag);
    total.add(tq, 1.0);
    const double Pq = fixed[q].power();
    objective.add(tq, Pq / (T_ms * F_cur));

    if (sc.sensing.gamma_th > 0) {
      const CVec a = sc.steering.effective_boresight(sel, q);
      const double gain = beam_gain(a, fixed[q].Rx());
      // gain_floor(t) * t is independent of t
      const double need = sc.gain_floor(q, t0(q)) * ms0(q) * (1.0 + kGainMargin);
      if (gain <= 0) throw std::runtime_error("build_p2: zero boresight gain with a positive sensing floor");
      prog.add_nonneg(LinExpr::var(tq) - need / gain, "C7" + tag);
    }

    const CMat Rx_hat = fixed[q].Rx() / Pu;
    for (int k = 0; k < K; ++k) {
      const std::string kt = "[" + std::to_string(q) + "," + std::to_string(k) + "]";
      const int lam = P.lambda[q][k] = prog.add_variable("lambda" + kt);
      const int xi = P.xi[q][k] = prog.add_variable("xi" + kt);
      const int io = P.iota[q][k] = prog.add_variable("iota" + kt);
      prog.add_nonneg(LinExpr::var(lam), "lambda>=0" + kt);
      prog.add_nonneg(LinExpr::var(xi), "xi>=0" + kt);
      prog.add_nonneg(LinExpr::var(io), "iota>=0" + kt);
      prog.add_nonneg(c10a_tangent(xi, lam, xi0(k, q)), "C10a" + kt);
      if (q < static_cast<int>(cuts.size()) && k < static_cast<int>(cuts[q].size()))
        for (double x : cuts[q][k]) prog.add_nonneg(c10a_tangent(xi, lam, x), "C10a-cut" + kt);
      objective.add(lam, kLambdaTieBreak / (1.0 + std::exp2(xi0(k, q))));

      const CMat Wk = fixed[q].W[k] / Pu;
      BorderedA Ak;
      Ak.mats.emplace_back(LinExpr(1.0), Wk);
      Ak.mats.emplace_back(LinExpr::var(lam, -1.0), Rx_hat - Wk);
      const CVec c = scaled_conj_channel(H, sc, k);
      const double s = sc.channel_scale(k) > 0 ? sc.channel_scale(k) : 1.0;
      const double mu = mu_rel(sc, k);
      prog.add_lmi(detail::bordered_lmi(Ak, c, LinExpr::var(io), mu * mu,
                                        LinExpr::var(lam, -sc.sensing.sigma2 / (Pu * s * s))),
                   "C10b" + kt);
    }
  }
  prog.add_nonneg(sc.time_budget * 1e3 - total, "C9");

  // concave minorant of sum_q t_q xi_q
  for (int k = 0; k < K; ++k) {
    LinExpr lin(-T_ms * sc.r_min(k) * (1.0 + kRateMargin));
    std::vector<LinExpr> w;
    for (int q = 0; q < Q; ++q) {
      const double s0 = ms0(q) + xi0(k, q);
      lin.constant += 0.5 * s0 * s0 - s0 * s0;
      lin.add(P.t[q], s0);
      lin.add(P.xi[q][k], s0);
      w.push_back(LinExpr::var(P.t[q], std::sqrt(0.5)));
      w.push_back(LinExpr::var(P.xi[q][k], std::sqrt(0.5)));
    }
    prog.add_rotated_soc(lin, LinExpr(1.0), w, "C2sca[" + std::to_string(k) + "]");
  }
  prog.minimize(objective);
  return P;
}

P2Result solve_p2(const Scenario& sc, const SelectionState& sel, const Decisions& fixed, const Vec& t0,
                  const Mat& xi0) {
  const int K = sc.K(), Q = sc.Q();
  std::vector<std::vector<std::vector<double>>> cuts(Q, std::vector<std::vector<double>>(K));
  P2Result r;
  const double Pu = power_unit(sc, t0);
  for (int round = 0;; ++round) {
    P2Program P = build_p2(sc, sel, fixed, t0, xi0, cuts);
    const Solution s = solve(P.prog, detail::solver_options(sc));
    r.record = detail::make_record("P2", s);
    r.cut_rounds = round;
    if (!s.optimal()) return r;
    r.t.resize(Q);
    r.lambda.resize(K, Q);
    r.xi.resize(K, Q);
    r.iota.resize(K, Q);
    double worst = 0.0;
    for (int q = 0; q < Q; ++q) {
      r.t(q) = s.x(P.t[q]) * 1e-3;
      for (int k = 0; k < K; ++k) {
        r.lambda(k, q) = std::max(0.0, s.x(P.lambda[q][k]));
        r.xi(k, q) = std::max(0.0, s.x(P.xi[q][k]));
        r.iota(k, q) = Pu * std::max(0.0, s.x(P.iota[q][k]));
        const double v = c10a_violation(r.xi(k, q), r.lambda(k, q));
        worst = std::max(worst, v);
        if (v > 1e-8) cuts[q][k].push_back(r.xi(k, q));
      }
    }
    r.c10a_gap = worst;
    if (worst <= 1e-8 || round >= 5) break;
  }
  for (int q = 0; q < Q; ++q)
    for (int k = 0; k < K; ++k) r.xi(k, q) = std::min(r.xi(k, q), std::log2(1.0 + r.lambda(k, q)));
  Decisions d = fixed;
  for (int q = 0; q < Q; ++q) d[q].t = r.t(q);
  r.objective = average_power(d, sc.T_tot());
  r.record.objective = r.objective;
  return r;
}

// ---------------------------------------------------------------- BCD

namespace {

void apply_durations(Decisions& d, const P2Result& p2) {
  for (size_t q = 0; q < d.size(); ++q) {
    d[q].t = p2.t(static_cast<Eigen::Index>(q));
    d[q].lambda = p2.lambda.col(static_cast<Eigen::Index>(q));
    d[q].xi = p2.xi.col(static_cast<Eigen::Index>(q));
    d[q].iota = p2.iota.col(static_cast<Eigen::Index>(q));
  }
}

Vec durations(const Decisions& d) {
  Vec t(static_cast<Eigen::Index>(d.size()));
  for (size_t q = 0; q < d.size(); ++q) t(static_cast<Eigen::Index>(q)) = d[q].t;
  return t;
}

Mat lambdas(const Decisions& d, int K) {
  Mat l(K, static_cast<Eigen::Index>(d.size()));
  for (size_t q = 0; q < d.size(); ++q) l.col(static_cast<Eigen::Index>(q)) = d[q].lambda;
  return l;
}

}  // namespace

namespace detail {

Vec default_durations(const Scenario& sc) {
  const double t = std::clamp(sc.time_budget / sc.Q(), sc.plan.t_min, sc.plan.t_max);
  return Vec::Constant(sc.Q(), t);
}

Mat default_lambdas(const Scenario& sc, const Vec& t) {
  // equal-rate split with a little excess so that the duration block has room
  Mat l(sc.K(), sc.Q());
  const double frac = t.sum() / sc.T_tot();
  for (int k = 0; k < sc.K(); ++k) {
    const double rate = sc.r_min(k) * (1.0 + kInitRateMargin) / frac;
    l.row(k).setConstant(std::exp2(rate) - 1.0);
  }
  return l;
}

}  // namespace detail

Decisions randomize_rank_one(const Scenario& sc, const SelectionState& sel, const Decisions& d, Rng& rng,
                             int samples) {
  const int K = sc.K(), Q = sc.Q(), N = sc.N();
  const Vec t = durations(d);
  const Mat lam = lambdas(d, K);
  Decisions best;
  double best_obj = std::numeric_limits<double>::infinity();
  // square roots of the covariances for w ~ CN(0, W)
  std::vector<std::vector<CMat>> roots(Q, std::vector<CMat>(K));
  for (int q = 0; q < Q; ++q)
    for (int k = 0; k < K; ++k) {
      Eigen::SelfAdjointEigenSolver<CMat> es((d[q].W[k] + d[q].W[k].adjoint()) / 2.0);
      roots[q][k] = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
  for (int s = 0; s < samples; ++s) {
    std::vector<std::vector<CVec>> dirs(Q, std::vector<CVec>(K));
    for (int q = 0; q < Q; ++q)
      for (int k = 0; k < K; ++k) {
        CVec z(N);
        for (int n = 0; n < N; ++n) z(n) = rng.complex_normal(1.0);
        dirs[q][k] = roots[q][k] * z;
      }
    const P1Result r = solve_p1_impl(sc, sel, t, lam, &dirs);
    if (r.record.status == SolveStatus::Optimal && r.objective < best_obj) {
      best_obj = r.objective;
      best = r.decisions;
    }
  }
  return best;
}

BcdResult bcd_loop(const Scenario& sc, const SelectionState& sel, const Vec* t0, const Mat* lambda0) {
  BcdResult res;
  const int K = sc.K();
  Vec t = t0 ? *t0 : detail::default_durations(sc);
  Mat lam = lambda0 ? *lambda0 : detail::default_lambdas(sc, t);
  Decisions current;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < sc.cfg.bcd_max_iters; ++it) {
    res.iterations = it + 1;
    P1Result p1 = solve_p1(sc, sel, t, lam);
    res.records.push_back(p1.record);
    if (p1.record.status != SolveStatus::Optimal) {
      if (it == 0) {
        res.failure = std::string("P1 ") + to_string(p1.record.status) + " at initialization";
        return res;
      }
      break;
    }
    current = p1.decisions;
    res.trace.push_back(p1.objective);

    Mat xi0(K, sc.Q());
    for (int q = 0; q < sc.Q(); ++q) xi0.col(q) = current[q].xi;
    P2Result p2 = solve_p2(sc, sel, current, t, xi0);
    res.records.push_back(p2.record);
    double obj = p1.objective;
    if (p2.record.status == SolveStatus::Optimal && p2.objective <= p1.objective * (1.0 + 1e-9)) {
      apply_durations(current, p2);
      t = p2.t;
      lam = p2.lambda;
      obj = p2.objective;
    }
    res.trace.push_back(obj);
    if (std::isfinite(prev) && std::abs(prev - obj) <= sc.cfg.eps_bcd * std::abs(prev)) break;
    prev = obj;
  }
  res.feasible = true;
  res.decisions = current;
  const double sdr = average_power(current, sc.T_tot());

  // rank-one recovery
  std::vector<std::vector<CVec>> dirs(sc.Q(), std::vector<CVec>(K));
  for (int q = 0; q < sc.Q(); ++q)
    for (int k = 0; k < K; ++k) {
      const RankOne r1 = extract_rank_one(current[q].W[k]);
      res.min_rank_one_ratio = std::min(res.min_rank_one_ratio, r1.ratio);
      dirs[q][k] = r1.w;
    }
  if (K > 0) {
    Decisions rank_one;
    if (res.min_rank_one_ratio >= 0.999) {
      const P1Result r = solve_p1_impl(sc, sel, t, lam, &dirs);
      res.records.push_back(r.record);
      if (r.record.status == SolveStatus::Optimal) rank_one = r.decisions;
    }
    if (rank_one.empty()) {
      res.randomized = true;
      Rng rng(derive_seed(sc.seed, 77));
      rank_one = randomize_rank_one(sc, sel, current, rng, sc.cfg.randomization_samples);
    }
    if (rank_one.empty()) {
      res.feasible = false;
      res.failure = "no feasible rank-one solution after randomization";
      return res;
    }
    for (int q = 0; q < sc.Q(); ++q) {
      // keep the duration block's SINR targets and multipliers
      rank_one[q].lambda = current[q].lambda;
      rank_one[q].xi = current[q].xi;
    }
    res.decisions = rank_one;
  }
  res.objective = average_power(res.decisions, sc.T_tot());
  res.randomization_inflation = sdr > 0 ? (res.objective - sdr) / sdr : 0.0;
  return res;
}

}  // namespace isac
