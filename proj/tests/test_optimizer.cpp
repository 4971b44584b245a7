#include "isac/optimizer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>

using namespace isac;

namespace {

CMat random_psd(Rng& rng, int n, int rank) {
  CMat G(n, rank);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < rank; ++j) G(i, j) = rng.complex_normal();
  return G * G.adjoint();
}

CVec random_cvec(Rng& rng, int n) {
  CVec v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.complex_normal();
  return v;
}

double min_eig(const CMat& M) {
  Eigen::SelfAdjointEigenSolver<CMat> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// SINR of the perturbed row h + d, written out directly.
double sinr_direct(const CVec& h, const CMat& F, const CMat& I_sum, double sigma2) {
  const double num = (h.transpose() * F * h.conjugate())(0, 0).real();
  const double den = (h.transpose() * I_sum * h.conjugate())(0, 0).real() + sigma2;
  return num / den;
}

// N=2, K=1, Q=2 on a 3 x 3 grid.
ScenarioConfig small_config() {
  ScenarioConfig c = ScenarioConfig::desk();
  c.N = 2;
  c.K = 1;
  c.Q = 2;
  c.a = 1.0 / 3.0;
  c.mse_ref_fraction = 0.55;
  return c;
}

SelectionState pick(int M, std::vector<int> idx) {
  SelectionState s;
  s.M = M;
  s.index = std::move(idx);
  return s;
}

Vec equal_durations(const Scenario& sc) { return Vec::Constant(sc.Q(), sc.T_tot() / sc.Q()); }

Mat equal_targets(const Scenario& sc, double scale = 1.0) {
  Mat lam(sc.K(), sc.Q());
  for (int k = 0; k < sc.K(); ++k) lam.row(k).setConstant(scale * (std::exp2(sc.r_min(k)) - 1.0));
  return lam;
}

}  // namespace

// ------------------------------------------------------------ rate rows

TEST(ScaMinorant, BelowProductAndTightAtExpansion) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ut(0.0, 5.0), ux(0.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const double t = ut(rng), xi = ux(rng), t0 = ut(rng), xi0 = ux(rng);
    const double bound = sca_product_bound(t, xi, t0, xi0);
    EXPECT_LE(bound, t * xi + 1e-12 * std::max(1.0, t * xi));
    // the gap is exactly half the squared step in t + xi
    const double step = (t + xi) - (t0 + xi0);
    EXPECT_NEAR(t * xi - bound, 0.5 * step * step, 1e-9 * std::max(1.0, step * step));
    EXPECT_NEAR(sca_product_bound(t0, xi0, t0, xi0), t0 * xi0, 1e-10);
  }
}

TEST(RateRows, TangentAndViolation) {
  EXPECT_EQ(c10a_violation(3.0, 7.0), 0.0);
  EXPECT_GT(c10a_violation(3.0, 6.0), 0.0);
  // the tangent row never cuts a point on the curve
  for (double xi0 : {0.0, 0.5, 2.0, 4.0})
    for (double xi = 0.0; xi <= 6.0; xi += 0.25) {
      Vec x(2);
      x << xi, std::exp2(xi) - 1.0;
      EXPECT_GE(c10a_tangent(0, 1, xi0).eval(x), -1e-12);
      x(0) = xi0;
      x(1) = std::exp2(xi0) - 1.0;
      EXPECT_NEAR(c10a_tangent(0, 1, xi0).eval(x), 0.0, 1e-12);
    }
  Vec x(2);
  x << 1.0, 3.0;
  Vec t(2);
  t << 1e-3, 4e-3;
  EXPECT_NEAR(rate_row({0, 1}, t, 2.0, 5e-3).eval(x), (1e-3 * 1.0 + 4e-3 * 3.0) / 5e-3 - 2.0, 1e-12);
}

// ------------------------------------------------------------ S-procedure

TEST(SProcedure, ZeroRadiusReducesToNominalSinr) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 3;
    const CVec h = random_cvec(rng, n);
    const CMat F = random_psd(rng, n, 1);
    const double s2 = 0.1, nominal = sinr_direct(h, F, CMat::Zero(n, n), s2);
    EXPECT_GE(best_iota(h, 0.0, F, CMat::Zero(n, n), 0.9 * nominal, s2).min_eig, -1e-9 * nominal);
    EXPECT_LT(best_iota(h, 0.0, F, CMat::Zero(n, n), 1.1 * nominal, s2).min_eig, 0.0);
  }
  // lambda = 0 and F = 0: the zero matrix is PSD with iota = 0
  const CVec h = random_cvec(rng, 3);
  const CMat Z = CMat::Zero(3, 3);
  EXPECT_EQ(sprocedure_matrix(h, 0.0, Z, Z, 0.0, 0.0, 0.1).cwiseAbs().maxCoeff(), 0.0);
}

// Whenever the bordered matrix is PSD, every boundary error keeps SINR >= lambda.
TEST(SProcedure, BoundarySamplingSoundness) {
  Rng rng(3);
  int certified = 0, printed_disagrees = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + trial % 3;
    const CVec h = random_cvec(rng, n);
    const CMat F = 5.0 * h.conjugate() * h.transpose() / h.squaredNorm() + 0.1 * random_psd(rng, n, 1);
    const CMat I_sum = 0.2 * random_psd(rng, n, 2);
    const double s2 = 0.05, mu = 0.1 * h.norm();
    const double lambda = (0.3 + 0.4 * rng.uniform()) * sinr_direct(h, F, I_sum, s2);
    const IotaSearch best = best_iota(h, mu, F, I_sum, lambda, s2);
    const IotaSearch printed = best_iota(h, mu, F, I_sum, lambda, s2, LmiForm::Printed);
    if ((printed.min_eig >= 0) != (best.min_eig >= 0)) ++printed_disagrees;
    if (best.min_eig < 0) continue;
    ++certified;
    double worst = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 10000; ++s) {
      const CVec d = sample_csi_error(rng, n, mu, true);
      worst = std::min(worst, sinr_direct(h + d, F, I_sum, s2));
    }
    EXPECT_GE(worst, lambda * (1 - 1e-9)) << "trial " << trial;
  }
  EXPECT_GE(certified, 20);
  std::cout << "[ log ] printed-form certificate disagrees with the corrected form on " << printed_disagrees
            << " of 60 instances\n";
}

// A radius large enough to reach a zero-signal channel cannot be certified.
TEST(SProcedure, RejectsUncertifiableRadius) {
  Rng rng(4);
  const CVec h = random_cvec(rng, 3);
  const CMat F = h.conjugate() * h.transpose();
  const double lambda = 0.1 * sinr_direct(h, F, CMat::Zero(3, 3), 0.1);
  EXPECT_LT(best_iota(h, 1.01 * h.norm(), F, CMat::Zero(3, 3), lambda, 0.1).min_eig, 0.0);
}

// ------------------------------------------------------------ Schur lifting

TEST(SchurBlock, ConsistentAtConstructedPoints) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int M = 4, N = 2 + trial % 2;
    SelectionState s;
    s.M = M;
    std::vector<int> perm = {0, 1, 2, 3};
    for (int i = 3; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    s.index.assign(perm.begin(), perm.begin() + N);
    const Mat B = selection_to_matrix(s);
    const CMat W = random_psd(rng, N, 1 + trial % N);
    const CMat Bc = B.cast<cd>();
    const CMat S = Bc * W * W.adjoint() * Bc.transpose();
    const CMat F = Bc * W * Bc.transpose();
    const CMat T = Bc * Bc.transpose();
    const CMat blk = lemma3_block(S, F, T, B, W);
    const double scale = std::max(1.0, blk.cwiseAbs().maxCoeff());
    EXPECT_GE(min_eig(blk), -1e-10 * scale);
    EXPECT_NEAR((S - Bc * W * W.adjoint() * Bc.transpose()).trace().real(), 0.0, 1e-12 * scale);
    // lowering S along the lifted direction breaks positivity
    const CVec v = Bc * random_cvec(rng, N);
    EXPECT_LT(min_eig(lemma3_block(S - 1e-3 * v * v.adjoint(), F, T, B, W)), 0.0);
  }
  EXPECT_THROW(lemma3_block(CMat::Zero(3, 3), CMat::Zero(4, 4), CMat::Zero(4, 4), Mat::Zero(4, 1), CMat::Zero(1, 1)),
               std::invalid_argument);
}

// ------------------------------------------------------------ position helpers

TEST(BinaryPenalty, Examples) {
  Vec x(4);
  x << 1, 0, 0, 1;
  EXPECT_EQ(binary_penalty(x, x), 0.0);
  const Vec half = Vec::Constant(6, 0.5);
  EXPECT_NEAR(binary_penalty(half, half), 6 * 0.25, 1e-15);
  Vec x0(6);
  x0 << 0, 0.2, 0.4, 0.6, 0.8, 1.0;
  double expect = 0.0;
  for (int i = 0; i < 6; ++i) expect += 0.5 - x0(i) * (1.0 - x0(i));
  EXPECT_NEAR(binary_penalty(half, x0), expect, 1e-15);
  // linearization of x - x^2 from above: never below the true concave value
  for (int i = 0; i < 6; ++i) {
    Vec a = Vec::Constant(1, 0.1 * i), b = Vec::Constant(1, 0.37);
    EXPECT_GE(binary_penalty(a, b), a(0) - a(0) * a(0) - 1e-15);
  }
  EXPECT_THROW(binary_penalty(Vec::Zero(2), Vec::Zero(3)), std::invalid_argument);
}

TEST(RankOne, Examples) {
  CVec v(3);
  v << cd(1, 2), cd(0, -1), cd(0.5, 0);
  const RankOne r = extract_rank_one(v * v.adjoint());
  EXPECT_NEAR(r.ratio, 1.0, 1e-12);
  EXPECT_NEAR(std::abs(r.w.dot(v)), v.squaredNorm(), 1e-10);
  EXPECT_NEAR(extract_rank_one(CMat::Identity(2, 2)).ratio, 0.5, 1e-12);
}

TEST(RoundSelection, Examples) {
  const PositionGrid g = lattice_grid(3, 3, 0.01);
  const Mat D = distance_matrix(g);
  std::vector<Vec> b(2, Vec::Zero(9));
  b[0](0) = 1;
  b[1](8) = 1;
  EXPECT_EQ(round_selection(b, D, 0.015).index, (std::vector<int>{0, 8}));

  std::vector<Vec> two(1, Vec::Zero(2));
  two[0] << 0.6, 0.4;
  EXPECT_EQ(round_selection(two, distance_matrix(lattice_grid(2, 1, 0.01)), 0.0).index, std::vector<int>{0});

  // collision at a corner: the repaired pair must be one of the feasible pairs
  std::vector<Vec> c(2, Vec::Constant(9, 0.05));
  c[0](0) = 0.7;
  c[1](0) = 0.6;
  c[1](1) = 0.3;
  const SelectionState s = round_selection(c, D, 0.015);
  EXPECT_TRUE(validate_selection(s, D, 0.015).empty());
  EXPECT_EQ(s.index[0], 0);  // the heavier element stays
  int feasible_pairs = 0;
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) feasible_pairs += D(i, j) >= 0.015;
  EXPECT_GT(feasible_pairs, 0);
  EXPECT_GE(D(s.index[0], s.index[1]), 0.015);

  std::vector<Vec> impossible(3, Vec::Constant(2, 0.5));
  EXPECT_THROW(round_selection(impossible, distance_matrix(lattice_grid(2, 1, 0.01)), 0.015), std::exception);
}

// ------------------------------------------------------------ blocks on a small instance

TEST(P1, MrtClosedFormWithoutSensingOrUncertainty) {
  ScenarioConfig c = small_config();
  c.mu = 0.0;
  // no sensing: zero threshold and no pattern constraint
  c.gamma_th_db = -std::numeric_limits<double>::infinity();
  c.delta_d = std::numeric_limits<double>::infinity();
  const Scenario sc = sample_scenario(c, 3);
  const SelectionState sel = pick(sc.M(), {0, 8});
  const Vec t = equal_durations(sc);
  const Mat lam = equal_targets(sc, 1.5);
  const P1Result r = solve_p1(sc, sel, t, lam);
  ASSERT_EQ(r.record.status, SolveStatus::Optimal);
  const double h2 = sc.channels.effective(sel).row(0).squaredNorm();
  const double expect = lam(0, 0) * sc.sensing.sigma2 / h2;
  EXPECT_NEAR(r.objective, expect, 1e-4 * expect);
  EXPECT_GE(extract_rank_one(r.decisions[0].W[0]).ratio, 0.999);
}

TEST(P1, InfeasibleUnderTinyPowerBudget) {
  ScenarioConfig c = small_config();
  c.p_max_dbm = 0.0;
  const Scenario sc = sample_scenario(c, 3);
  const P1Result r = solve_p1(sc, pick(sc.M(), {0, 8}), equal_durations(sc), equal_targets(sc));
  EXPECT_NE(r.record.status, SolveStatus::Optimal);
}

TEST(P1, SolutionPassesVerification) {
  const Scenario sc = sample_scenario(small_config(), 4);
  const SelectionState sel = pick(sc.M(), {0, 8});
  const P1Result r = solve_p1(sc, sel, equal_durations(sc), equal_targets(sc, 1.2));
  ASSERT_EQ(r.record.status, SolveStatus::Optimal);
  EXPECT_NEAR(average_power(r.decisions, sc.T_tot()), r.objective, 1e-6 * r.objective);
  const FeasibilityReport rep = verify_solution(sc, sel, r.decisions, 1000, 10000, 4);
  for (const auto& v : rep.violations) ADD_FAILURE() << v;
  EXPECT_TRUE(rep.feasible);
}

TEST(Bcd, MonotoneTraceAndFixedPoint) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const Scenario sc = sample_scenario(small_config(), seed);
    const SelectionState sel = pick(sc.M(), {0, 8});
    const BcdResult b = bcd_loop(sc, sel);
    ASSERT_TRUE(b.feasible) << b.failure;
    for (size_t i = 1; i < b.trace.size(); ++i) EXPECT_LE(b.trace[i], b.trace[i - 1] * (1 + 1e-6));
    EXPECT_LE(b.objective, b.trace.front() * (1 + 1e-6));
    EXPECT_TRUE(verify_solution(sc, sel, b.decisions, 500, 0, seed).feasible);

    Vec t(sc.Q());
    Mat lam(sc.K(), sc.Q());
    for (int q = 0; q < sc.Q(); ++q) {
      t(q) = b.decisions[q].t;
      lam.col(q) = b.decisions[q].lambda;
    }
    const BcdResult again = bcd_loop(sc, sel, &t, &lam);
    ASSERT_TRUE(again.feasible);
    EXPECT_LE(again.iterations, 2);
    EXPECT_NEAR(again.objective, b.objective, 1e-4 * b.objective);
  }
}

TEST(Bcd, PinnedDurationsMatchP1) {
  ScenarioConfig c = small_config();
  c.t_min = c.t_max = c.T_tot / c.Q;
  const Scenario sc = sample_scenario(c, 2);
  const SelectionState sel = pick(sc.M(), {0, 8});
  const BcdResult b = bcd_loop(sc, sel);
  ASSERT_TRUE(b.feasible);
  for (const auto& d : b.decisions) EXPECT_NEAR(d.t, c.T_tot / c.Q, 1e-9);
  const P1Result p1 = solve_p1(sc, sel, equal_durations(sc), equal_targets(sc));
  ASSERT_EQ(p1.record.status, SolveStatus::Optimal);
  EXPECT_LE(b.objective, p1.objective * (1 + 1e-6));
}

TEST(Position, EvaluateCurrentSelectionIsUnity) {
  const Scenario sc = sample_scenario(small_config(), 5);
  const SelectionState sel = pick(sc.M(), {0, 8});
  const BcdResult b = bcd_loop(sc, sel);
  ASSERT_TRUE(b.feasible);
  EXPECT_LE(evaluate_selection(sc, sel, b.decisions), 1.0 + 1e-4);
  EXPECT_EQ(evaluate_selection(sc, pick(sc.M(), {4, 4}), b.decisions), std::numeric_limits<double>::infinity());
}

TEST(Position, SingleElementMatchesEnumeration) {
  ScenarioConfig c = small_config();
  c.N = 1;
  c.delta_d = 1.0;  // a single element has a flat pattern
  const Scenario sc = sample_scenario(c, 6);
  const SelectionState init = initial_selection(sc);
  const BcdResult b = bcd_loop(sc, init);
  ASSERT_TRUE(b.feasible);
  double best = std::numeric_limits<double>::infinity();
  for (int m = 0; m < sc.M(); ++m) best = std::min(best, evaluate_selection(sc, pick(sc.M(), {m}), b.decisions));
  const PositionResult r = position_sca_loop(sc, init, b.decisions);
  EXPECT_TRUE(validate_selection(r.selection, sc.D, c.d_min).empty());
  EXPECT_NEAR(r.value, best, 1e-6 * std::max(1.0, best));
}

TEST(Position, P3BuildsAndSolvesOnFourPositions) {
  ScenarioConfig c = small_config();
  c.a = 1.0 / 6.0;  // 2 x 2 grid
  c.d_min = 0.012;  // only the diagonals are far enough apart
  c.mse_ref_fraction = 0.3;
  const Scenario sc = sample_scenario(c, 7);
  ASSERT_EQ(sc.M(), 4);
  const SelectionState sel = pick(4, {0, 3});
  const BcdResult b = bcd_loop(sc, sel);
  ASSERT_TRUE(b.feasible) << b.failure;
  std::vector<Vec> b0 = {sel.b(0), sel.b(1)};
  const GloverLayout L = glover_layout(2, 4);
  Vec phi0 = Vec::Zero(L.size);
  phi0(L.phi(0, 0, 3)) = 1.0;
  const P3Program p3 = build_p3(sc, b.decisions, b0, phi0, {1e-2, 1e-2, 1e-2, 1e-2});
  const Solution s = solve(p3.prog);
  ASSERT_EQ(s.status, SolveStatus::Optimal);
  for (const auto& row : p3.b) {
    double sum = 0.0;
    for (int v : row) {
      EXPECT_GE(s.value(v), -1e-6);
      EXPECT_LE(s.value(v), 1.0 + 1e-6);
      sum += s.value(v);
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
  std::vector<Vec> relaxed(2, Vec::Zero(4));
  for (int n = 0; n < 2; ++n)
    for (int m = 0; m < 4; ++m) relaxed[n](m) = s.value(p3.b[n][m]);
  EXPECT_TRUE(validate_selection(round_selection(relaxed, sc.D, c.d_min), sc.D, c.d_min).empty());
}

TEST(Ao, TraceNonIncreasingAndVerified) {
  const Scenario sc = sample_scenario(small_config(), 8);
  const AoResult r = ao_loop(sc);
  ASSERT_TRUE(r.feasible) << r.failure;
  EXPECT_LE(r.iterations, sc.cfg.ao_max_iters);
  for (size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1] * (1 + 1e-6));
  const FeasibilityReport rep = verify_solution(sc, r.selection, r.decisions, 1000, 10000, 8);
  for (const auto& v : rep.violations) ADD_FAILURE() << v;
  EXPECT_TRUE(rep.feasible);
}

TEST(Ao, VanishingRequirementsDriveZeroPower) {
  ScenarioConfig c = small_config();
  c.gamma_th_db = -300.0;
  c.r_min = 1e-9;
  const Scenario sc = sample_scenario(c, 9);
  const AoResult r = ao_loop(sc);
  ASSERT_TRUE(r.feasible) << r.failure;
  const AoResult base = ao_loop(sample_scenario(small_config(), 9));
  ASSERT_TRUE(base.feasible);
  EXPECT_LT(r.objective, 1e-6 * base.objective);
}
