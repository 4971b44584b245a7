#include "isac/optimizer.hpp"

#include "isac/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace isac {

namespace {

constexpr double kRelTol = 1e-6;

double min_eig(const CMat& X) {
  if (X.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<CMat> es((X + X.adjoint()) / 2.0, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

std::string fmt(const std::string& what, int q, double value) {
  std::ostringstream os;
  os << what << " [q=" << q << "] " << value;
  return os.str();
}

}  // namespace

FeasibilityReport verify_solution(const Scenario& sc, const SelectionState& sel, const Decisions& d, int csi_samples,
                                  int rcs_samples, std::uint64_t seed) {
  FeasibilityReport rep;
  auto fail = [&](std::string msg) {
    rep.feasible = false;
    rep.violations.push_back(std::move(msg));
  };
  const int N = sc.N(), K = sc.K(), Q = sc.Q();
  if (static_cast<int>(d.size()) != Q) {
    fail("decision count does not match the snapshot count");
    return rep;
  }
  for (const auto& v : validate_selection(sel, sc.D, sc.cfg.d_min)) fail("selection: " + v.message);
  if (sel.N() != N) return rep;

  const double T = sc.T_tot();
  double total_t = 0.0;
  for (int q = 0; q < Q; ++q) {
    const double t = d[q].t;
    total_t += t;
    if (t < sc.plan.t_min * (1 - kRelTol) || t > sc.plan.t_max * (1 + kRelTol)) fail(fmt("C8 duration", q, t));
    const double p = d[q].power();
    if (p > sc.p_max * (1 + kRelTol)) fail(fmt("C1 power", q, p));
    const double scale = std::max(p, std::numeric_limits<double>::min());
    for (const auto& w : d[q].W)
      if (min_eig(w) < -1e-6 * scale) fail(fmt("W not PSD", q, min_eig(w)));
    if (min_eig(d[q].R) < -1e-6 * scale) fail(fmt("R not PSD", q, min_eig(d[q].R)));
  }
  if (total_t > sc.time_budget * (1 + kRelTol)) fail(fmt("C9 total duration", -1, total_t));

  // sensing: boresight gain against the chance floor, beam MSE against its cap
  const CMat A = sc.steering.effective(sel);
  rep.min_gain_ratio = std::numeric_limits<double>::infinity();
  Rng rcs_rng(derive_seed(seed, 11));
  for (int q = 0; q < Q; ++q) {
    const CMat Rx = d[q].Rx();
    if (sc.sensing.gamma_th > 0) {
      const double g = beam_gain(sc.steering.effective_boresight(sel, q), Rx);
      const double ratio = g / sc.gain_floor(q, d[q].t);
      rep.min_gain_ratio = std::min(rep.min_gain_ratio, ratio);
      if (ratio < 1 - kRelTol) fail(fmt("C7 gain ratio", q, ratio));
      if (rcs_samples > 0) {
        const double out = empirical_outage(rcs_rng, rcs_samples, sc.sensing.omega_av.at(q), g, d[q].t, T,
                                            sc.sensing.gamma_th, sc.sensing.psi, sc.sensing.sigma2, sc.sensing.L0);
        rep.max_outage = std::max(rep.max_outage, out);
        if (out > sc.sensing.nu + 0.01) fail(fmt("C4 empirical outage", q, out));
      }
    }
    if (std::isfinite(sc.sensing.delta_d)) {
      const Vec& mask = sc.pattern.mask[q];
      const Vec gains = (A.adjoint() * Rx * A).diagonal().real();
      // the stored scale or the least-squares one, whichever is better
      const double ls = std::max(0.0, mask.dot(gains) / std::max(mask.sum(), 1.0));
      const double mse = std::min(beam_mse(d[q].rho0, mask, A, Rx), beam_mse(ls, mask, A, Rx));
      const double ref = sc.mse_reference(q);
      const double ratio = mse / (sc.sensing.delta_d * ref * ref);
      rep.max_mse_ratio = std::max(rep.max_mse_ratio, ratio);
      if (ratio > 1 + 1e-4) fail(fmt("C6 beam MSE ratio", q, ratio));
    }
  }
  if (!std::isfinite(rep.min_gain_ratio)) rep.min_gain_ratio = 0.0;

  // communication: sampled rates on the error sphere plus the LMI certificate
  if (K > 0) {
    const CMat H = sc.channels.effective(sel);
    Rng rng(derive_seed(seed, 13));
    auto rate_of = [&](int k, const CVec& h) {
      double r = 0.0;
      for (int q = 0; q < Q; ++q) {
        auto quad = [&](const CMat& X) { return (h.transpose() * X * h.conjugate())(0, 0).real(); };
        const CMat& Wk = d[q].W[k];
        const double sig = quad(Wk);
        const double interf = quad(d[q].Rx()) - sig;
        r += d[q].t / T * std::log2(1.0 + std::max(0.0, sig) / (std::max(0.0, interf) + sc.sensing.sigma2));
      }
      return r;
    };
    rep.min_rate_margin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      const CVec h0 = H.row(k).transpose();
      const double mu = sc.csi.mu(k);
      double worst = rate_of(k, h0);
      for (int s = 0; s < csi_samples; ++s) worst = std::min(worst, rate_of(k, h0 + sample_csi_error(rng, N, mu, true)));
      rep.min_rate_margin = std::min(rep.min_rate_margin, worst - sc.r_min(k));
      if (worst < sc.r_min(k) - kRelTol) fail(fmt("C2 sampled rate of user " + std::to_string(k), -1, worst));

      const double s = sc.channel_scale(k) > 0 ? sc.channel_scale(k) : 1.0;
      for (int q = 0; q < Q; ++q) {
        const double pu = std::max(d[q].power(), std::numeric_limits<double>::min());
        const CMat F = d[q].W[k] / pu;
        const CMat I = (d[q].Rx() - d[q].W[k]) / pu;
        const IotaSearch it =
            best_iota(h0 / s, mu / s, F, I, d[q].lambda(k), sc.sensing.sigma2 / (pu * s * s), LmiForm::Corrected);
        const double tol = 1e-6 * std::max(1.0, d[q].lambda(k)) * std::max(1.0, F.cwiseAbs().maxCoeff());
        if (it.min_eig < -tol) fail(fmt("C10b certificate of user " + std::to_string(k), q, it.min_eig));
      }
    }
  }
  return rep;
}

SelectionState initial_selection(const Scenario& sc) {
  return farthest_point_selection(sc.grid, sc.N(), sc.cfg.d_min, sc.init_area);
}

AoResult ao_loop(const Scenario& sc, const SelectionState* init) {
  const auto start = std::chrono::steady_clock::now();
  AoResult res;
  auto finish = [&]() {
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
  };
  res.selection = init ? *init : initial_selection(sc);
  BcdResult bcd = bcd_loop(sc, res.selection);
  res.bcd_traces.push_back(bcd.trace);
  if (!bcd.feasible) {
    res.failure = "initial BCD: " + bcd.failure;
    return finish();
  }
  res.feasible = true;
  res.decisions = bcd.decisions;
  res.objective = bcd.objective;
  res.trace.push_back(bcd.objective);
  res.min_rank_one_ratio = bcd.min_rank_one_ratio;
  res.randomized = bcd.randomized;

  for (int it = 0; it < sc.cfg.ao_max_iters - 1; ++it) {
    res.iterations = it + 1;
    const PositionResult pos = position_sca_loop(sc, res.selection, res.decisions);
    if (pos.selection.index == res.selection.index) break;
    BcdResult next = bcd_loop(sc, pos.selection);
    res.bcd_traces.push_back(next.trace);
    if (!next.feasible || !(next.objective < res.objective)) break;
    const double prev = res.objective;
    res.selection = pos.selection;
    res.decisions = std::move(next.decisions);
    res.objective = next.objective;
    res.trace.push_back(next.objective);
    res.min_rank_one_ratio = std::min(res.min_rank_one_ratio, next.min_rank_one_ratio);
    res.randomized = res.randomized || next.randomized;
    if ((prev - res.objective) <= sc.cfg.eps_ao * prev) break;
  }
  return finish();
}

}  // namespace isac
