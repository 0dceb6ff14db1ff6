// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every run is seeded, so the numbers are reproducible.
#include <Eigen/QR>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bearsync/bench.hpp"
#include "bearsync/errors.hpp"
#include "bearsync/estimator.hpp"
#include "bearsync/rng.hpp"
#include "bearsync/simulation.hpp"

using namespace bearsync;

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

Scenario scenario(double offset, double sigma, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.true_offset = offset;
  cfg.sigma = sigma;
  return make_scenario(cfg, seed);
}

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("[%s] %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(),
              seconds(start));
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Synchronized recovery.
Outcome synchronized_recovery() {
  const auto start = Clock::now();
  int good = 0;
  double worst_rot = 0, worst_tr = 0, worst_off = 0, worst_rank = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Scenario sc = scenario(0.0, 0.0, derive_seed(1001, s));
    try {
      const RelativeEstimate e = estimate_nto(sc.bearings, sc.observer, sc.observed);
      const double rot = geodesic_deg(e.rotation, sc.truth.rotation);
      const double tr = (e.translation - sc.truth.translation).norm();
      const double off = std::abs(e.offset);
      worst_rot = std::max(worst_rot, rot);
      worst_tr = std::max(worst_tr, tr);
      worst_off = std::max(worst_off, off);
      worst_rank = std::max(worst_rank, e.rank_ratio);
      good += rot < 0.01 && tr < 1e-3 && off < 1e-3 && e.rank_ratio < 1e-6;
    } catch (const Error&) {
    }
  }
  const double t = seconds(start);
  return {good >= 49 && t < 180.0,
          fmt("%d/50 within tolerance (need 49); worst rot %.2e deg, trans %.2e m, offset %.2e s, "
              "rank %.2e",
              good, worst_rot, worst_tr, worst_off, worst_rank)};
}

// 2. NTO tolerance regime.
Outcome nto_tolerance() {
  std::map<double, double> med;
  for (double off : {0.1, 0.2, 0.3, 1.0}) {
    std::vector<double> errs;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Scenario sc = scenario(off, 0.0, derive_seed(2002, s));
      try {
        errs.push_back(std::abs(estimate_nto(sc.bearings, sc.observer, sc.observed).offset - off));
      } catch (const Error&) {
        errs.push_back(std::numeric_limits<double>::infinity());
      }
    }
    med[off] = median(errs);
  }
  const bool pass = med[0.1] < 0.05 && med[0.2] < 0.05 && med[0.3] < 0.05 && med[1.0] > 0.1;
  return {pass, fmt("median |offset error|: 0.1 s -> %.4f, 0.2 s -> %.4f, 0.3 s -> %.4f (need < "
                    "0.05); 1.0 s -> %.4f (need > 0.1)",
                    med[0.1], med[0.2], med[0.3], med[1.0])};
}

// 3. ITO extended range.
Outcome ito_range() {
  bool pass = true;
  std::string detail;
  for (double off : {0.6, 1.0, 1.2}) {
    std::vector<double> errs, ranks;
    int converged = 0, max_iter = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Scenario sc = scenario(off, 0.0, derive_seed(3003, s));
      try {
        const ItoResult r = estimate_ito(sc.bearings, sc.observer, sc.observed);
        errs.push_back(std::abs(r.total_offset - off));
        ranks.push_back(r.final_estimate.rank_ratio);
        converged += r.converged;
        max_iter = std::max(max_iter, r.iterations);
      } catch (const Error&) {
        errs.push_back(std::numeric_limits<double>::infinity());
        ranks.push_back(1.0);
      }
    }
    const double me = median(errs), mr = median(ranks);
    pass = pass && me < 0.05 && mr < 1e-5 && converged == 20;
    detail += fmt("%s%.1f s: median err %.2e s, median rank %.1e, converged %d/20 (max %d iters)",
                  detail.empty() ? "" : "; ", off, me, mr, converged, max_iter);
  }
  return {pass, detail};
}

// 4. Method ordering on the scaled grid. Means per offset row pool the
// three noise levels (15 trials per method) over trials where every method
// produced an estimate.
Outcome method_ordering() {
  ExperimentConfig cfg;
  cfg.seed = 4004;
  cfg.offsets = {0.0, 0.5, 1.0};
  cfg.sigmas = {0.0, 0.05, 0.1};
  cfg.trials = 5;
  const auto recs = run_sweep(cfg, {Method::Baseline, Method::Nto, Method::Ito});
  bool pass = true;
  std::string detail;
  for (double off : {0.5, 1.0}) {
    std::map<std::pair<double, int>, std::map<Method, const TrialRecord*>> by_trial;
    for (const auto& r : recs) {
      if (r.true_offset == off) by_trial[{r.sigma, r.trial_id}][r.method] = &r;
    }
    std::map<Method, std::vector<double>> rot, offe;
    int used = 0;
    for (const auto& [key, m] : by_trial) {
      bool all_ok = m.size() == 3;
      for (const auto& [method, r] : m) all_ok = all_ok && r->status == TrialStatus::Ok;
      if (!all_ok) continue;
      ++used;
      for (const auto& [method, r] : m) {
        rot[method].push_back(r->rotation_error);
        offe[method].push_back(r->offset_error);
      }
    }
    const double rb = mean(rot[Method::Baseline]), rn = mean(rot[Method::Nto]),
                 ri = mean(rot[Method::Ito]);
    const double on = mean(offe[Method::Nto]), oi = mean(offe[Method::Ito]);
    pass = pass && used > 0 && ri <= rn && rn <= rb && oi <= on;
    detail += fmt("%soffset %.1f (%d/15 trials): rot ITO %.2f <= NTO %.2f <= base %.2f deg, "
                  "offset err ITO %.3f <= NTO %.3f s",
                  detail.empty() ? "" : "; ", off, used, ri, rn, rb, oi, on);
  }
  return {pass, detail};
}

// 5. Relaxation lower bound.
Outcome relaxation_bound() {
  int violations = 0, checked = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Scenario sc = scenario(0.1 * static_cast<double>(s % 5), 0.01 * static_cast<double>(s), derive_seed(5005, s));
    const StackedProblem p = assemble(bundle(sc.bearings, sc.observer, sc.observed));
    const SdpSolution sol = solve(SdpProblem{p.Q0, build_constraints()});
    Rng rng(derive_seed(5006, s));
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd z = lift(rng.rotation(), rng.uniform(-2.0, 2.0), 1.0);
      const double v = z.dot(p.Q0 * z);
      ++checked;
      violations += sol.primal_objective > v + 1e-9 * std::abs(v);
    }
  }
  return {violations == 0, fmt("%d violations in %d checks", violations, checked)};
}

// 6. Schur marginalization against a dense least-squares oracle.
Outcome schur_oracle() {
  double worst_rel = 0.0, worst_dist = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const double sigma = s < 10 ? 0.0 : 0.05;
    const Scenario sc = scenario(s < 10 ? 0.0 : 0.3, sigma, derive_seed(6006, s));
    const MeasurementBundle mb = bundle(sc.bearings, sc.observer, sc.observed);
    const StackedProblem p = assemble(mb);
    const std::size_t n = mb.size();
    Eigen::MatrixXd rows(3 * static_cast<Eigen::Index>(n), 22 + static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      rows.middleRows(3 * static_cast<Eigen::Index>(k), 3) = residual_matrix(mb.measurements[k], k, n);
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(rows.rightCols(rows.cols() - 19));
    Rng rng(derive_seed(6007, s));
    Eigen::VectorXd xr(19);
    for (int i = 0; i < 19; ++i) xr(i) = rng.normal();
    const Eigen::VectorXd w = qr.solve(-rows.leftCols(19) * xr);
    const double full = (rows.leftCols(19) * xr + rows.rightCols(rows.cols() - 19) * w).squaredNorm();
    worst_rel = std::max(worst_rel, std::abs(full - xr.dot(p.Qbar * xr)) / std::max(1.0, full));
    if (sigma == 0.0) {
      Eigen::VectorXd truth = Eigen::VectorXd::Zero(19);
      truth.segment<9>(9) = vec(sc.truth.rotation.matrix());
      truth(18) = 1.0;
      const Marginalized m = recover_marginalized(p, truth);
      for (std::size_t k = 0; k < n; ++k) {
        const double d = (sc.observed_spline.position(sc.bearings[k].t) -
                          sc.observer_spline.position(sc.bearings[k].t)).norm();
        worst_dist = std::max(worst_dist, std::abs(m.distances(static_cast<Eigen::Index>(k)) - d));
      }
    }
  }
  return {worst_rel < 1e-8 && worst_dist < 1e-6,
          fmt("worst relative cost mismatch %.2e (need < 1e-8), worst distance error %.2e m "
              "(need < 1e-6)",
              worst_rel, worst_dist)};
}

// 7. Constraint correctness.
Outcome constraints() {
  const auto cs = build_constraints();
  Rng rng(7007);
  double worst_feasible = 0.0;
  int undetected = 0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd z =
        lift(rng.rotation(), rng.uniform(-2.0, 2.0), rng.uniform() < 0.5 ? -1.0 : 1.0);
    for (const auto& c : cs) worst_feasible = std::max(worst_feasible, std::abs(c.residual(z)));
    Eigen::VectorXd d(20);
    for (int j = 0; j < 20; ++j) d(j) = rng.normal();
    const Eigen::VectorXd bad = z + 0.01 * d.normalized();
    double worst = 0.0;
    for (const auto& c : cs) worst = std::max(worst, std::abs(c.residual(bad)));
    undetected += worst <= 1e-4;
  }
  return {cs.size() == 52 && worst_feasible < 1e-10 && undetected == 0,
          fmt("%zu constraints; worst feasible residual %.2e; %d/1000 perturbed points undetected",
              cs.size(), worst_feasible, undetected)};
}

// 8. Shift equivariance and gauge consistency.
Outcome equivariance() {
  int shift_ok = 0, gauge_ok = 0;
  double worst_shift = 0, worst_rot = 0, worst_tr = 0, worst_off = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Scenario sc = scenario(0.1, 0.0, derive_seed(8008, s));
    const RelativeEstimate base = estimate_nto(sc.bearings, sc.observer, sc.observed);
    bool ok = true;
    for (double d : {-0.2, -0.1, 0.1, 0.2}) {
      const double moved =
          estimate_nto(sc.bearings, sc.observer, shift_trajectory(sc.observed, d)).offset;
      const double err = std::abs(moved - base.offset + d);
      worst_shift = std::max(worst_shift, err);
      ok = ok && err < 0.02;
    }
    shift_ok += ok;

    Rng rng(derive_seed(8009, s));
    const Rotation3 gr = rng.rotation();
    const Vec3 gt = rng.normal3();
    const RelativeEstimate g =
        estimate_nto(sc.bearings, sc.observer, express_in_frame(sc.observed, gr, gt));
    const double rot = geodesic_deg(g.rotation, base.rotation * gr);
    const double tr = (g.translation - (base.rotation * gt + base.translation)).norm();
    const double off = std::abs(g.offset - base.offset);
    worst_rot = std::max(worst_rot, rot);
    worst_tr = std::max(worst_tr, tr);
    worst_off = std::max(worst_off, off);
    gauge_ok += rot < 0.05 && tr < 1e-3 && off < 1e-3;
  }
  return {shift_ok == 20 && gauge_ok == 20,
          fmt("shift %d/20 (worst %.2e s), gauge %d/20 (worst %.2e deg, %.2e m, %.2e s)", shift_ok,
              worst_shift, gauge_ok, worst_rot, worst_tr, worst_off)};
}

// 9. Solver performance.
Outcome performance() {
  double worst_sdp = 0.0, worst_ito = 0.0, worst_gap = 0.0;
  bool optimal = true;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Scenario sc = scenario(0.2 * static_cast<double>(s), 0.05, derive_seed(9009, s));
    const StackedProblem p = assemble(bundle(sc.bearings, sc.observer, sc.observed));
    const SdpProblem sdp{p.Q0, build_constraints()};
    auto t0 = Clock::now();
    const SdpSolution sol = solve(sdp);
    worst_sdp = std::max(worst_sdp, seconds(t0));
    worst_gap = std::max(worst_gap, sol.gap);
    optimal = optimal && sol.status == SdpStatus::Optimal;
    t0 = Clock::now();
    estimate_ito(sc.bearings, sc.observer, sc.observed);
    worst_ito = std::max(worst_ito, seconds(t0));
  }
  return {optimal && worst_gap <= 1e-8 && worst_sdp < 2.0 && worst_ito < 20.0,
          fmt("worst SDP solve %.3f s (gap %.1e, need < 2 s), worst full ITO run %.3f s (need < "
              "20 s)",
              worst_sdp, worst_gap, worst_ito)};
}

}  // namespace

int main() {
  report(1, "synchronized recovery", synchronized_recovery);
  report(2, "NTO tolerance regime", nto_tolerance);
  report(3, "ITO extended range", ito_range);
  report(4, "method ordering", method_ordering);
  report(5, "relaxation bound", relaxation_bound);
  report(6, "Schur oracle equivalence", schur_oracle);
  report(7, "constraint correctness", constraints);
  report(8, "shift equivariance and gauge consistency", equivariance);
  report(9, "solver performance", performance);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
