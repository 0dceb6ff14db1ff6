#include "bearsync/estimator.hpp"

#include <chrono>
#include <limits>
#include <cmath>
#include <sstream>

#include "bearsync/errors.hpp"

namespace bearsync {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

SdpSolution run_solver(const SdpProblem& problem, const SolverConfig& config) {
  static const InteriorPointSolver kDefault;
  const SdpBackend& backend = config.backend ? *config.backend : kDefault;
  SdpSolution sol = backend.solve(problem, config.sdp);
  if (sol.status == SdpStatus::Infeasible) {
    throw Error(ErrorKind::Infeasible, "semidefinite relaxation reported infeasibility");
  }
  return sol;
}

void fill_diagnostics(const SdpSolution& sol, const SolverConfig& config, RelativeEstimate& est) {
  est.cost = sol.primal_objective;
  est.lower_bound = sol.dual_objective;
  est.rank_ratio = tightness(sol);
  est.tight = est.rank_ratio <= config.tightness_threshold;
  est.solver_status = sol.status;
  est.solver_iterations = sol.iterations;
  if (sol.status == SdpStatus::MaxIterations) {
    est.warnings.push_back("solver hit the iteration limit before reaching tolerance");
  }
  if (!est.tight) {
    std::ostringstream os;
    os << "relaxation not certified tight (rank ratio " << est.rank_ratio << ")";
    est.warnings.push_back(os.str());
  }
}

void check_distances(RelativeEstimate& est) {
  Eigen::Index negative = 0;
  for (Eigen::Index k = 0; k < est.distances.size(); ++k) negative += est.distances(k) <= 0.0;
  if (negative > 0) {
    est.warnings.push_back(std::to_string(negative) + " recovered distances are not positive");
  }
}

}  // namespace

Decoded decode(const Eigen::VectorXd& z, double consistency_tol) {
  using namespace lifted;
  if (z.size() != kDim || !z.allFinite()) {
    throw Error(ErrorKind::InvalidConfig, "lifted vector must have 20 finite entries");
  }
  if (!(std::abs(z(kY)) > 1e-12)) {
    throw Error(ErrorKind::DegenerateSolution, "homogenizing entry is zero");
  }
  const Eigen::VectorXd zn = z / z(kY);
  const Vec9 rs = zn.segment<9>(kRs);
  const Vec9 rp = zn.segment<9>(kRp);
  Decoded d;
  d.y = z(kY);
  d.rotation = project_to_rotation(unvec(rp));
  d.offset = zn(kDt);
  d.offset_ratio = rs.dot(rp) / rp.dot(rp);
  if (std::abs(d.offset - d.offset_ratio) > consistency_tol) {
    std::ostringstream os;
    os << "offset readouts disagree: lifted " << d.offset << " s vs ratio " << d.offset_ratio
       << " s";
    throw Error(ErrorKind::InconsistentLift, os.str());
  }
  return d;
}

RelativeEstimate solve_nto(const MeasurementBundle& bundle, const SolverConfig& config) {
  using namespace lifted;
  const auto start = Clock::now();
  const StackedProblem problem = assemble(bundle, Formulation::WithOffset);
  SdpProblem sdp{problem.Q0, build_constraints(config.constraints)};
  const SdpSolution sol = run_solver(sdp, config);

  RelativeEstimate est;
  fill_diagnostics(sol, config, est);
  const Eigen::VectorXd z = extract_rank1(sol, kY);
  if (z(kY) < 0.5) {
    std::ostringstream os;
    os << "extracted homogenizing entry " << z(kY) << " < 0.5";
    throw Error(ErrorKind::DegenerateSolution, os.str());
  }
  // The readout cross-check is a certificate only for a tight relaxation;
  // otherwise the disagreement is surfaced as a warning on a best-effort
  // decode.
  const Decoded d =
      decode(z, est.tight ? config.lift_consistency_tol : std::numeric_limits<double>::infinity());
  if (!est.tight && std::abs(d.offset - d.offset_ratio) > config.lift_consistency_tol) {
    std::ostringstream os;
    os << "offset readouts disagree: lifted " << d.offset << " s vs ratio " << d.offset_ratio << " s";
    est.warnings.push_back(os.str());
  }
  est.rotation = d.rotation;
  est.offset = d.offset;
  est.offset_ratio = d.offset_ratio;

  const Eigen::VectorXd feasible = lift(d.rotation, d.offset);
  est.rounded_cost = feasible.dot(problem.Q0 * feasible);
  const Marginalized w = recover_marginalized(problem, feasible.head(problem.reduced_dim()));
  est.translation = w.translation;
  est.distances = w.distances;
  check_distances(est);
  est.wall_time = seconds_since(start);
  return est;
}

RelativeEstimate solve_baseline(const MeasurementBundle& bundle, const SolverConfig& config) {
  const auto start = Clock::now();
  const StackedProblem problem = assemble(bundle, Formulation::NoOffset);
  SdpProblem sdp{problem.Q0, build_baseline_constraints()};
  const SdpSolution sol = run_solver(sdp, config);

  RelativeEstimate est;
  fill_diagnostics(sol, config, est);
  const Eigen::VectorXd z = extract_rank1(sol, 9);
  if (z(9) < 0.5) {
    std::ostringstream os;
    os << "extracted homogenizing entry " << z(9) << " < 0.5";
    throw Error(ErrorKind::DegenerateSolution, os.str());
  }
  const Vec9 rp = z.head<9>() / z(9);
  est.rotation = project_to_rotation(unvec(rp));
  est.offset = 0.0;
  est.offset_ratio = 0.0;

  Eigen::VectorXd feasible(10);
  feasible.head<9>() = vec(est.rotation.matrix());
  feasible(9) = 1.0;
  est.rounded_cost = feasible.dot(problem.Q0 * feasible);
  const Marginalized w = recover_marginalized(problem, feasible);
  est.translation = w.translation;
  est.distances = w.distances;
  check_distances(est);
  est.wall_time = seconds_since(start);
  return est;
}

RelativeEstimate estimate_nto(std::span<const BearingObservation> bearings,
                              const Trajectory& observer, const Trajectory& observed,
                              const SolverConfig& config) {
  const auto start = Clock::now();
  RelativeEstimate est = solve_nto(bundle(bearings, observer, observed), config);
  est.wall_time = seconds_since(start);
  return est;
}

RelativeEstimate estimate_baseline(std::span<const BearingObservation> bearings,
                                   const Trajectory& observer, const Trajectory& observed,
                                   const SolverConfig& config) {
  const auto start = Clock::now();
  RelativeEstimate est = solve_baseline(bundle(bearings, observer, observed), config);
  est.wall_time = seconds_since(start);
  return est;
}

ItoResult estimate_ito(std::span<const BearingObservation> bearings, const Trajectory& observer,
                       const Trajectory& observed, const ItoConfig& config) {
  if (config.max_iterations < 1) throw Error(ErrorKind::InvalidConfig, "max_iterations must be >= 1");
  if (!(config.epsilon > 0.0)) throw Error(ErrorKind::InvalidConfig, "epsilon must be > 0");
  ItoResult result;
  Trajectory current = observed;
  for (int i = 0; i < config.max_iterations; ++i) {
    RelativeEstimate est = estimate_nto(bearings, observer, current, config.solver);
    result.wall_time += est.wall_time;
    const double step = est.offset;
    result.offsets.push_back(step);
    result.total_offset += step;
    result.iterations = i + 1;
    result.final_estimate = std::move(est);
    if (std::abs(step) < config.epsilon) {
      result.converged = true;
      break;
    }
    // Re-label the observed odometry so the sample at tau is the one the
    // current estimate pairs with tau: new(tau) = old(tau + step).
    current = shift_trajectory(current, step);
  }
  result.final_estimate.offset = result.total_offset;
  if (!result.converged) {
    result.final_estimate.warnings.push_back("iterative offset estimation did not converge");
  }
  return result;
}

}  // namespace bearsync
