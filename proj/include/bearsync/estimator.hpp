#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "bearsync/geometry.hpp"
#include "bearsync/problem.hpp"
#include "bearsync/sdp.hpp"
#include "bearsync/trajectory.hpp"

namespace bearsync {

struct SolverConfig {
  SdpOptions sdp;
  double tightness_threshold = kDefaultTightnessThreshold;
  double lift_consistency_tol = 0.05;  // s, between the two offset readouts
  ConstraintOptions constraints;
  const SdpBackend* backend = nullptr;  // nullptr selects InteriorPointSolver
};

struct RelativeEstimate {
  Rotation3 rotation;                // observed odometry frame -> observer odometry frame
  Vec3 translation = Vec3::Zero();   // m
  double offset = 0.0;               // s (ITO: accumulated total)
  double offset_ratio = 0.0;         // <r_s, r_p> / <r_p, r_p> readout
  Eigen::VectorXd distances;         // m, per bearing
  double cost = 0.0;                 // SDP primal objective
  double rounded_cost = 0.0;         // lifted cost at the decoded feasible point
  double lower_bound = 0.0;          // SDP dual objective
  double rank_ratio = 0.0;
  bool tight = false;
  SdpStatus solver_status = SdpStatus::Optimal;
  int solver_iterations = 0;
  double wall_time = 0.0;            // s, alignment + assembly + solve + decode
  std::vector<std::string> warnings;
};

struct Decoded {
  Rotation3 rotation;
  double offset = 0.0;        // lifted entry, after scaling y to 1
  double offset_ratio = 0.0;  // <r_s, r_p> / <r_p, r_p>
  double y = 1.0;             // y before normalization
};

// Normalizes z so y = 1, rounds r_p onto SO(3) and reads the offset. Throws
// InconsistentLift when the two offset readouts differ by more than
// `consistency_tol`, DegenerateMatrix from the projection.
Decoded decode(const Eigen::VectorXd& z, double consistency_tol = 0.05);

RelativeEstimate estimate_nto(std::span<const BearingObservation> bearings,
                              const Trajectory& observer, const Trajectory& observed,
                              const SolverConfig& config = {});

// Same pipeline without the offset unknowns; reported offset is 0.
RelativeEstimate estimate_baseline(std::span<const BearingObservation> bearings,
                                   const Trajectory& observer, const Trajectory& observed,
                                   const SolverConfig& config = {});

// Lower-level entry points working on an already aligned bundle.
RelativeEstimate solve_nto(const MeasurementBundle& bundle, const SolverConfig& config = {});
RelativeEstimate solve_baseline(const MeasurementBundle& bundle, const SolverConfig& config = {});

struct ItoConfig {
  int max_iterations = 10;
  double epsilon = 0.01;  // s
  SolverConfig solver;
};

struct ItoResult {
  double total_offset = 0.0;
  std::vector<double> offsets;
  RelativeEstimate final_estimate;
  bool converged = false;
  int iterations = 0;
  double wall_time = 0.0;
};

// Iterative refinement: solve, shift the observed odometry by the estimate,
// repeat until the increment falls below epsilon.
ItoResult estimate_ito(std::span<const BearingObservation> bearings, const Trajectory& observer,
                       const Trajectory& observed, const ItoConfig& config = {});

}  // namespace bearsync
