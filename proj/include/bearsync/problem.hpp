#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "bearsync/geometry.hpp"
#include "bearsync/trajectory.hpp"

namespace bearsync {

inline constexpr std::size_t kMinMeasurements = 12;

struct Measurement {
  Vec3 g;   // bearing rotated into the observer's odometry frame
  Vec3 t1;  // observer translation
  Vec3 t2;  // observed translation (observed clock = observer timestamp)
  Vec3 v2;  // observed velocity
  Mat3 weight = Mat3::Identity();
};

struct MeasurementBundle {
  std::vector<Measurement> measurements;
  std::size_t size() const { return measurements.size(); }
};

// Time-aligns every bearing with both odometries at the bearing timestamp.
// Throws OutOfRange, TooFewMeasurements, InvalidConfig (bad weights).
MeasurementBundle bundle(std::span<const BearingObservation> bearings, const Trajectory& observer,
                         const Trajectory& observed,
                         std::optional<std::span<const Mat3>> weights = std::nullopt);

// Which unknowns the stacked residual carries.
//   WithOffset: x = [r_s; r_p; y; t; D_1..D_N], reduced block [r_s; r_p; y] (19)
//   NoOffset:   x = [r_p; y; t; D_1..D_N],      reduced block [r_p; y]       (10)
enum class Formulation { WithOffset, NoOffset };

struct StackedProblem {
  Formulation formulation = Formulation::WithOffset;
  std::size_t n = 0;          // measurement count
  Eigen::MatrixXd Q;          // full data matrix
  Eigen::MatrixXd A, B, C;    // Q = [A B; B^T C]
  Eigen::MatrixXd Qbar;       // A - B C^-1 B^T
  Eigen::MatrixXd Q0;         // lifted cost
  Eigen::LLT<Eigen::MatrixXd> c_factor;
  double c_condition = 0.0;

  Eigen::Index reduced_dim() const { return A.rows(); }
  Eigen::Index lifted_dim() const { return Q0.rows(); }
};

// Per-measurement 3 x (dim) residual matrix so that A_k x = e_k.
Eigen::MatrixXd residual_matrix(const Measurement& m, std::size_t k, std::size_t n,
                                Formulation f = Formulation::WithOffset);

// Throws SingularMarginalization when C is not positive definite or its
// condition number exceeds 1e12.
StackedProblem assemble(const MeasurementBundle& bundle, Formulation f = Formulation::WithOffset);

// Schur-complement marginalization of an arbitrary partitioned PSD matrix;
// exposed for testing and reuse. `keep` leading rows/cols are retained.
StackedProblem marginalize(Eigen::MatrixXd Q, Eigen::Index keep, Formulation f, std::size_t n);

struct Marginalized {
  Vec3 translation;
  Eigen::VectorXd distances;
};

// Back-substitution w* = -C^-1 B^T x_reduced.
Marginalized recover_marginalized(const StackedProblem& problem, const Eigen::VectorXd& reduced);

struct QuadraticConstraint {
  Eigen::MatrixXd Q;
  double g = 0.0;
  std::string label;

  double residual(const Eigen::VectorXd& z) const { return z.dot(Q * z) - g; }
};

// Lifted-variable layout z = [r_s (0..8); r_p (9..17); y (18); dt (19)].
namespace lifted {
inline constexpr int kRs = 0;
inline constexpr int kRp = 9;
inline constexpr int kY = 18;
inline constexpr int kDt = 19;
inline constexpr int kDim = 20;
}  // namespace lifted

struct ConstraintOptions {
  bool offset_family = true;  // the 21 scaled-rotation constraints on r_s
  bool linking = true;        // dt * r_p - y * r_s = 0
};

// Scaled-rotation constraints (6 column, 6 row orthonormality and 9 cross
// product components) on the 3x3 block stored column-major at z[block..block+8]
// with scale z[scale].
std::vector<QuadraticConstraint> scaled_rotation_constraints(int dim, int block, int scale,
                                                             const std::string& tag);

// The full 52-constraint set on z (or a subset per options).
std::vector<QuadraticConstraint> build_constraints(const ConstraintOptions& opts = {});

// Constraints for the offset-free lifted variable [r_p (0..8); y (9)]: 22.
std::vector<QuadraticConstraint> build_baseline_constraints();

// z = [dt*vec(R); vec(R); y; dt] scaled by the sign of y.
Eigen::VectorXd lift(const Rotation3& rotation, double offset, double y = 1.0);

}  // namespace bearsync
