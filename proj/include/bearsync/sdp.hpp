#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "bearsync/problem.hpp"

namespace bearsync {

// min <C, X>  s.t.  <Q_i, X> = g_i,  X psd.
struct SdpProblem {
  Eigen::MatrixXd cost;
  std::vector<QuadraticConstraint> constraints;

  Eigen::Index dim() const { return cost.rows(); }
};

enum class SdpStatus { Optimal, MaxIterations, Infeasible };
const char* to_string(SdpStatus s);

struct SdpOptions {
  double gap_tol = 1e-8;
  double feas_tol = 1e-8;
  int max_iters = 100;
  double step_fraction = 0.98;  // fraction-to-boundary
  bool record_history = false;
};

struct SdpIterate {
  double primal_objective;
  double dual_objective;
  double primal_residual;  // relative, on the reduced scaled system
  double dual_residual;
  double mu;
};

struct SdpSolution {
  Eigen::MatrixXd Z;
  Eigen::VectorXd multipliers;  // one per input constraint (zero for dropped duplicates)
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;                 // relative duality gap, cost scaled to unit Frobenius norm
  double max_constraint_residual = 0.0;  // max_i |<Q_i, Z> - g_i|
  int iterations = 0;
  Eigen::VectorXd eigenvalues;      // descending
  Eigen::MatrixXd eigenvectors;     // columns match eigenvalues
  SdpStatus status = SdpStatus::MaxIterations;
  std::size_t independent_constraints = 0;
  std::vector<SdpIterate> history;
};

// Pluggable solver contract: cost and constraints in, psd matrix and
// diagnostics out.
class SdpBackend {
 public:
  virtual ~SdpBackend() = default;
  virtual SdpSolution solve(const SdpProblem& problem, const SdpOptions& options) const = 0;
};

// Dense primal-dual path-following interior-point method (HKM direction,
// Mehrotra predictor-corrector). Linearly dependent constraints are removed
// up front; inconsistent duplicates are reported as Infeasible.
class InteriorPointSolver final : public SdpBackend {
 public:
  SdpSolution solve(const SdpProblem& problem, const SdpOptions& options) const override;
};

SdpSolution solve(const SdpProblem& problem, const SdpOptions& options = {});

inline constexpr double kDefaultTightnessThreshold = 1e-5;

// lambda_2 / lambda_1 of the solution, clamped to [0, 1].
double tightness(const SdpSolution& solution);
double tightness(const Eigen::MatrixXd& Z);

// sqrt(lambda_1) u_1 with the sign chosen so z[sign_index] >= 0. Throws
// ZeroSolution when lambda_1 < 1e-12.
Eigen::VectorXd extract_rank1(const SdpSolution& solution, Eigen::Index sign_index);
Eigen::VectorXd extract_rank1(const Eigen::MatrixXd& Z, Eigen::Index sign_index);

// Text dump: a header line "sdp <dim> <count>", the cost matrix as <dim>
// whitespace-separated rows, then per constraint a line
// "constraint <label> <g>" followed by <dim> rows.
void write_sdp_text(std::ostream& os, const SdpProblem& problem);
SdpProblem read_sdp_text(std::istream& is);

}  // namespace bearsync
