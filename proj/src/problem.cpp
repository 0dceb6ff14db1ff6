#include "bearsync/problem.hpp"

#include <cmath>
#include <sstream>

#include "bearsync/errors.hpp"

namespace bearsync {

MeasurementBundle bundle(std::span<const BearingObservation> bearings, const Trajectory& observer,
                         const Trajectory& observed, std::optional<std::span<const Mat3>> weights) {
  if (bearings.size() < kMinMeasurements) {
    throw Error(ErrorKind::TooFewMeasurements,
                "got " + std::to_string(bearings.size()) + " bearings, need at least " +
                    std::to_string(kMinMeasurements));
  }
  if (weights && weights->size() != bearings.size()) {
    throw Error(ErrorKind::InvalidConfig, "weight count does not match bearing count");
  }
  MeasurementBundle out;
  out.measurements.reserve(bearings.size());
  for (std::size_t k = 0; k < bearings.size(); ++k) {
    const auto& b = bearings[k];
    const TimedPose a = interpolate(observer, b.t);
    const TimedPose o = interpolate(observed, b.t);
    Measurement m;
    m.g = a.rotation * b.direction;
    m.t1 = a.translation;
    m.t2 = o.translation;
    m.v2 = o.velocity;
    if (weights) {
      m.weight = (*weights)[k];
      if ((m.weight - m.weight.transpose()).cwiseAbs().maxCoeff() > 1e-12 || !m.weight.allFinite()) {
        throw Error(ErrorKind::InvalidConfig, "weight " + std::to_string(k) + " is not symmetric");
      }
    }
    out.measurements.push_back(m);
  }
  return out;
}

namespace {

struct Layout {
  Eigen::Index rs = -1, rp = 0, y = 0, t = 0, d = 0, keep = 0;
};

Layout layout_for(Formulation f) {
  if (f == Formulation::WithOffset) return {0, 9, 18, 19, 22, 19};
  return {-1, 0, 9, 10, 13, 10};
}

}  // namespace

Eigen::MatrixXd residual_matrix(const Measurement& m, std::size_t k, std::size_t n, Formulation f) {
  const Layout l = layout_for(f);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, l.d + static_cast<Eigen::Index>(n));
  if (l.rs >= 0) a.block<3, 9>(0, l.rs) = -kron_row(m.v2);
  a.block<3, 9>(0, l.rp) = -kron_row(m.t2);
  a.col(l.y) = m.t1;
  a.block<3, 3>(0, l.t) = -Mat3::Identity();
  a.col(l.d + static_cast<Eigen::Index>(k)) = m.g;
  return a;
}

StackedProblem marginalize(Eigen::MatrixXd Q, Eigen::Index keep, Formulation f, std::size_t n) {
  StackedProblem p;
  p.formulation = f;
  p.n = n;
  const Eigen::Index rest = Q.rows() - keep;
  p.A = Q.topLeftCorner(keep, keep);
  p.B = Q.topRightCorner(keep, rest);
  p.C = Q.bottomRightCorner(rest, rest);
  p.Q = std::move(Q);
  p.c_factor.compute(p.C);
  if (p.c_factor.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularMarginalization,
                "translation/distance block is not positive definite (degenerate geometry)");
  }
  const double rcond = p.c_factor.rcond();
  p.c_condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(p.c_condition <= 1e12)) {
    std::ostringstream os;
    os << "condition number of the translation/distance block is " << p.c_condition
       << " (> 1e12); bearings collinear or robots stationary";
    throw Error(ErrorKind::SingularMarginalization, os.str());
  }
  Eigen::MatrixXd qbar = p.A - p.B * p.c_factor.solve(p.B.transpose());
  p.Qbar = 0.5 * (qbar + qbar.transpose());
  if (f == Formulation::WithOffset) {
    p.Q0 = Eigen::MatrixXd::Zero(keep + 1, keep + 1);
    p.Q0.topLeftCorner(keep, keep) = p.Qbar;
  } else {
    p.Q0 = p.Qbar;
  }
  return p;
}

StackedProblem assemble(const MeasurementBundle& bundle, Formulation f) {
  const Layout l = layout_for(f);
  const std::size_t n = bundle.size();
  const Eigen::Index dim = l.d + static_cast<Eigen::Index>(n);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(dim, dim);
  // The distance columns of A_k are zero except column k, so the product is
  // accumulated densely over the leading block and patched for D_k.
  const Eigen::Index head = l.d;
  for (std::size_t k = 0; k < n; ++k) {
    const Measurement& m = bundle.measurements[k];
    const Eigen::MatrixXd ak = residual_matrix(m, 0, 1, f).leftCols(head);
    const Eigen::MatrixXd wa = m.weight * ak;
    const Eigen::Index dk = l.d + static_cast<Eigen::Index>(k);
    Q.topLeftCorner(head, head).noalias() += ak.transpose() * wa;
    const Eigen::VectorXd cross = wa.transpose() * m.g;
    Q.block(0, dk, head, 1) += cross;
    Q.block(dk, 0, 1, head) += cross.transpose();
    Q(dk, dk) += m.g.dot(m.weight * m.g);
  }
  Q = 0.5 * (Q + Q.transpose()).eval();
  return marginalize(std::move(Q), l.keep, f, n);
}

Marginalized recover_marginalized(const StackedProblem& problem, const Eigen::VectorXd& reduced) {
  if (reduced.size() != problem.reduced_dim() || !reduced.allFinite()) {
    throw Error(ErrorKind::InvalidConfig, "reduced vector has wrong size or non-finite entries");
  }
  if (problem.c_factor.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularMarginalization, "no factorization of the marginalized block");
  }
  const Eigen::VectorXd w = -problem.c_factor.solve(problem.B.transpose() * reduced);
  Marginalized out;
  out.translation = w.head<3>();
  out.distances = w.tail(w.size() - 3);
  return out;
}

namespace {

void add_sym(Eigen::MatrixXd& q, int i, int j, double v) {
  if (i == j) {
    q(i, i) += v;
  } else {
    q(i, j) += 0.5 * v;
    q(j, i) += 0.5 * v;
  }
}

constexpr int kTriples[3][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}};

double levi_civita(int a, int b, int c) {
  if (a == b || b == c || a == c) return 0.0;
  return ((b - a + 3) % 3 == 1) ? 1.0 : -1.0;
}

}  // namespace

std::vector<QuadraticConstraint> scaled_rotation_constraints(int dim, int block, int scale,
                                                             const std::string& tag) {
  std::vector<QuadraticConstraint> out;
  out.reserve(21);
  auto entry = [block](int row, int col) { return block + 3 * col + row; };
  // Columns: (nR)^T (nR) = n^2 I.
  for (int a = 0; a < 3; ++a) {
    for (int b = a; b < 3; ++b) {
      Eigen::MatrixXd q = Eigen::MatrixXd::Zero(dim, dim);
      for (int r = 0; r < 3; ++r) add_sym(q, entry(r, a), entry(r, b), 1.0);
      if (a == b) add_sym(q, scale, scale, -1.0);
      out.push_back({q, 0.0, tag + ":col(" + std::to_string(a) + "," + std::to_string(b) + ")"});
    }
  }
  // Rows: (nR)(nR)^T = n^2 I.
  for (int a = 0; a < 3; ++a) {
    for (int b = a; b < 3; ++b) {
      Eigen::MatrixXd q = Eigen::MatrixXd::Zero(dim, dim);
      for (int c = 0; c < 3; ++c) add_sym(q, entry(a, c), entry(b, c), 1.0);
      if (a == b) add_sym(q, scale, scale, -1.0);
      out.push_back({q, 0.0, tag + ":row(" + std::to_string(a) + "," + std::to_string(b) + ")"});
    }
  }
  // Handedness: (nR)^(i) x (nR)^(j) = n (nR)^(k), componentwise.
  for (const auto& t : kTriples) {
    const int i = t[0], j = t[1], k = t[2];
    for (int m = 0; m < 3; ++m) {
      Eigen::MatrixXd q = Eigen::MatrixXd::Zero(dim, dim);
      for (int p = 0; p < 3; ++p) {
        for (int s = 0; s < 3; ++s) {
          const double eps = levi_civita(m, p, s);
          if (eps != 0.0) add_sym(q, entry(p, i), entry(s, j), eps);
        }
      }
      add_sym(q, scale, entry(m, k), -1.0);
      out.push_back({q, 0.0,
                     tag + ":cross(" + std::to_string(i) + "x" + std::to_string(j) + ")[" +
                         std::to_string(m) + "]"});
    }
  }
  return out;
}

std::vector<QuadraticConstraint> build_constraints(const ConstraintOptions& opts) {
  using namespace lifted;
  std::vector<QuadraticConstraint> out = scaled_rotation_constraints(kDim, kRp, kY, "rot_y");
  if (opts.offset_family) {
    auto fam = scaled_rotation_constraints(kDim, kRs, kDt, "rot_dt");
    out.insert(out.end(), fam.begin(), fam.end());
  }
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(kDim, kDim);
  h(kY, kY) = 1.0;
  out.push_back({h, 1.0, "homogenization"});
  if (opts.linking) {
    for (int m = 0; m < 9; ++m) {
      Eigen::MatrixXd q = Eigen::MatrixXd::Zero(kDim, kDim);
      add_sym(q, kDt, kRp + m, 1.0);
      add_sym(q, kY, kRs + m, -1.0);
      out.push_back({q, 0.0, "link[" + std::to_string(m) + "]"});
    }
  }
  return out;
}

std::vector<QuadraticConstraint> build_baseline_constraints() {
  std::vector<QuadraticConstraint> out = scaled_rotation_constraints(10, 0, 9, "rot_y");
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(10, 10);
  h(9, 9) = 1.0;
  out.push_back({h, 1.0, "homogenization"});
  return out;
}

Eigen::VectorXd lift(const Rotation3& rotation, double offset, double y) {
  using namespace lifted;
  Eigen::VectorXd z(kDim);
  const Vec9 r = vec(rotation.matrix());
  z.segment<9>(kRs) = offset * r;
  z.segment<9>(kRp) = r;
  z(kY) = 1.0;
  z(kDt) = offset;
  return y < 0 ? Eigen::VectorXd(-z) : z;
}

}  // namespace bearsync
