#include <doctest.h>

#include <Eigen/QR>
#include <set>

#include "bearsync/problem.hpp"
#include "support.hpp"

using namespace bearsync;
using testing::thrown_kind;

namespace {

// Direct evaluation of the per-bearing residual for x = [r_s; r_p; y; t; D].
Vec3 direct_residual(const Measurement& m, const Eigen::VectorXd& x, std::size_t k) {
  const Mat3 rs = unvec(x.segment<9>(0));
  const Mat3 rp = unvec(x.segment<9>(9));
  const double y = x(18);
  const Vec3 t = x.segment<3>(19);
  const double d = x(22 + static_cast<Eigen::Index>(k));
  return m.g * d + y * m.t1 - t - rp * m.t2 - rs * m.v2;
}

Eigen::MatrixXd stacked_rows(const MeasurementBundle& b, Formulation f) {
  const std::size_t n = b.size();
  const Eigen::Index dim = residual_matrix(b.measurements[0], 0, n, f).cols();
  Eigen::MatrixXd m(3 * static_cast<Eigen::Index>(n), dim);
  for (std::size_t k = 0; k < n; ++k) {
    m.middleRows(3 * static_cast<Eigen::Index>(k), 3) = residual_matrix(b.measurements[k], k, n, f);
  }
  return m;
}

MeasurementBundle scenario_bundle(double offset, double sigma, std::uint64_t seed) {
  const Scenario sc = testing::scenario(offset, sigma, seed);
  return bundle(sc.bearings, sc.observer, sc.observed);
}

// Random point satisfying every lifted constraint.
Eigen::VectorXd random_feasible(Rng& rng) {
  const Rotation3 r = testing::qr_rotation(rng);
  const double dt = rng.uniform(-2.0, 2.0);
  const double y = rng.uniform() < 0.5 ? -1.0 : 1.0;
  return lift(r, dt, y);
}

double max_abs_residual(const std::vector<QuadraticConstraint>& cs, const Eigen::VectorXd& z) {
  double worst = 0.0;
  for (const auto& c : cs) worst = std::max(worst, std::abs(c.residual(z)));
  return worst;
}

}  // namespace

TEST_CASE("bundle") {
  SUBCASE("identity observer rotation leaves bearings unchanged") {
    std::vector<TimedPose> a(40), b(40);
    for (int i = 0; i < 40; ++i) {
      a[i].t = b[i].t = 0.1 * i;
      a[i].translation = Vec3(0.1 * i, 0, 0);
      b[i].translation = Vec3(0, 1, 0.05 * i);
    }
    Rng rng(1);
    std::vector<BearingObservation> z;
    for (int i = 0; i < 12; ++i) z.push_back({a[2 * i + 1].t, rng.unit_vector()});
    const MeasurementBundle mb = bundle(z, Trajectory(a), Trajectory(b));
    REQUIRE(mb.size() == 12);
    for (std::size_t k = 0; k < 12; ++k) {
      CHECK((mb.measurements[k].g - z[k].direction).norm() < 1e-15);
      CHECK(mb.measurements[k].weight == Mat3::Identity());
    }
    z.pop_back();
    CHECK(thrown_kind([&] { bundle(z, Trajectory(a), Trajectory(b)); }) ==
          ErrorKind::TooFewMeasurements);
    z.push_back({100.0, Vec3::UnitX()});
    CHECK(thrown_kind([&] { bundle(z, Trajectory(a), Trajectory(b)); }) == ErrorKind::OutOfRange);
  }
  SUBCASE("weights must be symmetric") {
    const Scenario sc = testing::scenario(0.0, 0.0, 3);
    std::vector<Mat3> w(sc.bearings.size(), Mat3::Identity());
    w[4](0, 1) = 0.5;
    CHECK(thrown_kind([&] {
            bundle(sc.bearings, sc.observer, sc.observed, std::span<const Mat3>(w));
          }) == ErrorKind::InvalidConfig);
  }
  SUBCASE("zero-noise residual at ground truth") {
    const Scenario sc = testing::scenario(0.0, 0.0, 4);
    const MeasurementBundle mb = bundle(sc.bearings, sc.observer, sc.observed);
    const std::size_t n = mb.size();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(22 + static_cast<Eigen::Index>(n));
    x.segment<9>(9) = vec(sc.truth.rotation.matrix());
    x(18) = 1.0;
    x.segment<3>(19) = sc.truth.translation;
    for (std::size_t k = 0; k < n; ++k) {
      const Vec3 pa = sc.observer_spline.position(sc.bearings[k].t);
      const Vec3 pb = sc.observed_spline.position(sc.bearings[k].t);
      x(22 + static_cast<Eigen::Index>(k)) = (pb - pa).norm();
    }
    for (std::size_t k = 0; k < n; ++k) {
      CHECK((residual_matrix(mb.measurements[k], k, n) * x).norm() < 1e-10);
    }
  }
}

TEST_CASE("assemble") {
  const MeasurementBundle mb = scenario_bundle(0.3, 0.02, 5);
  const std::size_t n = mb.size();
  const StackedProblem p = assemble(mb);

  SUBCASE("residual matrices reproduce the direct residual") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd x(22 + static_cast<Eigen::Index>(n));
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
      x(18) = 1.0;
      for (std::size_t k = 0; k < n; ++k) {
        const Vec3 e = residual_matrix(mb.measurements[k], k, n) * x;
        CHECK((e - direct_residual(mb.measurements[k], x, k)).norm() < 1e-12);
      }
    }
  }
  SUBCASE("Q is the weighted sum of A_k^T A_k, symmetric PSD") {
    const Eigen::MatrixXd m = stacked_rows(mb, Formulation::WithOffset);
    const Eigen::MatrixXd q = m.transpose() * m;
    CHECK((p.Q - q).norm() < 1e-9 * q.norm());
    CHECK((p.Q - p.Q.transpose()).norm() == 0.0);
    CHECK(testing::min_eigenvalue(p.Q) > -1e-9 * p.Q.trace());
    CHECK(p.A.rows() == 19);
    CHECK(p.B.cols() == static_cast<Eigen::Index>(3 + n));
    CHECK(p.C.rows() == static_cast<Eigen::Index>(3 + n));
  }
  SUBCASE("non-identity weights") {
    Rng rng(9);
    std::vector<Mat3> w;
    for (std::size_t k = 0; k < n; ++k) {
      const Mat3 l = testing::random_matrix(rng);
      w.push_back(l * l.transpose() + Mat3::Identity());
    }
    const Scenario sc = testing::scenario(0.3, 0.02, 5);
    const StackedProblem pw =
        assemble(bundle(sc.bearings, sc.observer, sc.observed, std::span<const Mat3>(w)));
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(pw.Q.rows(), pw.Q.cols());
    for (std::size_t k = 0; k < n; ++k) {
      const Eigen::MatrixXd a = residual_matrix(mb.measurements[k], k, n);
      q += a.transpose() * w[k] * a;
    }
    CHECK((pw.Q - q).norm() < 1e-9 * q.norm());
  }
  SUBCASE("Qbar equals the minimum over the marginalized block (least-squares oracle)") {
    const Eigen::MatrixXd m = stacked_rows(mb, Formulation::WithOffset);
    const Eigen::MatrixXd mx = m.leftCols(19);
    const Eigen::MatrixXd mw = m.rightCols(m.cols() - 19);
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(mw);
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd xr(19);
      for (int i = 0; i < 19; ++i) xr(i) = rng.normal();
      const Eigen::VectorXd rhs = -mx * xr;
      const Eigen::VectorXd w = qr.solve(rhs);
      const double full = (mx * xr + mw * w).squaredNorm();
      const double reduced = xr.dot(p.Qbar * xr);
      CHECK(std::abs(full - reduced) <= 1e-8 * std::max(1.0, std::abs(full)));
      const Marginalized back = recover_marginalized(p, xr);
      CHECK((back.translation - w.head<3>()).norm() < 1e-6 * (1.0 + w.norm()));
      CHECK((back.distances - w.tail(static_cast<Eigen::Index>(n))).norm() < 1e-6 * (1.0 + w.norm()));
    }
  }
  SUBCASE("lifted cost pads Qbar") {
    CHECK(p.Q0.rows() == 20);
    CHECK(p.Q0.topLeftCorner(19, 19) == p.Qbar);
    CHECK(p.Q0.row(19).isZero(0.0));
    CHECK(p.Q0.col(19).isZero(0.0));
    CHECK((p.Qbar - p.Qbar.transpose()).norm() == 0.0);
    const StackedProblem b = assemble(mb, Formulation::NoOffset);
    CHECK(b.Q0.rows() == 10);
  }
}

TEST_CASE("recover_marginalized at the zero-noise ground truth") {
  const Scenario sc = testing::scenario(0.0, 0.0, 21);
  const StackedProblem p = assemble(bundle(sc.bearings, sc.observer, sc.observed));
  Eigen::VectorXd xr = Eigen::VectorXd::Zero(19);
  xr.segment<9>(9) = vec(sc.truth.rotation.matrix());
  xr(18) = 1.0;
  const Marginalized w = recover_marginalized(p, xr);
  CHECK((w.translation - sc.truth.translation).norm() < 1e-6);
  for (std::size_t k = 0; k < sc.bearings.size(); ++k) {
    const double truth = (sc.observed_spline.position(sc.bearings[k].t) -
                          sc.observer_spline.position(sc.bearings[k].t)).norm();
    CHECK(std::abs(w.distances(static_cast<Eigen::Index>(k)) - truth) < 1e-6);
  }
}

TEST_CASE("marginalize with a zero coupling block recovers zero") {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(19 + 3 + 12, 19 + 3 + 12);
  q.topLeftCorner(19, 19) = Eigen::MatrixXd::Identity(19, 19);
  q.bottomRightCorner(15, 15) = 2.0 * Eigen::MatrixXd::Identity(15, 15);
  const StackedProblem p = marginalize(q, 19, Formulation::WithOffset, 12);
  Rng rng(2);
  Eigen::VectorXd xr(19);
  for (int i = 0; i < 19; ++i) xr(i) = rng.normal();
  const Marginalized w = recover_marginalized(p, xr);
  CHECK(w.translation.isZero(0.0));
  CHECK(w.distances.isZero(0.0));
}

TEST_CASE("degenerate geometry is rejected") {
  // Both robots parked: every bearing is the same direction.
  std::vector<TimedPose> a(50), b(50);
  for (int i = 0; i < 50; ++i) {
    a[i].t = b[i].t = 0.1 * i;
    b[i].translation = Vec3(2, 0, 0);
  }
  std::vector<BearingObservation> z;
  for (int i = 0; i < 20; ++i) z.push_back({0.2 * i + 0.05, Vec3::UnitX()});
  const MeasurementBundle mb = bundle(z, Trajectory(a), Trajectory(b));
  CHECK(thrown_kind([&] { assemble(mb); }) == ErrorKind::SingularMarginalization);
  CHECK(thrown_kind([&] { assemble(mb, Formulation::NoOffset); }) ==
        ErrorKind::SingularMarginalization);
}

TEST_CASE("constraint set") {
  const auto cs = build_constraints();
  REQUIRE(cs.size() == 52);
  std::set<std::string> labels;
  int nonzero_rhs = 0;
  for (const auto& c : cs) {
    labels.insert(c.label);
    CHECK(c.Q.rows() == 20);
    CHECK(c.Q == c.Q.transpose());
    if (c.g != 0.0) {
      ++nonzero_rhs;
      CHECK(c.g == 1.0);
    }
  }
  CHECK(labels.size() == 52);
  CHECK(nonzero_rhs == 1);
  CHECK(build_baseline_constraints().size() == 22);
  ConstraintOptions ablated;
  ablated.offset_family = false;
  CHECK(build_constraints(ablated).size() == 31);
  ablated.linking = false;
  CHECK(build_constraints(ablated).size() == 22);

  SUBCASE("canonical feasible point") {
    CHECK(max_abs_residual(cs, lift(Rotation3::identity(), 0.0, 1.0)) < 1e-14);
  }
  SUBCASE("random feasible points") {
    Rng rng(31);
    for (int i = 0; i < 1000; ++i) CHECK(max_abs_residual(cs, random_feasible(rng)) < 1e-10);
  }
  SUBCASE("random perturbed points are detected") {
    Rng rng(32);
    for (int i = 0; i < 1000; ++i) {
      Eigen::VectorXd z = random_feasible(rng);
      Eigen::VectorXd d(20);
      for (int j = 0; j < 20; ++j) d(j) = rng.normal();
      z += 0.01 * d.normalized();
      CHECK(max_abs_residual(cs, z) > 1e-4);
    }
  }
  SUBCASE("specific violations") {
    Eigen::VectorXd z = lift(Rotation3::identity(), 0.0, 1.0);
    z.segment<9>(9) = vec(Eigen::Vector3d(1, 1, 2).asDiagonal().toDenseMatrix());
    CHECK(max_abs_residual(cs, z) > 0.5);

    Rng rng(33);
    const Rotation3 r = rng.rotation();
    Eigen::VectorXd reflect = lift(r, 0.4, 1.0);
    Mat3 m = r.matrix();
    m.col(2) *= -1.0;  // orthogonal, determinant -1
    reflect.segment<9>(9) = vec(m);
    reflect.segment<9>(0) = 0.4 * vec(m);
    CHECK(max_abs_residual(cs, reflect) > 0.5);

    Eigen::VectorXd unlinked = lift(r, 0.4, 1.0);
    unlinked.segment<9>(0) = 0.2 * vec(r.matrix());
    CHECK(max_abs_residual(cs, unlinked) > 1e-2);

    Eigen::VectorXd bad_y = lift(r, 0.4, 1.0);
    bad_y(18) = 0.9;
    CHECK(max_abs_residual(cs, bad_y) > 0.1);
  }
}
