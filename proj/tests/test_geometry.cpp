#include <doctest.h>

#include "bearsync/geometry.hpp"
#include "support.hpp"

using namespace bearsync;
using testing::thrown_kind;

TEST_CASE("kron_row reproduces R x") {
  SUBCASE("identity") {
    const Vec3 x(1, 0, 0);
    CHECK((kron_row(x) * vec(Mat3::Identity()) - x).norm() == 0.0);
  }
  SUBCASE("zero vector gives the zero matrix") { CHECK(kron_row(Vec3::Zero()).isZero(0.0)); }
  SUBCASE("random pairs against the direct product") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
      const Vec3 x = rng.normal3();
      const Mat3 r = testing::random_matrix(rng);
      CHECK((kron_row(x) * vec(r) - r * x).norm() < 1e-12);
    }
  }
}

TEST_CASE("vec stacks columns") {
  Mat3 m;
  m << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const Vec9 v = vec(m);
  CHECK(v(1) == 4);
  CHECK(v(3) == 2);
  CHECK(unvec(v) == m);
}

TEST_CASE("skew is the cross-product matrix") {
  CHECK(skew(Vec3::Zero()).isZero(0.0));
  CHECK(skew(Vec3(1, 0, 0)) * Vec3(0, 1, 0) == Vec3(0, 0, 1));
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Vec3 v = rng.normal3(), w = rng.normal3();
    const Mat3 s = skew(v);
    const Vec3 cross(v.y() * w.z() - v.z() * w.y(), v.z() * w.x() - v.x() * w.z(),
                     v.x() * w.y() - v.y() * w.x());
    CHECK((s * w - cross).norm() < 1e-14);
    CHECK((s + s.transpose()).isZero(0.0));
  }
}

TEST_CASE("Rotation3 validates on construction") {
  Rng rng(5);
  const Mat3 r = testing::qr_rotation(rng).matrix();
  CHECK_NOTHROW(Rotation3{r});
  CHECK(thrown_kind([&] { Rotation3{2.0 * r}; }) == ErrorKind::InvalidRotation);
  Mat3 reflect = r;
  reflect.col(2) *= -1.0;
  CHECK(thrown_kind([&] { Rotation3{reflect}; }) == ErrorKind::InvalidRotation);
  Mat3 nudged = r;
  nudged(0, 0) += 1e-7;
  CHECK(thrown_kind([&] { Rotation3{nudged}; }) == ErrorKind::InvalidRotation);
  CHECK(Rotation3::is_valid(r));
}

TEST_CASE("Rotation3 conversions round-trip") {
  Rng rng(17);
  for (int i = 0; i < 100; ++i) {
    const Rotation3 r = rng.rotation();
    CHECK(geodesic_deg(Rotation3::exp(r.log()), r) < 1e-9);
    CHECK(geodesic_deg(Rotation3::from_quaternion(r.quaternion()), r) < 1e-9);
    CHECK(r.quaternion().w() >= 0.0);
    CHECK(((r * r.inverse()).matrix() - Mat3::Identity()).norm() < 1e-14);
  }
  const Rotation3 z90 = Rotation3::about_axis(Vec3::UnitZ(), M_PI / 2);
  CHECK((z90 * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-15);
}

TEST_CASE("project_to_rotation") {
  Rng rng(23);
  SUBCASE("fixed point") {
    for (int i = 0; i < 50; ++i) {
      const Rotation3 r = rng.rotation();
      CHECK((project_to_rotation(r.matrix()).matrix() - r.matrix()).norm() < 1e-12);
    }
  }
  SUBCASE("scale invariance") {
    const Rotation3 r = rng.rotation();
    CHECK((project_to_rotation(2.0 * r.matrix()).matrix() - r.matrix()).norm() < 1e-12);
  }
  SUBCASE("perturbation against a brute-force Frobenius search") {
    for (int trial = 0; trial < 10; ++trial) {
      const Rotation3 r = rng.rotation();
      Mat3 p = testing::random_matrix(rng);
      p *= 1e-3 / p.norm();
      const Mat3 m = r.matrix() + p;
      const Rotation3 x = project_to_rotation(m);
      CHECK(geodesic_deg(x, r) * M_PI / 180.0 < 2e-3);
      const double best = (x.matrix() - m).norm();
      // No sampled rotation in a neighborhood of the answer does better.
      for (int s = 0; s < 2000; ++s) {
        const Rotation3 cand = x * Rotation3::exp(rng.normal3() * 1e-3);
        CHECK((cand.matrix() - m).norm() >= best - 1e-15);
      }
    }
  }
  SUBCASE("output is always a valid rotation") {
    for (int i = 0; i < 500; ++i) {
      const Mat3 m = testing::random_matrix(rng);
      CHECK(Rotation3::is_valid(project_to_rotation(m).matrix()));
    }
  }
  SUBCASE("rank deficient input is rejected") {
    Mat3 m = testing::random_matrix(rng);
    m.col(2) = m.col(0) + m.col(1);
    CHECK(thrown_kind([&] { project_to_rotation(m); }) == ErrorKind::DegenerateMatrix);
    CHECK(thrown_kind([&] { project_to_rotation(Mat3::Zero()); }) == ErrorKind::DegenerateMatrix);
  }
}

TEST_CASE("geodesic_deg") {
  CHECK(geodesic_deg(Rotation3::identity(), Rotation3::identity()) == 0.0);
  CHECK(geodesic_deg(Rotation3::identity(), Rotation3::about_axis(Vec3::UnitZ(), M_PI / 2)) ==
        doctest::Approx(90.0).epsilon(1e-12));
  CHECK(geodesic_deg(Rotation3::identity(), Rotation3::about_axis(Vec3::UnitX(), M_PI)) ==
        doctest::Approx(180.0).epsilon(1e-12));
  Rng rng(29);
  for (int i = 0; i < 100; ++i) {
    const Rotation3 a = rng.rotation(), b = rng.rotation();
    const double d = geodesic_deg(a, b);
    CHECK(std::abs(d - geodesic_deg(b, a)) < 1e-10);
    CHECK(d >= 0.0);
    CHECK(d <= 180.0);
    CHECK(d > 0.0);
    CHECK(geodesic_deg(a, a) < 1e-6);
  }
}

TEST_CASE("slerp endpoints and midpoint") {
  const Rotation3 a = Rotation3::identity();
  const Rotation3 b = Rotation3::about_axis(Vec3::UnitY(), 1.0);
  CHECK(geodesic_deg(slerp(a, b, 0.0), a) < 1e-9);
  CHECK(geodesic_deg(slerp(a, b, 1.0), b) < 1e-9);
  CHECK(geodesic_deg(slerp(a, b, 0.5), Rotation3::about_axis(Vec3::UnitY(), 0.5)) < 1e-9);
}

TEST_CASE("constant tables are exact 0/1 arrays") {
  CHECK(tables::J3() == Mat3::Ones());
  CHECK(tables::j3() == Vec3::Ones());
  for (int i = 0; i < 3; ++i) {
    CHECK(tables::e(i).sum() == 1.0);
    CHECK(tables::e(i)(i) == 1.0);
    for (int j = 0; j < 3; ++j) {
      CHECK(tables::E(i, j).sum() == 1.0);
      CHECK(tables::E(i, j)(i, j) == 1.0);
    }
  }
}
