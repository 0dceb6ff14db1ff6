#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace bearsync {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat39 = Eigen::Matrix<double, 3, 9>;

inline constexpr double kRotationTolerance = 1e-9;

// A validated element of SO(3). Construction rejects matrices whose columns
// are not orthonormal or whose determinant is not +1 (both within 1e-9).
class Rotation3 {
 public:
  Rotation3() : m_(Mat3::Identity()) {}
  explicit Rotation3(const Mat3& m);

  static Rotation3 identity() { return Rotation3(); }
  static Rotation3 from_quaternion(const Eigen::Quaterniond& q);
  // Rotation vector (axis * angle, radians).
  static Rotation3 exp(const Vec3& omega);
  static Rotation3 about_axis(const Vec3& axis, double angle_rad);

  const Mat3& matrix() const { return m_; }
  Vec3 log() const;
  Eigen::Quaterniond quaternion() const;
  Rotation3 inverse() const { return Rotation3(m_.transpose(), Unchecked{}); }

  Rotation3 operator*(const Rotation3& o) const { return Rotation3(m_ * o.m_, Unchecked{}); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  bool operator==(const Rotation3& o) const { return m_ == o.m_; }

  static bool is_valid(const Mat3& m, double tol = kRotationTolerance);

 private:
  struct Unchecked {};
  Rotation3(const Mat3& m, Unchecked) : m_(m) {}
  Mat3 m_;
};

// Column-major vectorization: vec(M) stacks the columns of M.
Vec9 vec(const Mat3& m);
Mat3 unvec(const Vec9& v);

// Returns K with K * vec(R) == R * x for every 3x3 R, i.e. K = x^T (x) I3.
Mat39 kron_row(const Vec3& x);

Mat3 skew(const Vec3& v);

// Nearest rotation in Frobenius norm (SVD with determinant correction).
// Throws DegenerateMatrix when the smallest singular value is below 1e-12.
Rotation3 project_to_rotation(const Mat3& m);

// Geodesic distance in degrees, in [0, 180].
double geodesic_deg(const Rotation3& a, const Rotation3& b);

Rotation3 slerp(const Rotation3& a, const Rotation3& b, double s);

// Integer-valued constant tables used by the constraint builder.
namespace tables {
inline Mat3 J3() { return Mat3::Ones(); }
inline Vec3 j3() { return Vec3::Ones(); }
// (i, j) coordinate matrix, 0-based.
Mat3 E(int i, int j);
// i-th coordinate vector, 0-based.
Vec3 e(int i);
}  // namespace tables

}  // namespace bearsync
