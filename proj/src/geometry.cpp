#include "bearsync/geometry.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "bearsync/errors.hpp"

namespace bearsync {

Rotation3::Rotation3(const Mat3& m) : m_(m) {
  if (!is_valid(m)) {
    std::ostringstream os;
    os << "matrix is not a rotation (det=" << m.determinant()
       << ", orthogonality error=" << (m.transpose() * m - Mat3::Identity()).norm() << ")";
    throw Error(ErrorKind::InvalidRotation, os.str());
  }
}

bool Rotation3::is_valid(const Mat3& m, double tol) {
  if (!m.allFinite()) return false;
  const Mat3 gram = m.transpose() * m - Mat3::Identity();
  if (gram.cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(m.determinant() - 1.0) <= tol;
}

Rotation3 Rotation3::from_quaternion(const Eigen::Quaterniond& q) {
  const double n = q.norm();
  if (!(n > 1e-12) || !std::isfinite(n)) {
    throw Error(ErrorKind::InvalidRotation, "zero or non-finite quaternion");
  }
  Mat3 m = q.normalized().toRotationMatrix();
  return Rotation3(m, Unchecked{});
}

Rotation3 Rotation3::exp(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 k = skew(omega);
  Mat3 m;
  if (theta < 1e-8) {
    m = Mat3::Identity() + k + 0.5 * k * k;
  } else {
    m = Mat3::Identity() + (std::sin(theta) / theta) * k +
        ((1.0 - std::cos(theta)) / (theta * theta)) * k * k;
  }
  return Rotation3(m, Unchecked{});
}

Rotation3 Rotation3::about_axis(const Vec3& axis, double angle_rad) {
  return exp(axis.normalized() * angle_rad);
}

Vec3 Rotation3::log() const {
  Eigen::AngleAxisd aa(m_);
  return aa.axis() * aa.angle();
}

Eigen::Quaterniond Rotation3::quaternion() const {
  Eigen::Quaterniond q(m_);
  q.normalize();
  if (q.w() < 0) q.coeffs() *= -1.0;
  return q;
}

Vec9 vec(const Mat3& m) { return Eigen::Map<const Vec9>(m.data()); }

Mat3 unvec(const Vec9& v) { return Eigen::Map<const Mat3>(v.data()); }

Mat39 kron_row(const Vec3& x) {
  Mat39 k = Mat39::Zero();
  for (int c = 0; c < 3; ++c) k.block<3, 3>(0, 3 * c) = x[c] * Mat3::Identity();
  return k;
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

Rotation3 project_to_rotation(const Mat3& m) {
  if (!m.allFinite()) throw Error(ErrorKind::DegenerateMatrix, "non-finite matrix");
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()[2] < 1e-12) {
    throw Error(ErrorKind::DegenerateMatrix, "smallest singular value below 1e-12");
  }
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();
  return Rotation3(r);
}

double geodesic_deg(const Rotation3& a, const Rotation3& b) {
  const Mat3 rel = a.matrix().transpose() * b.matrix();
  // atan2 form stays accurate near 0 and 180 degrees where acos loses digits.
  const Vec3 axis_sin(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  const double s = 0.5 * axis_sin.norm();
  const double c = 0.5 * (rel.trace() - 1.0);
  return std::atan2(s, c) * 180.0 / M_PI;
}

Rotation3 slerp(const Rotation3& a, const Rotation3& b, double s) {
  if (s == 0.0) return a;
  if (s == 1.0) return b;
  const Vec3 delta = (a.inverse() * b).log();
  return a * Rotation3::exp(s * delta);
}

namespace tables {
Mat3 E(int i, int j) {
  Mat3 m = Mat3::Zero();
  m(i, j) = 1.0;
  return m;
}
Vec3 e(int i) { return Vec3::Unit(i); }
}  // namespace tables

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::InvalidRotation: return "InvalidRotation";
    case ErrorKind::DegenerateMatrix: return "DegenerateMatrix";
    case ErrorKind::OutOfSupport: return "OutOfSupport";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::CoincidentRobots: return "CoincidentRobots";
    case ErrorKind::TooFewMeasurements: return "TooFewMeasurements";
    case ErrorKind::SingularMarginalization: return "SingularMarginalization";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::ZeroSolution: return "ZeroSolution";
    case ErrorKind::InconsistentLift: return "InconsistentLift";
    case ErrorKind::DegenerateSolution: return "DegenerateSolution";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace bearsync
