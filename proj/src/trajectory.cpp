#include "bearsync/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bearsync/errors.hpp"
#include "bearsync/rng.hpp"

namespace bearsync {

namespace {

// Cumulative cubic B-spline basis and its derivative with respect to u.
struct CumulativeBasis {
  double b[3];
  double db[3];
};

CumulativeBasis cumulative_basis(double u) {
  const double u2 = u * u;
  const double u3 = u2 * u;
  CumulativeBasis c{};
  c.b[0] = (5.0 + 3.0 * u - 3.0 * u2 + u3) / 6.0;
  c.b[1] = (1.0 + 3.0 * u + 3.0 * u2 - 2.0 * u3) / 6.0;
  c.b[2] = u3 / 6.0;
  c.db[0] = (3.0 - 6.0 * u + 3.0 * u2) / 6.0;
  c.db[1] = (3.0 + 6.0 * u - 6.0 * u2) / 6.0;
  c.db[2] = 3.0 * u2 / 6.0;
  return c;
}

}  // namespace

Trajectory::Trajectory(std::vector<TimedPose> poses) : poses_(std::move(poses)) {
  if (poses_.size() < 2) throw Error(ErrorKind::TooShort, "trajectory needs at least 2 samples");
  for (std::size_t i = 0; i < poses_.size(); ++i) {
    const auto& p = poses_[i];
    if (!std::isfinite(p.t) || !p.translation.allFinite() || !p.velocity.allFinite()) {
      throw Error(ErrorKind::InvalidConfig, "non-finite sample at index " + std::to_string(i));
    }
    if (i > 0 && !(p.t > poses_[i - 1].t)) {
      throw Error(ErrorKind::InvalidConfig,
                  "timestamps not strictly increasing at index " + std::to_string(i));
    }
  }
}

ControlSpline::ControlSpline(std::vector<ControlPose> control, double knot, double t0)
    : control_(std::move(control)), knot_(knot), t0_(t0) {
  if (control_.size() < 4) throw Error(ErrorKind::InvalidConfig, "spline needs >= 4 control poses");
  if (!(knot_ > 0.0)) throw Error(ErrorKind::InvalidConfig, "knot interval must be positive");
  rot_increments_.resize(control_.size(), Vec3::Zero());
  for (std::size_t i = 1; i < control_.size(); ++i) {
    rot_increments_[i] = (control_[i - 1].rotation.inverse() * control_[i].rotation).log();
  }
}

TimedPose ControlSpline::sample(double t) const {
  if (!covers(t)) {
    std::ostringstream os;
    os << "t=" << t << " outside spline support [" << support_begin() << ", " << support_end()
       << "]";
    throw Error(ErrorKind::OutOfSupport, os.str());
  }
  const auto segments = static_cast<long>(control_.size()) - 3;
  const double s = (t - t0_) / knot_;
  const long i = std::clamp(static_cast<long>(std::floor(s)), 0L, segments - 1);
  const double u = s - static_cast<double>(i);
  const CumulativeBasis basis = cumulative_basis(u);

  Vec3 p = control_[i].translation;
  Vec3 v = Vec3::Zero();
  Rotation3 r = control_[i].rotation;
  for (int j = 1; j <= 3; ++j) {
    const Vec3 dp = control_[i + j].translation - control_[i + j - 1].translation;
    p += basis.b[j - 1] * dp;
    v += basis.db[j - 1] * dp;
    r = r * Rotation3::exp(basis.b[j - 1] * rot_increments_[i + j]);
  }
  TimedPose pose;
  pose.t = t;
  pose.rotation = r;
  pose.translation = p;
  pose.velocity = v / knot_;
  return pose;
}

Vec3 ControlSpline::position(double t) const { return sample(t).translation; }

ControlSpline generate_spline(const SplineParams& params, std::uint64_t seed) {
  if (params.num_control < 4) throw Error(ErrorKind::InvalidConfig, "num_control must be >= 4");
  if (!(params.max_step > 0.0)) throw Error(ErrorKind::InvalidConfig, "max_step must be > 0");
  if (!(params.knot > 0.0)) throw Error(ErrorKind::InvalidConfig, "knot must be > 0");
  if (params.max_rot_step < 0.0) throw Error(ErrorKind::InvalidConfig, "max_rot_step must be >= 0");
  if (params.min_step_fraction < 0.0 || params.min_step_fraction > 1.0) {
    throw Error(ErrorKind::InvalidConfig, "min_step_fraction must be in [0, 1]");
  }
  if (params.heading_persistence < 0.0) {
    throw Error(ErrorKind::InvalidConfig, "heading_persistence must be >= 0");
  }

  Rng rng(seed);
  std::vector<ControlPose> control;
  control.reserve(static_cast<std::size_t>(params.num_control));
  ControlPose current{rng.rotation(), params.origin};
  control.push_back(current);
  Vec3 heading = rng.unit_vector();
  for (int i = 1; i < params.num_control; ++i) {
    Vec3 dir = params.heading_persistence * heading + rng.unit_vector();
    if (params.home_radius > 0.0) dir += (params.origin - current.translation) / params.home_radius;
    dir = dir.norm() > 1e-9 ? dir.normalized() : rng.unit_vector();
    heading = dir;
    const double len = params.max_step * rng.uniform(params.min_step_fraction, 1.0);
    const Vec3 axis = rng.unit_vector();
    const double angle = rng.uniform(0.0, params.max_rot_step);
    current.translation = current.translation + len * dir;
    current.rotation = current.rotation * Rotation3::about_axis(axis, angle);
    control.push_back(current);
  }
  return ControlSpline(std::move(control), params.knot);
}

TimedPose sample_pose(const ControlSpline& spline, double t) { return spline.sample(t); }

Trajectory sample_trajectory(const ControlSpline& spline, double t0, double dt, std::size_t n) {
  if (n < 2) throw Error(ErrorKind::InvalidConfig, "need at least 2 samples");
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidConfig, "dt must be > 0");
  const double t_last = t0 + static_cast<double>(n - 1) * dt;
  if (!spline.covers(t0) || !spline.covers(t_last)) {
    std::ostringstream os;
    os << "sampling window [" << t0 << ", " << t_last << "] outside spline support ["
       << spline.support_begin() << ", " << spline.support_end() << "]";
    throw Error(ErrorKind::OutOfSupport, os.str());
  }
  std::vector<TimedPose> poses;
  poses.reserve(n);
  for (std::size_t i = 0; i < n; ++i) poses.push_back(spline.sample(t0 + static_cast<double>(i) * dt));
  return Trajectory(std::move(poses));
}

std::vector<BearingObservation> synthesize_bearings(const ControlSpline& observer,
                                                    const ControlSpline& observed,
                                                    const BearingSynthesis& cfg) {
  if (cfg.count < 2) throw Error(ErrorKind::InvalidConfig, "bearing count must be >= 2");
  if (cfg.sigma < 0.0) throw Error(ErrorKind::InvalidConfig, "sigma must be >= 0");
  if (!(cfg.t_end > cfg.t_begin)) {
    throw Error(ErrorKind::OutOfSupport, "empty bearing window (offset exceeds trajectory margin)");
  }
  Rng rng(cfg.seed);
  std::vector<BearingObservation> out;
  out.reserve(cfg.count);
  const double step = (cfg.t_end - cfg.t_begin) / static_cast<double>(cfg.count - 1);
  for (std::size_t k = 0; k < cfg.count; ++k) {
    const double tau = cfg.t_begin + static_cast<double>(k) * step;
    const TimedPose a = observer.sample(tau);
    const Vec3 pb = observed.position(tau + cfg.true_offset);
    const Vec3 rel = pb - a.translation;
    if (rel.norm() < 1e-6) {
      throw Error(ErrorKind::CoincidentRobots, "robots coincide at t=" + std::to_string(tau));
    }
    Vec3 b = a.rotation.matrix().transpose() * rel.normalized();
    if (cfg.sigma > 0.0) b = (b + cfg.sigma * rng.normal3()).normalized();
    out.push_back({tau, b});
  }
  return out;
}

Trajectory shift_trajectory(const Trajectory& traj, double delta) {
  std::vector<TimedPose> poses = traj.poses();
  for (auto& p : poses) p.t -= delta;
  return Trajectory(std::move(poses));
}

TimedPose interpolate(const Trajectory& traj, double t) {
  if (!(t >= traj.start_time() && t <= traj.end_time())) {
    std::ostringstream os;
    os << "t=" << t << " outside trajectory range [" << traj.start_time() << ", "
       << traj.end_time() << "]";
    throw Error(ErrorKind::OutOfRange, os.str());
  }
  const auto& poses = traj.poses();
  auto it = std::upper_bound(poses.begin(), poses.end(), t,
                             [](double value, const TimedPose& p) { return value < p.t; });
  if (it == poses.begin()) return poses.front();
  const TimedPose& lo = *(it - 1);
  if (lo.t == t || it == poses.end()) return lo;
  const TimedPose& hi = *it;
  const double s = (t - lo.t) / (hi.t - lo.t);
  TimedPose out;
  out.t = t;
  out.translation = (1.0 - s) * lo.translation + s * hi.translation;
  out.velocity = (1.0 - s) * lo.velocity + s * hi.velocity;
  out.rotation = slerp(lo.rotation, hi.rotation, s);
  return out;
}

Trajectory finite_difference_velocities(const Trajectory& traj) {
  if (traj.size() < 3) throw Error(ErrorKind::TooShort, "finite differences need >= 3 samples");
  std::vector<TimedPose> poses = traj.poses();
  const std::size_t n = poses.size();
  const auto& src = traj.poses();
  // Derivative of the quadratic through three samples, evaluated at `at`.
  // Centered inside (the usual central difference on uniform spacing) and
  // one-sided second order at the two ends.
  auto three_point = [&](std::size_t a, double at) {
    const double t0 = src[a].t, t1 = src[a + 1].t, t2 = src[a + 2].t;
    return src[a].translation * ((2 * at - t1 - t2) / ((t0 - t1) * (t0 - t2))) +
           src[a + 1].translation * ((2 * at - t0 - t2) / ((t1 - t0) * (t1 - t2))) +
           src[a + 2].translation * ((2 * at - t0 - t1) / ((t2 - t0) * (t2 - t1)));
  };
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = i == 0 ? 0 : (i + 1 == n ? n - 3 : i - 1);
    poses[i].velocity = three_point(a, src[i].t);
  }
  return Trajectory(std::move(poses));
}

Trajectory express_in_frame(const Trajectory& traj, const Rotation3& rotation,
                            const Vec3& translation) {
  const Rotation3 inv = rotation.inverse();
  std::vector<TimedPose> poses = traj.poses();
  for (auto& p : poses) {
    p.translation = inv * (p.translation - translation);
    p.velocity = inv * p.velocity;
    p.rotation = inv * p.rotation;
  }
  return Trajectory(std::move(poses));
}

}  // namespace bearsync
