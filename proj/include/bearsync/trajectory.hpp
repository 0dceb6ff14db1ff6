#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bearsync/geometry.hpp"

namespace bearsync {

struct TimedPose {
  double t = 0.0;        // s
  Rotation3 rotation;
  Vec3 translation = Vec3::Zero();  // m
  Vec3 velocity = Vec3::Zero();     // m/s, expressed in the odometry frame
};

// Odometry of one robot in its own local frame. Timestamps strictly increase
// and there are at least two samples.
class Trajectory {
 public:
  explicit Trajectory(std::vector<TimedPose> poses);

  const std::vector<TimedPose>& poses() const { return poses_; }
  std::size_t size() const { return poses_.size(); }
  const TimedPose& operator[](std::size_t i) const { return poses_[i]; }
  double start_time() const { return poses_.front().t; }
  double end_time() const { return poses_.back().t; }

 private:
  std::vector<TimedPose> poses_;
};

struct BearingObservation {
  double t = 0.0;  // observer clock, s
  Vec3 direction = Vec3::UnitX();  // unit vector in the observer body frame
};

struct ControlPose {
  Rotation3 rotation;
  Vec3 translation = Vec3::Zero();
};

struct SplineParams {
  int num_control = 40;
  double max_step = 0.5;      // m between consecutive control translations
  double knot = 1.0;          // s
  double max_rot_step = 0.5;  // rad between consecutive control orientations
  double min_step_fraction = 1.0;  // step lengths are uniform in [fraction, 1] * max_step
  double heading_persistence = 0.5;  // weight of the previous heading in the next one
  double home_radius = 1.5;  // > 0 pulls the walk back toward origin on this length scale (m)
  Vec3 origin = Vec3::Zero();
};

// Uniform cumulative cubic B-spline on SE(3). Segment i covers
// [t0 + i*knot, t0 + (i+1)*knot) and uses control poses i..i+3, so the valid
// support is [t0, t0 + (n-3)*knot].
class ControlSpline {
 public:
  ControlSpline(std::vector<ControlPose> control, double knot, double t0 = 0.0);

  const std::vector<ControlPose>& control() const { return control_; }
  double knot() const { return knot_; }
  double support_begin() const { return t0_; }
  double support_end() const { return t0_ + knot_ * static_cast<double>(control_.size() - 3); }
  bool covers(double t) const { return t >= support_begin() && t <= support_end(); }

  // Pose, translation and analytic velocity at t. Throws OutOfSupport.
  TimedPose sample(double t) const;
  Vec3 position(double t) const;

 private:
  std::vector<ControlPose> control_;
  std::vector<Vec3> rot_increments_;  // log(R_{i-1}^T R_i), index i >= 1
  double knot_;
  double t0_;
};

ControlSpline generate_spline(const SplineParams& params, std::uint64_t seed);

TimedPose sample_pose(const ControlSpline& spline, double t);
Trajectory sample_trajectory(const ControlSpline& spline, double t0, double dt, std::size_t n);

struct BearingSynthesis {
  std::size_t count = 200;
  double true_offset = 0.0;  // s; observed clock = observer clock + offset
  double sigma = 0.0;        // per-component std of the additive noise
  double t_begin = 0.0;      // observer-clock window for the samples
  double t_end = 0.0;
  std::uint64_t seed = 0;
};

// Bearings from robot A (observer) to robot B, both splines in one common
// frame; B's spline is parameterized by B's clock. Throws CoincidentRobots,
// OutOfSupport, InvalidConfig.
std::vector<BearingObservation> synthesize_bearings(const ControlSpline& observer,
                                                    const ControlSpline& observed,
                                                    const BearingSynthesis& cfg);

// Re-labels every timestamp t as t - delta; pose content is untouched.
Trajectory shift_trajectory(const Trajectory& traj, double delta);

// Linear in translation/velocity, slerp in rotation. Throws OutOfRange.
TimedPose interpolate(const Trajectory& traj, double t);

// Central differences inside, one-sided at the ends. Throws TooShort below
// three samples.
Trajectory finite_difference_velocities(const Trajectory& traj);

// Expresses a trajectory given in frame W in a frame F, where (rotation,
// translation) maps F coordinates into W: p_W = R p_F + t.
Trajectory express_in_frame(const Trajectory& traj, const Rotation3& rotation,
                            const Vec3& translation);

}  // namespace bearsync
