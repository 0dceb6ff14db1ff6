#pragma once

#include <cstdint>
#include <vector>

#include "bearsync/trajectory.hpp"

namespace bearsync {

struct ScenarioConfig {
  SplineParams spline;            // shared by both robots (origins differ)
  double odom_dt = 0.005;         // s
  std::size_t odom_count = 4000;
  std::size_t bearing_count = 200;
  double bearing_margin = 1.5;    // s trimmed from both ends of the odometry span
  double true_offset = 0.0;       // s
  double sigma = 0.0;
  double separation = 1.0;        // m between the two spline origins
  bool align_bearings = true;     // put bearing timestamps on odometry sample times
};

struct GroundTruth {
  Rotation3 rotation;  // observed odometry frame -> observer odometry frame
  Vec3 translation = Vec3::Zero();
  double offset = 0.0;
};

// A two-robot simulated instance. The observer's odometry frame is the world
// frame; the observed robot's odometry is expressed in a random local frame.
struct Scenario {
  ControlSpline observer_spline;
  ControlSpline observed_spline;  // world frame, parameterized by the observed clock
  Trajectory observer;
  Trajectory observed;            // local frame
  std::vector<BearingObservation> bearings;
  GroundTruth truth;
};

// Bearing window on the observer clock: the odometry span shrunk by
// max(bearing_margin, |true_offset| + 0.5) on each side. With align_bearings
// the window is tightened so that all bearing_count uniform samples land on
// odometry timestamps.
std::pair<double, double> bearing_window(const ScenarioConfig& cfg);

Scenario make_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

}  // namespace bearsync
