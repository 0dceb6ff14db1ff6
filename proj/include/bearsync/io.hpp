#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bearsync/estimator.hpp"
#include "bearsync/simulation.hpp"
#include "bearsync/trajectory.hpp"

namespace bearsync {

// Trajectory table: header row, then `t,x,y,z,qw,qx,qy,qz[,vx,vy,vz]` per
// sample (scalar-first quaternion). Without velocity columns, velocities are
// recomputed by finite differences.
void write_trajectory(std::ostream& os, const Trajectory& traj, bool with_velocity = true);
Trajectory read_trajectory(std::istream& is);
Trajectory load_trajectory(const std::filesystem::path& path);
void save_trajectory(const std::filesystem::path& path, const Trajectory& traj,
                     bool with_velocity = true);

// Bearing table: header row, then `t,bx,by,bz`. Rows off unit length by more
// than 1e-6 are renormalized and reported through `warnings`.
void write_bearings(std::ostream& os, const std::vector<BearingObservation>& bearings);
std::vector<BearingObservation> read_bearings(std::istream& is,
                                              std::vector<std::string>* warnings = nullptr);
std::vector<BearingObservation> load_bearings(const std::filesystem::path& path,
                                              std::vector<std::string>* warnings = nullptr);
void save_bearings(const std::filesystem::path& path,
                   const std::vector<BearingObservation>& bearings);

std::string ground_truth_json(const GroundTruth& truth, std::uint64_t seed);
GroundTruth parse_ground_truth_json(const std::string& text);

// Estimation report documents.
std::string estimate_report_json(const RelativeEstimate& est, const std::string& method);
std::string ito_report_json(const ItoResult& result);

}  // namespace bearsync
