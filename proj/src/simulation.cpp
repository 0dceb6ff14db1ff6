#include "bearsync/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "bearsync/errors.hpp"
#include "bearsync/rng.hpp"

namespace bearsync {

std::pair<double, double> bearing_window(const ScenarioConfig& cfg) {
  const double span = cfg.odom_dt * static_cast<double>(cfg.odom_count - 1);
  const double margin = std::max(cfg.bearing_margin, std::abs(cfg.true_offset) + 0.5);
  const double begin = margin, end = span - margin;
  if (!cfg.align_bearings || cfg.bearing_count < 2 || end <= begin) return {begin, end};
  const double dt = cfg.odom_dt;
  const double first = std::ceil(begin / dt - 1e-9);
  const double last = std::floor(end / dt + 1e-9);
  const double gaps = static_cast<double>(cfg.bearing_count - 1);
  const double stride = std::floor((last - first) / gaps);
  if (stride < 1.0) return {begin, end};  // denser than odometry; leave unaligned
  return {first * dt, (first + stride * gaps) * dt};
}

Scenario make_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  if (cfg.odom_count < 3) throw Error(ErrorKind::InvalidConfig, "odom_count must be >= 3");
  if (!(cfg.odom_dt > 0.0)) throw Error(ErrorKind::InvalidConfig, "odom_dt must be > 0");
  if (cfg.separation < 0.0) throw Error(ErrorKind::InvalidConfig, "separation must be >= 0");

  Rng rng(derive_seed(seed, 0));
  SplineParams pa = cfg.spline;
  SplineParams pb = cfg.spline;
  pb.origin = pa.origin + cfg.separation * rng.unit_vector();
  ControlSpline sa = generate_spline(pa, derive_seed(seed, 1));
  ControlSpline sb = generate_spline(pb, derive_seed(seed, 2));

  GroundTruth truth;
  truth.rotation = rng.rotation();
  truth.translation = 2.0 * rng.normal3();
  truth.offset = cfg.true_offset;

  Trajectory ta = sample_trajectory(sa, 0.0, cfg.odom_dt, cfg.odom_count);
  Trajectory tb_world = sample_trajectory(sb, 0.0, cfg.odom_dt, cfg.odom_count);
  Trajectory tb = express_in_frame(tb_world, truth.rotation, truth.translation);

  const auto [t_begin, t_end] = bearing_window(cfg);
  BearingSynthesis bs;
  bs.count = cfg.bearing_count;
  bs.true_offset = cfg.true_offset;
  bs.sigma = cfg.sigma;
  bs.t_begin = t_begin;
  bs.t_end = t_end;
  bs.seed = derive_seed(seed, 3);
  auto bearings = synthesize_bearings(sa, sb, bs);

  return Scenario{std::move(sa), std::move(sb), std::move(ta), std::move(tb), std::move(bearings),
                  truth};
}

}  // namespace bearsync
