#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "bearsync/bench.hpp"
#include "bearsync/errors.hpp"
#include "bearsync/estimator.hpp"
#include "bearsync/io.hpp"
#include "bearsync/problem.hpp"
#include "bearsync/sdp.hpp"
#include "bearsync/simulation.hpp"

namespace py = pybind11;
using namespace bearsync;

namespace {

using Settings = std::map<std::string, std::string>;

ExperimentConfig make_config(const Settings& settings) {
  ExperimentConfig cfg;
  for (const auto& [k, v] : settings) apply_setting(cfg, k, v);
  return cfg;
}

Trajectory trajectory_from_arrays(const Eigen::VectorXd& t, const Eigen::MatrixX3d& p,
                                  const Eigen::MatrixX4d& q,
                                  const std::optional<Eigen::MatrixX3d>& v) {
  const auto n = t.size();
  if (p.rows() != n || q.rows() != n || (v && v->rows() != n)) {
    throw Error(ErrorKind::InvalidConfig, "trajectory arrays must have matching row counts");
  }
  std::vector<TimedPose> poses(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& pose = poses[static_cast<std::size_t>(i)];
    pose.t = t(i);
    pose.rotation =
        Rotation3::from_quaternion(Eigen::Quaterniond(q(i, 0), q(i, 1), q(i, 2), q(i, 3)));
    pose.translation = p.row(i).transpose();
    if (v) pose.velocity = v->row(i).transpose();
  }
  Trajectory traj(std::move(poses));
  return v ? traj : finite_difference_velocities(traj);
}

std::vector<BearingObservation> bearings_from_arrays(const Eigen::VectorXd& t,
                                                     const Eigen::MatrixX3d& d) {
  if (d.rows() != t.size()) {
    throw Error(ErrorKind::InvalidConfig, "bearing times and directions differ in length");
  }
  std::vector<BearingObservation> out(static_cast<std::size_t>(t.size()));
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const Vec3 dir = d.row(i).transpose();
    if (!(dir.norm() > 0.0)) throw Error(ErrorKind::InvalidConfig, "zero bearing direction");
    out[static_cast<std::size_t>(i)] = {t(i), dir.normalized()};
  }
  return out;
}

py::tuple bearings_to_arrays(const std::vector<BearingObservation>& b) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(b.size()));
  Eigen::MatrixX3d d(static_cast<Eigen::Index>(b.size()), 3);
  for (std::size_t i = 0; i < b.size(); ++i) {
    t(static_cast<Eigen::Index>(i)) = b[i].t;
    d.row(static_cast<Eigen::Index>(i)) = b[i].direction.transpose();
  }
  return py::make_tuple(t, d);
}

template <typename F>
Eigen::MatrixXd columns(const Trajectory& traj, int cols, F&& row) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(traj.size()), cols);
  for (std::size_t i = 0; i < traj.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = row(traj[i]);
  return m;
}

py::dict record_dict(const TrialRecord& r) {
  py::dict d;
  d["trial_id"] = r.trial_id;
  d["seed"] = r.seed;
  d["true_offset"] = r.true_offset;
  d["sigma"] = r.sigma;
  d["method"] = to_string(r.method);
  d["offset_error"] = r.offset_error;
  d["rotation_error_deg"] = r.rotation_error;
  d["translation_error_m"] = r.translation_error;
  d["cost"] = r.cost;
  d["rank_ratio"] = r.rank_ratio;
  d["iterations"] = r.iterations;
  d["wall_time_s"] = r.wall_time;
  d["status"] = to_string(r.status);
  d["config_hash"] = r.config_hash;
  return d;
}

}  // namespace

PYBIND11_MODULE(_bearsync, m) {
  m.doc() = "Joint clock offset and relative pose estimation from bearings and odometry";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  static py::exception<ParseError> parse_error(m, "ParseError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParseError& e) {
      py::set_error(parse_error, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::class_<Trajectory>(m, "Trajectory")
      .def(py::init(&trajectory_from_arrays), py::arg("t"), py::arg("positions"),
           py::arg("quaternions_wxyz"), py::arg("velocities") = py::none(),
           "Velocities are finite-differenced when omitted.")
      .def("__len__", &Trajectory::size)
      .def_property_readonly("t", [](const Trajectory& tr) {
        return columns(tr, 1, [](const TimedPose& p) { return Eigen::Matrix<double, 1, 1>(p.t); })
            .col(0)
            .eval();
      })
      .def_property_readonly("positions", [](const Trajectory& tr) {
        return columns(tr, 3, [](const TimedPose& p) { return p.translation.transpose(); });
      })
      .def_property_readonly("quaternions_wxyz", [](const Trajectory& tr) {
        return columns(tr, 4, [](const TimedPose& p) {
          const Eigen::Quaterniond q = p.rotation.quaternion();
          return Eigen::RowVector4d(q.w(), q.x(), q.y(), q.z());
        });
      })
      .def_property_readonly("velocities", [](const Trajectory& tr) {
        return columns(tr, 3, [](const TimedPose& p) { return p.velocity.transpose(); });
      })
      .def("shifted", &shift_trajectory, py::arg("delta"),
           "Relabels every timestamp t as t - delta.")
      .def("save", [](const Trajectory& tr, const std::string& path, bool with_velocity) {
        save_trajectory(path, tr, with_velocity);
      }, py::arg("path"), py::arg("with_velocity") = true)
      .def_static("load", [](const std::string& path) { return load_trajectory(path); });

  m.def("load_bearings", [](const std::string& path) {
    std::vector<std::string> warnings;
    const auto b = load_bearings(path, &warnings);
    py::tuple arrays = bearings_to_arrays(b);
    return py::make_tuple(arrays[0], arrays[1], warnings);
  }, py::arg("path"), "Returns (times, directions, warnings).");
  m.def("save_bearings", [](const std::string& path, const Eigen::VectorXd& t,
                            const Eigen::MatrixX3d& d) { save_bearings(path, bearings_from_arrays(t, d)); },
        py::arg("path"), py::arg("t"), py::arg("directions"));

  m.def("simulate", [](double offset, double sigma, std::uint64_t seed, const Settings& settings) {
    ExperimentConfig cfg = make_config(settings);
    cfg.scenario.true_offset = offset;
    cfg.scenario.sigma = sigma;
    const Scenario sc = make_scenario(cfg.scenario, seed);
    py::dict out;
    out["observer"] = sc.observer;
    out["observed"] = sc.observed;
    py::tuple b = bearings_to_arrays(sc.bearings);
    out["bearing_t"] = b[0];
    out["bearing_directions"] = b[1];
    out["truth_json"] = ground_truth_json(sc.truth, seed);
    return out;
  }, py::arg("offset") = 0.0, py::arg("sigma") = 0.0, py::arg("seed") = 1,
        py::arg("settings") = Settings{});

  m.def("estimate_json", [](const std::string& method, const Trajectory& observer,
                            const Trajectory& observed, const Eigen::VectorXd& t,
                            const Eigen::MatrixX3d& d, const Settings& settings) {
    const ExperimentConfig cfg = make_config(settings);
    const auto bearings = bearings_from_arrays(t, d);
    py::gil_scoped_release release;
    switch (parse_method(method)) {
      case Method::Baseline:
        return estimate_report_json(estimate_baseline(bearings, observer, observed, cfg.ito.solver), "baseline");
      case Method::Nto:
        return estimate_report_json(estimate_nto(bearings, observer, observed, cfg.ito.solver), "nto");
      case Method::Ito:
        return ito_report_json(estimate_ito(bearings, observer, observed, cfg.ito));
    }
    throw Error(ErrorKind::InvalidConfig, "unknown method");
  }, py::arg("method"), py::arg("observer"), py::arg("observed"), py::arg("bearing_t"),
        py::arg("bearing_directions"), py::arg("settings") = Settings{});

  m.def("lift", [](const Eigen::Matrix3d& r, double offset, double y) {
    return lift(Rotation3(r), offset, y);
  }, py::arg("rotation"), py::arg("offset"), py::arg("y") = 1.0);

  m.def("constraints", [] {
    py::list out;
    for (const auto& c : build_constraints()) out.append(py::make_tuple(c.Q, c.g, c.label));
    return out;
  }, "The 52 quadratic constraints as (Q, g, label) tuples.");

  m.def("solve_sdp", [](const Eigen::MatrixXd& cost, const std::vector<std::tuple<Eigen::MatrixXd, double, std::string>>& cons,
                        double gap_tol, int max_iters) {
    SdpProblem p{cost, {}};
    for (const auto& [q, g, label] : cons) p.constraints.push_back({q, g, label});
    SdpOptions opt;
    opt.gap_tol = gap_tol;
    opt.max_iters = max_iters;
    SdpSolution s;
    {
      py::gil_scoped_release release;
      s = solve(p, opt);
    }
    py::dict out;
    out["status"] = to_string(s.status);
    out["Z"] = s.Z;
    out["primal_objective"] = s.primal_objective;
    out["dual_objective"] = s.dual_objective;
    out["gap"] = s.gap;
    out["iterations"] = s.iterations;
    out["max_constraint_residual"] = s.max_constraint_residual;
    out["rank_ratio"] = tightness(s);
    return out;
  }, py::arg("cost"), py::arg("constraints"), py::arg("gap_tol") = 1e-8, py::arg("max_iters") = 100);

  m.def("sweep", [](const std::vector<std::string>& methods, const Settings& settings) {
    const ExperimentConfig cfg = make_config(settings);
    std::vector<Method> ms;
    for (const auto& s : methods) ms.push_back(parse_method(s));
    std::vector<TrialRecord> recs;
    {
      py::gil_scoped_release release;
      recs = run_sweep(cfg, ms);
    }
    py::list out;
    for (const auto& r : recs) out.append(record_dict(r));
    return out;
  }, py::arg("methods"), py::arg("settings") = Settings{},
        "Runs every (offset, sigma, trial, method) cell and returns one dict per record.");

  m.def("config_hash", [](const Settings& settings) { return config_hash(make_config(settings)); },
        py::arg("settings") = Settings{});
  m.def("presets", &preset_names);
  m.attr("__version__") = "0.1.0";
}
