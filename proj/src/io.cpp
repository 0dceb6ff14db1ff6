#include "bearsync/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "bearsync/errors.hpp"
#include "json.hpp"

namespace bearsync {

namespace {

using json = nlohmann::ordered_json;

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(const std::string& field, std::size_t line, const char* column) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw ParseError(line, std::string("column '") + column + "': not a number: '" + field + "'");
  }
  if (!std::isfinite(v)) throw ParseError(line, std::string("column '") + column + "' is not finite");
  return v;
}

// Reads the header row and data rows; blank lines are skipped. Returns rows
// paired with their 1-based line numbers.
struct Table {
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
};

Table read_table(std::istream& is) {
  Table t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    t.rows.emplace_back(lineno, std::move(fields));
  }
  if (!have_header) throw ParseError(lineno == 0 ? 1 : lineno, "missing header row");
  return t;
}

void expect_header(const Table& t, const std::vector<std::string>& expected, std::size_t line) {
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i >= t.header.size() || t.header[i] != expected[i]) {
      std::string want;
      for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
      throw ParseError(line, "header must start with '" + want + "'");
    }
  }
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  return is;
}

json rotation_json(const Rotation3& r) {
  const Eigen::Quaterniond q = r.quaternion();
  json m = json::array();
  for (int i = 0; i < 3; ++i) m.push_back({r.matrix()(i, 0), r.matrix()(i, 1), r.matrix()(i, 2)});
  return {{"quaternion_wxyz", {q.w(), q.x(), q.y(), q.z()}}, {"matrix", m}};
}

json estimate_json(const RelativeEstimate& est) {
  json j;
  j["rotation"] = rotation_json(est.rotation);
  j["translation"] = {est.translation.x(), est.translation.y(), est.translation.z()};
  j["offset"] = est.offset;
  j["offset_ratio_readout"] = est.offset_ratio;
  j["cost"] = est.cost;
  j["rounded_cost"] = est.rounded_cost;
  j["lower_bound"] = est.lower_bound;
  j["rank_ratio"] = est.rank_ratio;
  j["tight"] = est.tight;
  j["solver_status"] = to_string(est.solver_status);
  j["solver_iterations"] = est.solver_iterations;
  j["wall_time_s"] = est.wall_time;
  j["distances"] = std::vector<double>(est.distances.data(), est.distances.data() + est.distances.size());
  j["warnings"] = est.warnings;
  return j;
}

}  // namespace

void write_trajectory(std::ostream& os, const Trajectory& traj, bool with_velocity) {
  os << "t,x,y,z,qw,qx,qy,qz" << (with_velocity ? ",vx,vy,vz" : "") << '\n';
  for (const auto& p : traj.poses()) {
    const Eigen::Quaterniond q = p.rotation.quaternion();
    os << fmt(p.t) << ',' << fmt(p.translation.x()) << ',' << fmt(p.translation.y()) << ','
       << fmt(p.translation.z()) << ',' << fmt(q.w()) << ',' << fmt(q.x()) << ',' << fmt(q.y())
       << ',' << fmt(q.z());
    if (with_velocity) {
      os << ',' << fmt(p.velocity.x()) << ',' << fmt(p.velocity.y()) << ',' << fmt(p.velocity.z());
    }
    os << '\n';
  }
}

Trajectory read_trajectory(std::istream& is) {
  const Table t = read_table(is);
  static const std::vector<std::string> kBase = {"t", "x", "y", "z", "qw", "qx", "qy", "qz"};
  static const std::vector<std::string> kVel = {"vx", "vy", "vz"};
  expect_header(t, kBase, 1);
  bool with_velocity = false;
  if (t.header.size() == 11) {
    std::vector<std::string> full = kBase;
    full.insert(full.end(), kVel.begin(), kVel.end());
    expect_header(t, full, 1);
    with_velocity = true;
  } else if (t.header.size() != 8) {
    throw ParseError(1, "expected 8 or 11 columns, got " + std::to_string(t.header.size()));
  }
  static const char* kNames[] = {"t", "x", "y", "z", "qw", "qx", "qy", "qz", "vx", "vy", "vz"};
  std::vector<TimedPose> poses;
  poses.reserve(t.rows.size());
  for (const auto& [line, fields] : t.rows) {
    if (fields.size() != t.header.size()) {
      throw ParseError(line, "expected " + std::to_string(t.header.size()) + " fields, got " +
                                 std::to_string(fields.size()));
    }
    double v[11];
    for (std::size_t i = 0; i < fields.size(); ++i) v[i] = parse_number(fields[i], line, kNames[i]);
    TimedPose p;
    p.t = v[0];
    if (!poses.empty() && !(p.t > poses.back().t)) {
      throw ParseError(line, "timestamps must be strictly increasing");
    }
    p.translation = Vec3(v[1], v[2], v[3]);
    const Eigen::Quaterniond q(v[4], v[5], v[6], v[7]);
    if (std::abs(q.norm() - 1.0) > 1e-6) throw ParseError(line, "quaternion is not unit length");
    p.rotation = Rotation3::from_quaternion(q);
    if (with_velocity) p.velocity = Vec3(v[8], v[9], v[10]);
    poses.push_back(p);
  }
  if (poses.size() < 2) throw ParseError(t.rows.empty() ? 2 : t.rows.back().first, "need at least 2 samples");
  Trajectory traj(std::move(poses));
  if (!with_velocity) {
    if (traj.size() < 3) throw ParseError(t.rows.back().first, "need >= 3 samples to derive velocities");
    return finite_difference_velocities(traj);
  }
  return traj;
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_trajectory(is);
}

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj, bool with_velocity) {
  auto os = open_out(path);
  write_trajectory(os, traj, with_velocity);
}

void write_bearings(std::ostream& os, const std::vector<BearingObservation>& bearings) {
  os << "t,bx,by,bz\n";
  for (const auto& b : bearings) {
    os << fmt(b.t) << ',' << fmt(b.direction.x()) << ',' << fmt(b.direction.y()) << ','
       << fmt(b.direction.z()) << '\n';
  }
}

std::vector<BearingObservation> read_bearings(std::istream& is, std::vector<std::string>* warnings) {
  const Table t = read_table(is);
  expect_header(t, {"t", "bx", "by", "bz"}, 1);
  if (t.header.size() != 4) throw ParseError(1, "expected 4 columns");
  static const char* kNames[] = {"t", "bx", "by", "bz"};
  std::vector<BearingObservation> out;
  out.reserve(t.rows.size());
  for (const auto& [line, fields] : t.rows) {
    if (fields.size() != 4) {
      throw ParseError(line, "expected 4 fields, got " + std::to_string(fields.size()));
    }
    double v[4];
    for (std::size_t i = 0; i < 4; ++i) v[i] = parse_number(fields[i], line, kNames[i]);
    BearingObservation b;
    b.t = v[0];
    if (!out.empty() && !(b.t > out.back().t)) {
      throw ParseError(line, "timestamps must be strictly increasing");
    }
    b.direction = Vec3(v[1], v[2], v[3]);
    const double n = b.direction.norm();
    if (!(n > 1e-9)) throw ParseError(line, "zero bearing vector");
    if (std::abs(n - 1.0) > 1e-6) {
      if (warnings) {
        std::ostringstream os;
        os << "line " << line << ": bearing norm " << std::setprecision(9) << n << " renormalized";
        warnings->push_back(os.str());
      }
    }
    b.direction /= n;
    out.push_back(b);
  }
  return out;
}

std::vector<BearingObservation> load_bearings(const std::filesystem::path& path,
                                              std::vector<std::string>* warnings) {
  auto is = open_in(path);
  return read_bearings(is, warnings);
}

void save_bearings(const std::filesystem::path& path,
                   const std::vector<BearingObservation>& bearings) {
  auto os = open_out(path);
  write_bearings(os, bearings);
}

std::string ground_truth_json(const GroundTruth& truth, std::uint64_t seed) {
  json j;
  j["rotation"] = rotation_json(truth.rotation);
  j["translation"] = {truth.translation.x(), truth.translation.y(), truth.translation.z()};
  j["offset"] = truth.offset;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

GroundTruth parse_ground_truth_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    GroundTruth g;
    const auto& q = j.at("rotation").at("quaternion_wxyz");
    g.rotation = Rotation3::from_quaternion(
        Eigen::Quaterniond(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                           q.at(3).get<double>()));
    const auto& t = j.at("translation");
    g.translation = Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
    g.offset = j.at("offset").get<double>();
    return g;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("ground truth: ") + e.what());
  }
}

std::string estimate_report_json(const RelativeEstimate& est, const std::string& method) {
  json j = estimate_json(est);
  j["method"] = method;
  return j.dump(2) + "\n";
}

std::string ito_report_json(const ItoResult& result) {
  json j = estimate_json(result.final_estimate);
  j["method"] = "ito";
  j["total_offset"] = result.total_offset;
  j["iteration_offsets"] = result.offsets;
  j["iterations"] = result.iterations;
  j["converged"] = result.converged;
  j["wall_time_s"] = result.wall_time;
  return j.dump(2) + "\n";
}

}  // namespace bearsync
