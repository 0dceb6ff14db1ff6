#include "bearsync/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "bearsync/errors.hpp"
#include "bearsync/io.hpp"
#include "bearsync/rng.hpp"
#include "json.hpp"

namespace bearsync {

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw Error(ErrorKind::InvalidConfig, key + ": not a number: '" + text + "'");
  }
  return v;
}

long long to_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw Error(ErrorKind::InvalidConfig, key + ": not an integer: '" + text + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw Error(ErrorKind::InvalidConfig, key + ": not an unsigned integer: '" + text + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw Error(ErrorKind::InvalidConfig, key + ": not a boolean: '" + text + "'");
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : ",") + fmt(x);
  return out;
}

// 64-bit FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<Method> default_or(const ExperimentConfig& cfg, std::vector<Method> fallback) {
  return cfg.methods.empty() ? fallback : cfg.methods;
}

TrialStatus classify(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Infeasible:
      return TrialStatus::SolverFailure;
    default:
      return TrialStatus::Degenerate;
  }
}

TrialRecord fill_errors(TrialRecord r, const RelativeEstimate& est, const GroundTruth& truth) {
  r.offset_error = std::abs(est.offset - truth.offset);
  r.rotation_error = geodesic_deg(est.rotation, truth.rotation);
  r.translation_error = (est.translation - truth.translation).norm();
  r.cost = est.cost;
  r.rank_ratio = est.rank_ratio;
  if (est.solver_status != SdpStatus::Optimal) {
    r.status = TrialStatus::SolverFailure;
  }
  return r;
}

std::filesystem::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create directory '" + dir + "': " + ec.message());
  return std::filesystem::path(dir);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  return os;
}

SweepResult write_sweep(const ExperimentConfig& cfg, const std::string& command,
                        std::vector<TrialRecord> records, std::vector<std::string> failures,
                        double elapsed) {
  SweepResult res;
  const auto dir = ensure_dir(cfg.out);
  res.records_path = dir / "records.csv";
  res.summary_path = dir / "summary.csv";
  res.manifest_path = dir / "manifest.json";
  {
    auto os = open_out(res.records_path);
    write_records_csv(os, records);
  }
  {
    auto os = open_out(res.summary_path);
    write_summary_csv(os, aggregate(records));
  }
  std::map<std::string, int> totals;
  for (const auto& s : {TrialStatus::Ok, TrialStatus::NotConverged, TrialStatus::Degenerate,
                        TrialStatus::SolverFailure}) {
    totals[to_string(s)] = 0;
  }
  for (const auto& r : records) ++totals[to_string(r.status)];
  nlohmann::ordered_json m;
  m["command"] = command;
  m["bearsync_version"] = kVersion;
  m["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                       std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION);
  m["config_hash"] = config_hash(cfg);
  m["config"] = canonical_config(cfg);
  m["records"] = records.size();
  m["status_totals"] = totals;
  m["workers"] = cfg.workers;
  m["elapsed_s"] = elapsed;
  m["failures"] = failures;
  m["files"] = {{"records", res.records_path.filename().string()},
                {"summary", res.summary_path.filename().string()}};
  auto os = open_out(res.manifest_path);
  os << m.dump(2) << "\n";
  res.records = std::move(records);
  res.failures = std::move(failures);
  return res;
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(trim(f));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::Baseline: return "baseline";
    case Method::Nto: return "nto";
    case Method::Ito: return "ito";
  }
  return "?";
}

Method parse_method(const std::string& text) {
  const std::string t = trim(text);
  if (t == "baseline") return Method::Baseline;
  if (t == "nto") return Method::Nto;
  if (t == "ito") return Method::Ito;
  throw Error(ErrorKind::InvalidConfig, "unknown method '" + text + "' (baseline|nto|ito)");
}

const char* to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::Ok: return "ok";
    case TrialStatus::NotConverged: return "not_converged";
    case TrialStatus::Degenerate: return "degenerate";
    case TrialStatus::SolverFailure: return "solver_failure";
  }
  return "?";
}

std::vector<double> parse_grid(const std::string& text) {
  const std::string t = trim(text);
  std::vector<double> out;
  if (t.empty()) return out;
  if (t.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(t);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(p);
    if (parts.size() != 3) throw Error(ErrorKind::InvalidConfig, "range must be start:stop:step");
    const double a = to_double("range", parts[0]);
    const double b = to_double("range", parts[1]);
    const double step = to_double("range", parts[2]);
    if (!(step > 0.0) || b < a) throw Error(ErrorKind::InvalidConfig, "bad range '" + text + "'");
    // Index-based so that 0:1.4:0.02 yields exactly 71 points.
    const auto n = static_cast<long long>(std::floor((b - a) / step + 1e-9));
    for (long long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
    return out;
  }
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double("grid", item));
  return out;
}

void apply_setting(ExperimentConfig& cfg, const std::string& raw_key, const std::string& value) {
  const std::string key = trim(raw_key);
  auto& sc = cfg.scenario;
  auto& sp = sc.spline;
  auto& solver = cfg.ito.solver;
  if (key == "seed") cfg.seed = to_u64(key, value);
  else if (key == "num_control") sp.num_control = static_cast<std::size_t>(to_int(key, value));
  else if (key == "max_step") sp.max_step = to_double(key, value);
  else if (key == "knot") sp.knot = to_double(key, value);
  else if (key == "max_rot_step") sp.max_rot_step = to_double(key, value);
  else if (key == "min_step_fraction") sp.min_step_fraction = to_double(key, value);
  else if (key == "heading_persistence") sp.heading_persistence = to_double(key, value);
  else if (key == "home_radius") sp.home_radius = to_double(key, value);
  else if (key == "separation") sc.separation = to_double(key, value);
  else if (key == "odom_dt") sc.odom_dt = to_double(key, value);
  else if (key == "odom_count") sc.odom_count = static_cast<std::size_t>(to_int(key, value));
  else if (key == "bearing_count") sc.bearing_count = static_cast<std::size_t>(to_int(key, value));
  else if (key == "bearing_margin") sc.bearing_margin = to_double(key, value);
  else if (key == "align_bearings") sc.align_bearings = to_bool(key, value);
  else if (key == "offset") sc.true_offset = to_double(key, value);
  else if (key == "sigma") sc.sigma = to_double(key, value);
  else if (key == "offsets") cfg.offsets = parse_grid(value);
  else if (key == "sigmas") cfg.sigmas = parse_grid(value);
  else if (key == "trials") cfg.trials = static_cast<int>(to_int(key, value));
  else if (key == "methods" || key == "method") {
    cfg.methods.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!trim(item).empty()) cfg.methods.push_back(parse_method(item));
    }
  }
  else if (key == "ito_max_iterations") cfg.ito.max_iterations = static_cast<int>(to_int(key, value));
  else if (key == "ito_epsilon") cfg.ito.epsilon = to_double(key, value);
  else if (key == "gap_tol") solver.sdp.gap_tol = to_double(key, value);
  else if (key == "feas_tol") solver.sdp.feas_tol = to_double(key, value);
  else if (key == "max_iters") solver.sdp.max_iters = static_cast<int>(to_int(key, value));
  else if (key == "tightness_threshold") solver.tightness_threshold = to_double(key, value);
  else if (key == "lift_consistency_tol") solver.lift_consistency_tol = to_double(key, value);
  else if (key == "offset_family") solver.constraints.offset_family = to_bool(key, value);
  else if (key == "linking") solver.constraints.linking = to_bool(key, value);
  else if (key == "workers") cfg.workers = static_cast<int>(to_int(key, value));
  else if (key == "out") cfg.out = trim(value);
  else throw Error(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
}

void apply_config_text(ExperimentConfig& cfg, std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected 'key = value'");
    try {
      apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      throw ParseError(lineno, e.what());
    }
  }
}

void apply_config_file(ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open config '" + path.string() + "'");
  apply_config_text(cfg, is);
}

std::vector<std::string> preset_names() {
  return {"paper-tolerance", "desk-tolerance", "paper-grid", "desk-grid", "smoke"};
}

void apply_preset(ExperimentConfig& cfg, const std::string& name) {
  if (name == "paper-tolerance") {
    cfg.offsets = parse_grid("0:1.4:0.02");
    cfg.sigmas = {0.0};
    cfg.trials = 100;
  } else if (name == "desk-tolerance") {
    cfg.offsets = parse_grid("0:1.2:0.2");
    cfg.sigmas = {0.0};
    cfg.trials = 10;
  } else if (name == "paper-grid") {
    cfg.offsets = parse_grid("0:1:0.1");
    cfg.sigmas = parse_grid("0:0.1:0.01");
    cfg.trials = 100;
  } else if (name == "desk-grid") {
    cfg.offsets = {0.0, 0.5, 1.0};
    cfg.sigmas = {0.0, 0.05, 0.1};
    cfg.trials = 5;
  } else if (name == "smoke") {
    cfg.offsets = {0.0, 0.3};
    cfg.sigmas = {0.0};
    cfg.trials = 2;
    cfg.scenario.odom_count = 2000;
    cfg.scenario.bearing_count = 60;
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw Error(ErrorKind::InvalidConfig, "unknown preset '" + name + "' (" + known + ")");
  }
}

void validate(const ExperimentConfig& cfg) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::InvalidConfig, what);
  };
  const auto& sc = cfg.scenario;
  require(!cfg.offsets.empty(), "offset grid is empty");
  require(!cfg.sigmas.empty(), "noise grid is empty");
  require(cfg.trials >= 1, "trials must be >= 1");
  require(cfg.workers >= 1, "workers must be >= 1");
  require(sc.spline.num_control >= 4, "num_control must be >= 4");
  require(sc.spline.max_step > 0.0, "max_step must be > 0");
  require(sc.spline.knot > 0.0, "knot must be > 0");
  require(sc.odom_dt > 0.0, "odom_dt must be > 0");
  require(sc.odom_count >= 3, "odom_count must be >= 3");
  require(sc.bearing_count >= 12, "bearing_count must be >= 12");
  require(cfg.ito.max_iterations >= 1, "ito_max_iterations must be >= 1");
  require(cfg.ito.epsilon > 0.0, "ito_epsilon must be > 0");
  for (double s : cfg.sigmas) require(s >= 0.0, "noise levels must be >= 0");
  require(sc.sigma >= 0.0, "sigma must be >= 0");
}

std::string canonical_config(const ExperimentConfig& cfg) {
  const auto& sc = cfg.scenario;
  const auto& sp = sc.spline;
  const auto& solver = cfg.ito.solver;
  std::string methods;
  for (Method m : cfg.methods) methods += (methods.empty() ? "" : ",") + std::string(to_string(m));
  std::ostringstream os;
  os << "seed = " << cfg.seed << "\n"
     << "num_control = " << sp.num_control << "\n"
     << "max_step = " << fmt(sp.max_step) << "\n"
     << "knot = " << fmt(sp.knot) << "\n"
     << "max_rot_step = " << fmt(sp.max_rot_step) << "\n"
     << "min_step_fraction = " << fmt(sp.min_step_fraction) << "\n"
     << "heading_persistence = " << fmt(sp.heading_persistence) << "\n"
     << "home_radius = " << fmt(sp.home_radius) << "\n"
     << "separation = " << fmt(sc.separation) << "\n"
     << "odom_dt = " << fmt(sc.odom_dt) << "\n"
     << "odom_count = " << sc.odom_count << "\n"
     << "bearing_count = " << sc.bearing_count << "\n"
     << "bearing_margin = " << fmt(sc.bearing_margin) << "\n"
     << "align_bearings = " << (sc.align_bearings ? "true" : "false") << "\n"
     << "offset = " << fmt(sc.true_offset) << "\n"
     << "sigma = " << fmt(sc.sigma) << "\n"
     << "offsets = " << join(cfg.offsets) << "\n"
     << "sigmas = " << join(cfg.sigmas) << "\n"
     << "trials = " << cfg.trials << "\n"
     << "methods = " << methods << "\n"
     << "ito_max_iterations = " << cfg.ito.max_iterations << "\n"
     << "ito_epsilon = " << fmt(cfg.ito.epsilon) << "\n"
     << "gap_tol = " << fmt(solver.sdp.gap_tol) << "\n"
     << "feas_tol = " << fmt(solver.sdp.feas_tol) << "\n"
     << "max_iters = " << solver.sdp.max_iters << "\n"
     << "tightness_threshold = " << fmt(solver.tightness_threshold) << "\n"
     << "lift_consistency_tol = " << fmt(solver.lift_consistency_tol) << "\n"
     << "offset_family = " << (solver.constraints.offset_family ? "true" : "false") << "\n"
     << "linking = " << (solver.constraints.linking ? "true" : "false") << "\n";
  return os.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
  // Output location and parallelism do not change results; keep them out.
  ExperimentConfig c = cfg;
  c.out.clear();
  c.workers = 1;
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(canonical_config(c));
  return os.str();
}

std::uint64_t trial_seed(const ExperimentConfig& cfg, int trial_id) {
  return derive_seed(cfg.seed, static_cast<std::uint64_t>(trial_id));
}

std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, const std::vector<Method>& methods,
                                   double offset, double sigma, int trial_id,
                                   std::vector<std::string>* failures) {
  auto note = [&](const TrialRecord& r, const std::string& why) {
    if (!failures) return;
    std::ostringstream os;
    os << "offset=" << fmt(r.true_offset) << " sigma=" << fmt(r.sigma) << " trial=" << r.trial_id
       << " method=" << to_string(r.method) << " " << to_string(r.status) << ": " << why;
    failures->push_back(os.str());
  };
  TrialRecord base;
  base.trial_id = trial_id;
  base.seed = trial_seed(cfg, trial_id);
  base.true_offset = offset;
  base.sigma = sigma;
  base.config_hash = config_hash(cfg);

  std::vector<TrialRecord> out;
  ScenarioConfig sc = cfg.scenario;
  sc.true_offset = offset;
  sc.sigma = sigma;
  std::optional<Scenario> scenario;
  try {
    scenario = make_scenario(sc, base.seed);
  } catch (const Error& e) {
    for (Method m : methods) {
      TrialRecord r = base;
      r.method = m;
      r.offset_error = r.rotation_error = r.translation_error = kNaN;
      r.cost = r.rank_ratio = kNaN;
      r.status = TrialStatus::Degenerate;
      note(r, e.what());
      out.push_back(r);
    }
    return out;
  }

  for (Method m : methods) {
    TrialRecord r = base;
    r.method = m;
    try {
      switch (m) {
        case Method::Baseline: {
          const auto est = estimate_baseline(scenario->bearings, scenario->observer,
                                             scenario->observed, cfg.ito.solver);
          r = fill_errors(r, est, scenario->truth);
          r.iterations = est.solver_iterations;
          r.wall_time = est.wall_time;
          if (r.status != TrialStatus::Ok) note(r, to_string(est.solver_status));
          break;
        }
        case Method::Nto: {
          const auto est = estimate_nto(scenario->bearings, scenario->observer,
                                        scenario->observed, cfg.ito.solver);
          r = fill_errors(r, est, scenario->truth);
          r.iterations = est.solver_iterations;
          r.wall_time = est.wall_time;
          if (r.status != TrialStatus::Ok) note(r, to_string(est.solver_status));
          break;
        }
        case Method::Ito: {
          const auto res = estimate_ito(scenario->bearings, scenario->observer,
                                        scenario->observed, cfg.ito);
          r = fill_errors(r, res.final_estimate, scenario->truth);
          r.iterations = res.iterations;
          r.wall_time = res.wall_time;
          if (r.status != TrialStatus::Ok) {
            note(r, to_string(res.final_estimate.solver_status));
          } else if (!res.converged) {
            r.status = TrialStatus::NotConverged;
            note(r, "no convergence within " + std::to_string(cfg.ito.max_iterations) +
                        " iterations");
          }
          break;
        }
      }
    } catch (const Error& e) {
      r.offset_error = r.rotation_error = r.translation_error = kNaN;
      r.cost = r.rank_ratio = kNaN;
      r.status = classify(e.kind());
      note(r, e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TrialRecord> run_sweep(const ExperimentConfig& cfg, const std::vector<Method>& methods,
                                   std::vector<std::string>* failures) {
  validate(cfg);
  if (methods.empty()) throw Error(ErrorKind::InvalidConfig, "no methods selected");
  struct Job {
    double offset, sigma;
    int trial;
  };
  std::vector<Job> jobs;
  for (double o : cfg.offsets)
    for (double s : cfg.sigmas)
      for (int t = 0; t < cfg.trials; ++t) jobs.push_back({o, s, t});

  std::vector<std::vector<TrialRecord>> slots(jobs.size());
  std::vector<std::vector<std::string>> notes(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      slots[i] = run_trial(cfg, methods, jobs[i].offset, jobs[i].sigma, jobs[i].trial, &notes[i]);
    }
  };
  const int n = std::min<int>(cfg.workers, static_cast<int>(jobs.size()));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  }

  std::vector<TrialRecord> records;
  for (auto& s : slots) std::move(s.begin(), s.end(), std::back_inserter(records));
  if (failures) {
    for (auto& n : notes) std::move(n.begin(), n.end(), std::back_inserter(*failures));
  }
  std::sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
    return std::tie(a.true_offset, a.sigma, a.method, a.trial_id) <
           std::tie(b.true_offset, b.sigma, b.method, b.trial_id);
  });
  return records;
}

const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> cols = {
      "trial_id",   "seed",      "true_offset", "sigma",      "method",
      "offset_error", "rotation_error_deg", "translation_error_m", "cost", "rank_ratio",
      "iterations", "wall_time_s", "status",     "config_hash"};
  return cols;
}

void write_records_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
  const auto& cols = record_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : records) {
    os << r.trial_id << ',' << r.seed << ',' << fmt(r.true_offset) << ',' << fmt(r.sigma) << ','
       << to_string(r.method) << ',' << fmt(r.offset_error) << ',' << fmt(r.rotation_error) << ','
       << fmt(r.translation_error) << ',' << fmt(r.cost) << ',' << fmt(r.rank_ratio) << ','
       << r.iterations << ',' << fmt(r.wall_time) << ',' << to_string(r.status) << ','
       << r.config_hash << '\n';
  }
}

std::vector<TrialRecord> read_records_csv(std::istream& is) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line)) throw ParseError(1, "missing header row");
  const auto header = split_fields(line);
  if (header != record_columns()) throw ParseError(1, "unexpected records header");
  auto num = [](const std::string& s, std::size_t ln) {
    if (s == "nan") return kNaN;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError(ln, "bad number '" + s + "'");
    return v;
  };
  std::vector<TrialRecord> out;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != header.size()) throw ParseError(lineno, "wrong field count");
    TrialRecord r;
    try {
      r.trial_id = static_cast<int>(to_int("trial_id", f[0]));
      r.seed = to_u64("seed", f[1]);
      r.method = parse_method(f[4]);
      r.iterations = static_cast<int>(to_int("iterations", f[10]));
    } catch (const Error& e) {
      throw ParseError(lineno, e.what());
    }
    r.true_offset = num(f[2], lineno);
    r.sigma = num(f[3], lineno);
    r.offset_error = num(f[5], lineno);
    r.rotation_error = num(f[6], lineno);
    r.translation_error = num(f[7], lineno);
    r.cost = num(f[8], lineno);
    r.rank_ratio = num(f[9], lineno);
    r.wall_time = num(f[11], lineno);
    const std::string& st = f[12];
    if (st == "ok") r.status = TrialStatus::Ok;
    else if (st == "not_converged") r.status = TrialStatus::NotConverged;
    else if (st == "degenerate") r.status = TrialStatus::Degenerate;
    else if (st == "solver_failure") r.status = TrialStatus::SolverFailure;
    else throw ParseError(lineno, "unknown status '" + st + "'");
    r.config_hash = f[13];
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<CellSummary> aggregate(const std::vector<TrialRecord>& records) {
  using Key = std::tuple<double, double, Method>;
  std::map<Key, std::vector<const TrialRecord*>> cells;
  for (const auto& r : records) cells[{r.true_offset, r.sigma, r.method}].push_back(&r);
  std::vector<CellSummary> out;
  for (const auto& [key, rows] : cells) {
    CellSummary c;
    std::tie(c.true_offset, c.sigma, c.method) = key;
    c.total = static_cast<int>(rows.size());
    std::vector<double> off, rot, tr, rank, wall;
    for (const TrialRecord* r : rows) {
      if (r->status != TrialStatus::Ok) continue;
      ++c.ok;
      off.push_back(r->offset_error);
      rot.push_back(r->rotation_error);
      tr.push_back(r->translation_error);
      rank.push_back(r->rank_ratio);
      wall.push_back(r->wall_time);
    }
    c.mean_offset_error = mean(off);
    c.median_offset_error = median(off);
    c.mean_rotation_error = mean(rot);
    c.median_rotation_error = median(rot);
    c.mean_translation_error = mean(tr);
    c.median_translation_error = median(tr);
    c.median_rank_ratio = median(rank);
    c.mean_wall_time = mean(wall);
    out.push_back(c);
  }
  return out;
}

void write_summary_csv(std::ostream& os, const std::vector<CellSummary>& cells) {
  os << "true_offset,sigma,method,total,ok,mean_offset_error,median_offset_error,"
        "mean_rotation_error_deg,median_rotation_error_deg,mean_translation_error_m,"
        "median_translation_error_m,median_rank_ratio,mean_wall_time_s\n";
  for (const auto& c : cells) {
    os << fmt(c.true_offset) << ',' << fmt(c.sigma) << ',' << to_string(c.method) << ','
       << c.total << ',' << c.ok << ',' << fmt(c.mean_offset_error) << ','
       << fmt(c.median_offset_error) << ',' << fmt(c.mean_rotation_error) << ','
       << fmt(c.median_rotation_error) << ',' << fmt(c.mean_translation_error) << ','
       << fmt(c.median_translation_error) << ',' << fmt(c.median_rank_ratio) << ','
       << fmt(c.mean_wall_time) << '\n';
  }
}

SimulationFiles cmd_simulate(const ExperimentConfig& cfg) {
  const Scenario sc = make_scenario(cfg.scenario, cfg.seed);
  const auto dir = ensure_dir(cfg.out);
  SimulationFiles files{dir / "observer.csv", dir / "observed.csv", dir / "bearings.csv",
                        dir / "truth.json"};
  save_trajectory(files.observer, sc.observer);
  save_trajectory(files.observed, sc.observed);
  save_bearings(files.bearings, sc.bearings);
  auto os = open_out(files.truth);
  os << ground_truth_json(sc.truth, cfg.seed);
  return files;
}

std::string cmd_estimate(const ExperimentConfig& cfg, Method method,
                         const std::filesystem::path& observer,
                         const std::filesystem::path& observed,
                         const std::filesystem::path& bearings,
                         std::vector<std::string>* warnings) {
  const Trajectory a = load_trajectory(observer);
  const Trajectory b = load_trajectory(observed);
  const auto z = load_bearings(bearings, warnings);
  switch (method) {
    case Method::Baseline:
      return estimate_report_json(estimate_baseline(z, a, b, cfg.ito.solver), "baseline");
    case Method::Nto:
      return estimate_report_json(estimate_nto(z, a, b, cfg.ito.solver), "nto");
    case Method::Ito:
      return ito_report_json(estimate_ito(z, a, b, cfg.ito));
  }
  throw Error(ErrorKind::InvalidConfig, "unknown method");
}

SweepResult cmd_tolerance(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  if (c.sigmas.empty()) c.sigmas = {0.0};
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> failures;
  auto records = run_sweep(c, default_or(c, {Method::Nto, Method::Ito}), &failures);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return write_sweep(c, "tolerance", std::move(records), std::move(failures), elapsed);
}

SweepResult cmd_grid(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> failures;
  auto records =
      run_sweep(cfg, default_or(cfg, {Method::Baseline, Method::Nto, Method::Ito}), &failures);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return write_sweep(cfg, "grid", std::move(records), std::move(failures), elapsed);
}

}  // namespace bearsync
