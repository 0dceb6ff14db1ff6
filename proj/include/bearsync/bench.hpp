#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bearsync/estimator.hpp"
#include "bearsync/simulation.hpp"

namespace bearsync {

enum class Method { Baseline, Nto, Ito };
const char* to_string(Method m);
Method parse_method(const std::string& text);  // InvalidConfig on unknown names

struct ExperimentConfig {
  std::uint64_t seed = 1;
  ScenarioConfig scenario;       // true_offset / sigma are used by `simulate`
  std::vector<double> offsets;   // s
  std::vector<double> sigmas;
  int trials = 10;
  std::vector<Method> methods;   // empty: the command's default set
  ItoConfig ito;                 // ito.solver also drives baseline and NTO
  int workers = 1;
  std::string out = "bearsync_out";
};

// Applies one `key = value` setting. Grid values accept a comma list
// ("0,0.5,1") or an inclusive range "start:stop:step".
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
void apply_config_text(ExperimentConfig& cfg, std::istream& is);  // '#' starts a comment
void apply_config_file(ExperimentConfig& cfg, const std::filesystem::path& path);
void apply_preset(ExperimentConfig& cfg, const std::string& name);
std::vector<std::string> preset_names();

// Throws InvalidConfig when grids are empty, trials < 1, or a positive
// quantity is not positive.
void validate(const ExperimentConfig& cfg);

// Canonical `key = value` rendering; feeding it back through
// apply_config_text reproduces the configuration.
std::string canonical_config(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);  // 16 hex digits

std::vector<double> parse_grid(const std::string& text);

enum class TrialStatus { Ok, NotConverged, Degenerate, SolverFailure };
const char* to_string(TrialStatus s);

struct TrialRecord {
  int trial_id = 0;
  std::uint64_t seed = 0;
  double true_offset = 0.0;
  double sigma = 0.0;
  Method method = Method::Nto;
  double offset_error = 0.0;       // s
  double rotation_error = 0.0;     // deg
  double translation_error = 0.0;  // m
  double cost = 0.0;
  double rank_ratio = 0.0;
  int iterations = 0;              // ITO: outer iterations; otherwise IPM iterations
  double wall_time = 0.0;          // s
  TrialStatus status = TrialStatus::Ok;
  std::string config_hash;
};

// Scenario seed of a trial. All cells share the trajectories of trial i and
// differ only in offset and noise.
std::uint64_t trial_seed(const ExperimentConfig& cfg, int trial_id);

// Builds the scenario for (offset, sigma, seed) and runs every method on it.
// Estimation failures become records with a non-ok status; a one-line reason
// per failed record is appended to `failures` when given.
std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, const std::vector<Method>& methods,
                                   double offset, double sigma, int trial_id,
                                   std::vector<std::string>* failures = nullptr);

// Runs offsets x sigmas x trials on `cfg.workers` threads; output sorted by
// (offset, sigma, method, trial id).
std::vector<TrialRecord> run_sweep(const ExperimentConfig& cfg, const std::vector<Method>& methods,
                                   std::vector<std::string>* failures = nullptr);

void write_records_csv(std::ostream& os, const std::vector<TrialRecord>& records);
std::vector<TrialRecord> read_records_csv(std::istream& is);
const std::vector<std::string>& record_columns();

struct CellSummary {
  double true_offset = 0.0;
  double sigma = 0.0;
  Method method = Method::Nto;
  int total = 0;
  int ok = 0;
  double mean_offset_error = 0.0, median_offset_error = 0.0;
  double mean_rotation_error = 0.0, median_rotation_error = 0.0;
  double mean_translation_error = 0.0, median_translation_error = 0.0;
  double median_rank_ratio = 0.0;
  double mean_wall_time = 0.0;
};

// Pure reduction over a records table; statistics use ok rows only.
std::vector<CellSummary> aggregate(const std::vector<TrialRecord>& records);
void write_summary_csv(std::ostream& os, const std::vector<CellSummary>& cells);

struct SweepResult {
  std::vector<TrialRecord> records;
  std::vector<std::string> failures;
  std::filesystem::path records_path;
  std::filesystem::path manifest_path;
  std::filesystem::path summary_path;
};

struct SimulationFiles {
  std::filesystem::path observer;
  std::filesystem::path observed;
  std::filesystem::path bearings;
  std::filesystem::path truth;
};

// Writes observer/observed trajectories, bearings and a ground-truth sidecar
// into the directory `cfg.out`.
SimulationFiles cmd_simulate(const ExperimentConfig& cfg);

// Runs one method on files and returns the JSON report.
std::string cmd_estimate(const ExperimentConfig& cfg, Method method,
                         const std::filesystem::path& observer,
                         const std::filesystem::path& observed,
                         const std::filesystem::path& bearings,
                         std::vector<std::string>* warnings = nullptr);

// Zero-noise offset sweep with NTO and ITO (unless methods are configured).
SweepResult cmd_tolerance(const ExperimentConfig& cfg);
// Offset x noise sweep with baseline, NTO and ITO (unless methods are configured).
SweepResult cmd_grid(const ExperimentConfig& cfg);

}  // namespace bearsync
