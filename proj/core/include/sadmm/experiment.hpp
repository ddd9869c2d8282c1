#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "sadmm/metrics.hpp"
#include "sadmm/presets.hpp"
#include "sadmm/solvers.hpp"

namespace sadmm {

/// Which rate bound the mean curve is checked against.
enum class BoundKind { none, automatic, convex, strongly_convex, smooth, deterministic };

std::string to_string(BoundKind kind);
BoundKind parse_bound_kind(const std::string& text);

struct GridSpec {
  std::size_t lo = 1;
  std::optional<std::size_t> hi;  ///< defaults to t_max
  int points = 40;
};

struct ExperimentConfig {
  PresetParams preset;
  SolverConfig solver;
  std::size_t replications = 1;
  std::uint64_t seed = 0;
  int workers = 0;  ///< 0: available parallelism
  std::filesystem::path output_dir = "sadmm-out";
  bool record_all = false;  ///< every iteration in the per-replication CSV
  GridSpec t_grid;
  std::optional<std::pair<double, double>> fit_window;  ///< default [t_max/100, t_max]
  int fit_points = 20;
  std::optional<std::pair<double, double>> expect_slope;
  BoundKind bound = BoundKind::none;
  std::vector<double> omegas;
  std::optional<std::size_t> high_prob_t;  ///< defaults to t_max
  bool use_reference_cache = true;
};

/// Parses a JSON config; unknown keys and type errors name the field path.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Builds the preset and checks the solver settings against its constants.
void validate_config(const ExperimentConfig& cfg);

/// Iterations at which rows are recorded: the display grid plus the fit grid.
std::vector<std::size_t> recording_grid(const ExperimentConfig& cfg);

struct CheckOutcome {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ExperimentResult {
  Preset preset;
  ReferenceSolution reference;
  std::vector<RunResult> runs;  ///< indexed by replication
  std::vector<std::size_t> grid;
  Averaging averaging = Averaging::eq2_shifted;
  ExpectationCurve err;  ///< mean Err_rho under `averaging`
  std::optional<RateFit> fit;
  std::vector<HighProbResult> high_prob;
  std::vector<CheckOutcome> checks;
  double dyb = 0.0;

  bool pass() const;
};

/// Reference (cached in output_dir when allowed), R replications on the
/// worker pool, statistics and the enabled checks. Writes nothing.
ExperimentResult run_replications(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// trajectory_repNNNN.csv, aggregate.csv, report.json, invariants.log.
void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result);

/// run_replications + write_outputs; returns the process exit code.
int run_experiment(const ExperimentConfig& cfg, std::ostream& log);

/// Header of the per-replication CSV.
inline constexpr const char* kTrajectoryHeader =
    "k,eta,obj_gap_eq2,feas_eq2,err_rho_eq2,obj_gap_eq10,feas_eq10,err_rho_eq10,step_ms";

std::string format_double(double v);

// ---------------------------------------------------------------------------
// Reference cache
// ---------------------------------------------------------------------------

/// Text dump of u*, lambda*, theta* with an FNV-1a checksum of the body.
std::string serialize_reference(const ReferenceSolution& ref, const std::string& fingerprint);

/// nullopt when the fingerprint differs; throws on a corrupt file.
std::optional<ReferenceSolution> parse_reference(const std::string& text, const std::string& fingerprint);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace sadmm
