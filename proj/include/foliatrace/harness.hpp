#pragma once

#include "foliatrace/config.hpp"
#include "foliatrace/geometric.hpp"
#include "foliatrace/maslov.hpp"
#include "foliatrace/spectral.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace foliatrace {

/// A module failure inside run_experiment, tagged with the stage that failed.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& detail);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Geometric side of one positive relative period: all components sharing t.
struct PeriodGroup {
  double t = 0.0;
  std::vector<RelativePeriodComponent> components;
  /// (d_j - p - 1) / 2.
  double exponent = 0.0;
  int sigma = 0;
  /// sum over components of i^{-sigma_j} alpha_{j,0}.
  cplx alpha;
  /// Predicted argument of alpha(s) = (s/2pi)^e i^{-e} alpha, radians.
  double phase = 0.0;
};

struct MaslovRow {
  double t = 0.0;
  VecI v;
  int signature = 0;
  int kappa = 0;
  int sigma = 0;
  int samples = 0;
  bool consistent = true;
  bool marginal = false;
};

struct Prediction {
  /// All components with 0 < |t| <= t_max, with maslov, alpha0 and
  /// density_mass filled in.
  std::vector<RelativePeriodComponent> components;
  std::vector<PeriodGroup> groups;
  std::vector<MaslovRow> maslov;
};

/// Geometric prediction: periods, Maslov indices, densities and leading
/// coefficients. `seed` drives the sampled Maslov checks.
Prediction predict_periods(const FlatFoliatedModel& model, const GroupoidKernel& kernel,
                           double t_max, int samples, std::uint64_t seed,
                           const DirectionWeight& direction = {});

struct PeriodRow {
  double t_predicted = 0.0;
  double t_detected = 0.0;
  double dt = 0.0;
  int components = 0;
  double exponent_predicted = 0.0;
  double exponent_fitted = 0.0;
  double exponent_residual = 0.0;
  int sigma_predicted = 0;
  double phase_predicted_deg = 0.0;
  double phase_fitted_deg = 0.0;
  double alpha_predicted = 0.0;
  double alpha_fitted = 0.0;
  double ratio = 0.0;
  /// Expected scan peak height is above the scan noise floor.
  bool expected_visible = false;
  bool detected = false;
  bool probed = false;
  bool noisy = false;
  bool period_pass = false;
  bool exponent_pass = false;
  bool phase_pass = false;
  bool amplitude_pass = false;
  bool pass() const;
};

struct DecayRow {
  double t = 0.0;
  double slope = 0.0;
  bool pass = false;
};

struct ComparisonReport {
  std::string name;
  ExperimentConfig config;
  std::size_t spectral_lines = 0;
  double leaf_cutoff = 0.0;
  Prediction prediction;
  ScanResult scan;
  std::vector<TraceProbeResult> probes;
  std::vector<PeriodRow> periods;
  /// Scan peaks further than the period tolerance from every prediction and 0.
  std::vector<ScanPeak> spurious;
  std::vector<DecayRow> decay;
  std::vector<TraceProbeResult> decay_probes;
  bool periods_ok = true;
  bool maslov_ok = true;
  bool decay_ok = true;
  bool no_spurious_ok = true;
  bool all_pass = false;
  std::vector<std::string> warnings;
};

/// Builds the model and kernel, predicts the periods, scans [0, t_max],
/// probes every visible period at its predicted time, and probes the
/// decay at random off-period times. Deterministic given the config.
/// Throws StageError naming the failing stage.
ComparisonReport run_experiment(const ExperimentConfig& config);

/// Key/value header followed by the period table.
void write_report(std::ostream& os, const ComparisonReport& report);
void write_maslov_csv(std::ostream& os, const std::vector<MaslovRow>& rows);
void write_decay_csv(std::ostream& os, const std::vector<DecayRow>& rows);

/// Writes report.txt, periods.csv, maslov.csv, scan.csv, probe.csv and
/// decay.csv into `dir`, creating it if needed. Refuses (std::runtime_error)
/// if any of the files exists and overwrite is false. Returns the paths written.
std::vector<std::filesystem::path> emit_outputs(const ComparisonReport& report,
                                                const std::filesystem::path& dir, bool overwrite);

/// Writes one file through `writer`, with the same overwrite rule and path
/// context in errors.
void write_file(const std::filesystem::path& path, bool overwrite,
                const std::function<void(std::ostream&)>& writer);

}  // namespace foliatrace
