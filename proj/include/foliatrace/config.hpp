#pragma once

#include "foliatrace/kernel.hpp"
#include "foliatrace/model.hpp"
#include "foliatrace/spectral.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace foliatrace {

inline constexpr int kConfigVersion = 1;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelSpec {
  int n = 2;
  int p = 1;
  /// p vectors of length n.
  std::vector<std::vector<double>> leaf_basis;
  /// n rows of length n.
  std::vector<std::vector<double>> metric;
  std::vector<double> drift;
  bool operator==(const ModelSpec&) const = default;
};

struct PhiCoefficient {
  std::vector<int> m;
  double re = 0.0;
  double im = 0.0;
  bool operator==(const PhiCoefficient&) const = default;
};

struct KernelTermSpec {
  std::vector<PhiCoefficient> phi;
  double support_radius = 1.0;
  bool operator==(const KernelTermSpec&) const = default;
};

struct ScanSpec {
  double width = 0.01;
  double frequency = 1000.0;
  double step_fraction = 0.25;
  double noise_multiplier = 10.0;
  bool operator==(const ScanSpec&) const = default;
};

struct LadderSpec {
  double width = 0.05;
  double s_min = 50.0;
  double s_max = 500.0;
  int count = 16;
  bool operator==(const LadderSpec&) const = default;
};

struct SpectralSpec {
  double cutoff = 1000.0;
  double leaf_tolerance = 1e-13;
  std::uint64_t max_lines = 20'000'000;
  ScanSpec scan;
  LadderSpec probe;
  /// Periods whose predicted |alpha_0| is below this fraction of the largest
  /// one are located but not probed.
  double probe_min_relative_alpha = 1e-3;
  /// Transverse covector d; when present the trace carries the conic cutoff
  /// chi(eta) = [eta . d > 0]. Only smooth for codimension 1.
  std::vector<double> conic_cutoff;
  bool operator==(const SpectralSpec&) const = default;
};

struct GeometrySpec {
  double t_max = 3.0;
  int samples = 5;
  bool operator==(const GeometrySpec&) const = default;
};

struct DecaySpec {
  int times = 10;
  LadderSpec ladder{0.02, 50.0, 500.0, 12};
  /// Random times keep this many probe widths away from every period and 0.
  double min_distance_widths = 5.0;
  bool operator==(const DecaySpec&) const = default;
};

struct Tolerances {
  double period = 2e-3;
  double exponent = 0.05;
  double phase_deg = 2.0;
  double amplitude = 0.05;
  double decay_slope = -5.0;
  bool operator==(const Tolerances&) const = default;
};

struct OutputSpec {
  std::string dir = "out";
  bool overwrite = false;
  bool operator==(const OutputSpec&) const = default;
};

struct ExperimentConfig {
  int version = kConfigVersion;
  std::string name = "experiment";
  ModelSpec model;
  std::vector<KernelTermSpec> kernel;
  SpectralSpec spectral;
  GeometrySpec geometry;
  DecaySpec decay;
  Tolerances tolerances;
  OutputSpec output;
  std::uint64_t seed = 1;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses a YAML document. Missing optional keys take the defaults above.
/// Throws ConfigError naming the offending key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// YAML text; doubles are written with 17 significant digits so that
/// parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// Throws ConfigError for invalid values; returns advisory warnings.
std::vector<std::string> validate_config(const ExperimentConfig& config);

FlatFoliatedModel make_model(const ModelSpec& spec);
GroupoidKernel make_kernel(const ExperimentConfig& config);
/// Empty function when no conic cutoff is configured.
DirectionWeight make_direction_weight(const ExperimentConfig& config, const FlatFoliatedModel& model);

}  // namespace foliatrace
