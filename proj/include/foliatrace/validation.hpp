#pragma once

#include "foliatrace/config.hpp"
#include "foliatrace/oracles.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace foliatrace {

oracle::RawModel raw_model(const ModelSpec& spec);
std::vector<oracle::RawTerm> raw_terms(const ExperimentConfig& config);

struct PeriodAgreement {
  int library_count = 0;
  int oracle_count = 0;
  int matched = 0;
  double max_dt = 0.0;
  double max_dw = 0.0;
  bool pass = false;
};

/// Positive-t components from the lattice enumeration against the (t, w)
/// grid oracle; every component must match one oracle solution in t and
/// |w| within tol, and the counts must agree.
PeriodAgreement compare_periods_with_grid(const ExperimentConfig& config, double tol = 1e-6);

struct TraceAgreement {
  int probes = 0;
  std::size_t lines = 0;
  int box = 0;
  double max_relative = 0.0;
  bool pass = false;
};

/// The evaluator at `cutoff` against the brute-force box sum on `count`
/// random wide probes (t0 in [0, t_max], s in [0, 60], width in [0.3, 0.8]).
TraceAgreement compare_trace_with_brute_force(const ExperimentConfig& config, double cutoff,
                                              int count, std::uint64_t seed, double tol = 1e-10);

struct EigenvalueAgreement {
  int samples = 0;
  double max_relative = 0.0;
  bool pass = false;
};

/// Spectrum eigenvalues against the plane-wave oracle on a sample of lines.
EigenvalueAgreement compare_eigenvalues(const ExperimentConfig& config, double cutoff, int count,
                                        std::uint64_t seed, double tol = 1e-12);

}  // namespace foliatrace
