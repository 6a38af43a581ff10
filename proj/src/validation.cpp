#include "foliatrace/validation.hpp"

#include "foliatrace/geometric.hpp"
#include "foliatrace/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace foliatrace {

oracle::RawModel raw_model(const ModelSpec& spec) {
  oracle::RawModel m;
  m.n = spec.n;
  m.p = spec.p;
  m.leaf_basis.resize(spec.n, spec.p);
  m.metric.resize(spec.n, spec.n);
  m.drift.resize(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.p; ++j) m.leaf_basis(i, j) = spec.leaf_basis[j][i];
    for (int j = 0; j < spec.n; ++j) m.metric(i, j) = spec.metric[i][j];
    m.drift[i] = spec.drift[i];
  }
  return m;
}

std::vector<oracle::RawTerm> raw_terms(const ExperimentConfig& config) {
  std::vector<oracle::RawTerm> out;
  for (const KernelTermSpec& t : config.kernel) {
    cplx mean = 0.0;
    for (const PhiCoefficient& c : t.phi)
      if (std::all_of(c.m.begin(), c.m.end(), [](int k) { return k == 0; })) mean += cplx(c.re, c.im);
    out.push_back({mean, t.support_radius});
  }
  return out;
}

PeriodAgreement compare_periods_with_grid(const ExperimentConfig& config, double tol) {
  const FlatFoliatedModel model = make_model(config.model);
  const GroupoidKernel kernel = make_kernel(config);
  const double t_max = config.geometry.t_max;
  std::vector<RelativePeriodComponent> lib;
  for (const auto& c : find_relative_periods(model, kernel, t_max))
    if (c.t > 0.0) lib.push_back(c);
  const std::vector<oracle::GridPeriod> grid =
      oracle::grid_periods(raw_model(config.model), kernel.support_radius(), t_max);

  PeriodAgreement a;
  a.library_count = static_cast<int>(lib.size());
  a.oracle_count = static_cast<int>(grid.size());
  std::vector<bool> used(grid.size(), false);
  for (const auto& c : lib) {
    int best = -1;
    double best_err = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (used[k]) continue;
      const double err = std::max(std::abs(grid[k].t - c.t), std::abs(grid[k].w_length - c.shift_length));
      if (best < 0 || err < best_err) {
        best = static_cast<int>(k);
        best_err = err;
      }
    }
    if (best < 0 || best_err > tol) continue;
    used[static_cast<std::size_t>(best)] = true;
    ++a.matched;
    a.max_dt = std::max(a.max_dt, std::abs(grid[best].t - c.t));
    a.max_dw = std::max(a.max_dw, std::abs(grid[best].w_length - c.shift_length));
  }
  a.pass = a.matched == a.library_count && a.library_count == a.oracle_count && a.library_count > 0;
  return a;
}

TraceAgreement compare_trace_with_brute_force(const ExperimentConfig& config, double cutoff,
                                              int count, std::uint64_t seed, double tol) {
  const FlatFoliatedModel model = make_model(config.model);
  const GroupoidKernel kernel = make_kernel(config);
  const TraceEvaluator ev = make_evaluator(model, kernel, cutoff, config.spectral.leaf_tolerance);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<oracle::ProbePoint> probes;
  for (int k = 0; k < count; ++k) {
    oracle::ProbePoint f;
    f.t0 = config.geometry.t_max * unif(rng);
    f.s = 60.0 * unif(rng);
    f.width = 0.3 + 0.5 * unif(rng);
    probes.push_back(f);
  }

  const oracle::RawModel raw = raw_model(config.model);
  const double gmax = Eigen::SelfAdjointEigenSolver<Mat>(raw.metric).eigenvalues().maxCoeff();
  const double k_leaf = ev.spectrum().leaf_cutoff();
  TraceAgreement a;
  a.box = static_cast<int>(std::ceil(std::sqrt(gmax * (cutoff * cutoff + k_leaf * k_leaf)) / kTwoPi)) + 1;
  a.lines = ev.spectrum().size();
  a.probes = count;
  const std::vector<cplx> brute = oracle::brute_force_traces(raw, raw_terms(config), a.box, probes);
  for (int k = 0; k < count; ++k) {
    const GaussianProbe f{probes[k].t0, probes[k].width, probes[k].s};
    const cplx lib = ev.evaluate(f).value;
    a.max_relative = std::max(a.max_relative, std::abs(lib - brute[k]) / std::abs(brute[k]));
  }
  a.pass = a.max_relative <= tol;
  return a;
}

EigenvalueAgreement compare_eigenvalues(const ExperimentConfig& config, double cutoff, int count,
                                        std::uint64_t seed, double tol) {
  const FlatFoliatedModel model = make_model(config.model);
  const GroupoidKernel kernel = make_kernel(config);
  const double k_leaf = leaf_frequency_cutoff(kernel, config.spectral.leaf_tolerance);
  const Spectrum spectrum = enumerate_spectrum(model, cutoff, k_leaf);
  const oracle::RawModel raw = raw_model(config.model);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, spectrum.size() - 1);
  EigenvalueAgreement a;
  for (int k = 0; k < count && spectrum.size() > 0; ++k) {
    const SpectralLine line = spectrum.line(pick(rng));
    const double ref = oracle::plane_wave_eigenvalue(raw, line.m);
    a.max_relative = std::max(a.max_relative, std::abs(line.lambda - ref) / ref);
    ++a.samples;
  }
  a.pass = a.samples > 0 && a.max_relative <= tol;
  return a;
}

}  // namespace foliatrace
