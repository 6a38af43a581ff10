#pragma once

#include "foliatrace/kernel.hpp"
#include "foliatrace/model.hpp"

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace foliatrace {

/// One eigenfunction e_m of P = sqrt(A).
struct SpectralLine {
  VecI m;
  double lambda = 0.0;
  /// Restriction of 2 pi m to V, in leaf coordinates.
  Vec leaf_freq;
  /// Restriction of 2 pi m to H, in transverse coordinates.
  Vec trans_freq;
};

/// Enumerated spectrum stored column-wise, lines in lexicographic order of m.
class Spectrum {
 public:
  std::size_t size() const { return static_cast<std::size_t>(eigenvalues_.size()); }
  SpectralLine line(std::size_t i) const;

  const Eigen::MatrixXi& lattice() const { return lattice_; }
  const Vec& eigenvalues() const { return eigenvalues_; }
  const Mat& leaf_frequencies() const { return leaf_freq_; }
  const Mat& transverse_frequencies() const { return trans_freq_; }
  double cutoff() const { return cutoff_; }
  double leaf_cutoff() const { return leaf_cutoff_; }

 private:
  friend Spectrum enumerate_spectrum(const FlatFoliatedModel&, double, double, std::size_t);
  Eigen::MatrixXi lattice_;
  Vec eigenvalues_;
  Mat leaf_freq_;
  Mat trans_freq_;
  double cutoff_ = 0.0;
  double leaf_cutoff_ = 0.0;
};

class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(std::size_t projected, std::size_t budget);
  std::size_t projected() const { return projected_; }

 private:
  std::size_t projected_;
};

/// Estimated number of lines with lambda <= cutoff and |leaf_freq| <= leaf_cutoff.
double projected_line_count(const FlatFoliatedModel& model, double cutoff, double leaf_cutoff);

/// All m in Z^n with lambda_m <= cutoff and |leaf_freq(m)| <= leaf_cutoff.
/// The leaf cutoff is required: along dense or closed leaves there are
/// infinitely many lines below any eigenvalue cutoff. Throws
/// BudgetExceeded when the projected count is above max_lines.
Spectrum enumerate_spectrum(const FlatFoliatedModel& model, double cutoff, double leaf_cutoff,
                            std::size_t max_lines = 20'000'000);

/// <R(k) e_m, e_m> = sum over terms of phi^(0) psi^(leaf_freq(m)).
cplx spectral_weight(const FlatFoliatedModel& model, const GroupoidKernel& kernel, const VecI& m);

/// f(t) = exp(-(t - center)^2 / (2 width^2)) exp(-i frequency t).
struct GaussianProbe {
  double center = 0.0;
  double width = 1.0;
  double frequency = 0.0;
};

/// int f(t) exp(i t lambda) dt, in closed form.
cplx probe_transform(const GaussianProbe& f, double lambda);

struct TraceValue {
  cplx value;
  /// Bound on the omitted lines (beyond the eigenvalue cutoff and the leaf cutoff).
  double truncation_bound = 0.0;
  /// Floating-point error estimate of the computed partial sum.
  double rounding_bound = 0.0;
  /// Gaussian tail beyond the eigenvalue cutoff alone.
  double cutoff_tail = 0.0;
  double tail_bound() const { return truncation_bound + rounding_bound; }
};

class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optional zeroth-order conic cutoff chi(eta / |eta|) on the transverse
/// unit sphere, inserted into the trace as chi(D_H / |D_H|). Lines with no
/// transverse frequency get weight 1.
using DirectionWeight = std::function<double(const Vec& unit_eta)>;

/// Binds a model, a kernel and an enumerated spectrum; caches the spectral
/// weights. Evaluation is single-threaded in the spectrum's fixed order.
class TraceEvaluator {
 public:
  TraceEvaluator(FlatFoliatedModel model, GroupoidKernel kernel, Spectrum spectrum,
                 const DirectionWeight& direction = {});

  const FlatFoliatedModel& model() const { return model_; }
  const GroupoidKernel& kernel() const { return kernel_; }
  const Spectrum& spectrum() const { return spectrum_; }
  const Eigen::VectorXcd& weights() const { return weights_; }

  /// Partial sum over the spectrum with error estimates; never throws.
  TraceValue evaluate(const GaussianProbe& f) const;
  /// Same for several centers sharing width and frequency. The Gaussian
  /// envelope in lambda is computed once.
  std::vector<TraceValue> evaluate_centers(double width, double frequency,
                                           const std::vector<double>& centers) const;

 private:
  double cutoff_tail(double width, double frequency) const;

  FlatFoliatedModel model_;
  GroupoidKernel kernel_;
  Spectrum spectrum_;
  Eigen::VectorXcd weights_;
  // Weighted line density just below the cutoff and its growth exponent.
  double edge_density_ = 0.0;
  int density_growth_ = 0;
  double leaf_tolerance_ = 0.0;
};

/// Leaf cutoff from the kernel at the given relative tolerance, then
/// enumeration at `cutoff`.
TraceEvaluator make_evaluator(const FlatFoliatedModel& model, const GroupoidKernel& kernel,
                              double cutoff, double leaf_tolerance = 1e-13,
                              std::size_t max_lines = 20'000'000,
                              const DirectionWeight& direction = {});

/// theta_k(f). Throws TruncationError when the tail beyond the eigenvalue
/// cutoff exceeds 1% of the partial sum.
TraceValue smoothed_trace(const TraceEvaluator& evaluator, const GaussianProbe& f);

struct ScanOptions {
  /// Grid step as a fraction of the probe width; must be <= 1/4.
  double step_fraction = 0.25;
  /// Peaks must exceed this multiple of the median grid value.
  double noise_multiplier = 10.0;
  /// Extra grid points evaluated beyond each end of the window so that
  /// maxima at the window edges are seen as interior maxima.
  int padding_steps = 4;
};

struct ScanPeak {
  double t = 0.0;
  double amplitude = 0.0;
};

struct ScanResult {
  std::vector<double> t;
  std::vector<double> amplitude;
  std::vector<ScanPeak> peaks;
  double noise_floor = 0.0;
  double width = 0.0;
  double frequency = 0.0;
};

/// |theta_k(f_{t,s,width})| on a uniform grid over [t_lo, t_hi] and the local
/// maxima above the noise floor, refined by a parabola through log|amp|.
ScanResult singularity_scan(const TraceEvaluator& evaluator, double t_lo, double t_hi,
                            double width, double frequency, const ScanOptions& options = {});

struct ProbeOptions {
  /// Fits whose weighted RMS residual (log amplitude or phase, radians)
  /// exceeds this are flagged as noisy.
  double residual_threshold = 0.05;
};

struct TraceProbeResult {
  double t0 = 0.0;
  double width = 0.0;
  std::vector<double> s_ladder;
  std::vector<cplx> amplitudes;
  std::vector<double> tail_bounds;
  /// Slope of log|alpha(s)| against log s over the top half of the ladder.
  double fitted_exponent = 0.0;
  double exponent_residual = 0.0;
  /// Nearest half-integer to fitted_exponent.
  double snapped_exponent = 0.0;
  /// Mean argument of alpha(s) over the top half of the ladder.
  double fitted_phase = 0.0;
  double phase_residual = 0.0;
  /// Mean of alpha(s) (2 pi / s)^snapped_exponent over the top half; equals
  /// i^{-snapped_exponent - sigma} alpha_0.
  cplx fitted_alpha0;
  bool noisy = false;
};

/// alpha(s) recovered from a probe at a singular time t0:
/// theta_k(f_{t0,s}) exp(i s t0) / (2 pi).
cplx demodulate(cplx amplitude, double t0, double s);

/// Probes theta_k along the ladder and fits the expansion
/// alpha(s) ~ (s / 2 pi i)^e i^{-sigma} alpha_0. Weighted least squares on
/// the top half of the ladder, weights proportional to s. Throws
/// std::invalid_argument if the ladder is not strictly increasing and
/// TruncationError if any probe is unresolved by the spectrum.
TraceProbeResult amplitude_probe(const TraceEvaluator& evaluator, double t0,
                                 const std::vector<double>& s_ladder, double width,
                                 const ProbeOptions& options = {});

/// Ordinary least-squares slope of log|amplitude| against log s over the
/// whole ladder.
double decay_slope(const TraceProbeResult& result);

/// count points spaced uniformly in log s over [lo, hi].
std::vector<double> log_ladder(double lo, double hi, int count);

void write_probe_csv(std::ostream& os, const TraceProbeResult& result, bool header = true);
void write_scan_csv(std::ostream& os, const ScanResult& result);

}  // namespace foliatrace
