#include "foliatrace/spectral.hpp"

#include <bit>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace foliatrace {

namespace {

constexpr double kUnitRoundoff = std::numeric_limits<double>::epsilon() / 2.0;
// Envelope values below this are not summed; their total is added to the
// rounding estimate instead.
constexpr double kNegligibleEnvelope = 1e-30;

double ball_volume(int dim, double radius) {
  return std::pow(kPi, 0.5 * dim) / std::tgamma(0.5 * dim + 1.0) * std::pow(radius, dim);
}

// |a_H| <= R with 1 + |a_H|^2 + c.a <= cutoff^2 and |c.a| <= |c|_g |a_H| < |a_H|.
double transverse_radius(double cutoff) {
  return 0.5 + std::sqrt(0.25 + std::max(0.0, cutoff * cutoff - 1.0));
}

}  // namespace

SpectralLine Spectrum::line(std::size_t i) const {
  const auto c = static_cast<Eigen::Index>(i);
  return {lattice_.col(c), eigenvalues_[c], leaf_freq_.col(c), trans_freq_.col(c)};
}

BudgetExceeded::BudgetExceeded(std::size_t projected, std::size_t budget)
    : std::runtime_error("spectrum enumeration would produce about " + std::to_string(projected) +
                         " lines, budget is " + std::to_string(budget)),
      projected_(projected) {}

double projected_line_count(const FlatFoliatedModel& model, double cutoff, double leaf_cutoff) {
  // Lattice 2 pi m has covolume (2 pi)^n / sqrt(det g) in frame coordinates.
  const double vol = ball_volume(model.q(), transverse_radius(cutoff)) *
                     ball_volume(model.p(), leaf_cutoff);
  return vol * model.volume() / std::pow(kTwoPi, model.n());
}

Spectrum enumerate_spectrum(const FlatFoliatedModel& model, double cutoff, double leaf_cutoff,
                            std::size_t max_lines) {
  if (!(cutoff > 1.0)) throw std::invalid_argument("spectral cutoff must exceed 1");
  if (!(leaf_cutoff > 0.0) || !std::isfinite(leaf_cutoff))
    throw std::invalid_argument("leaf frequency cutoff must be positive and finite");
  const double projected = projected_line_count(model, cutoff, leaf_cutoff);
  if (projected > static_cast<double>(max_lines))
    throw BudgetExceeded(static_cast<std::size_t>(projected), max_lines);

  const int n = model.n();
  const Mat& h = model.transverse_frame();
  const Mat& v = model.leaf_frame();
  const double rh = transverse_radius(cutoff);
  const Mat form = 4.0 * kPi * kPi *
                   (h * h.transpose() / (rh * rh) + v * v.transpose() / (leaf_cutoff * leaf_cutoff));
  const std::vector<int> candidates = lattice_points_in_ellipsoid(form, 2.0 * (1.0 + 1e-9));

  const std::size_t count = candidates.size() / static_cast<std::size_t>(n);
  std::vector<std::size_t> keep;
  Vec xi(n);
  for (std::size_t k = 0; k < count; ++k) {
    for (int i = 0; i < n; ++i) xi[i] = kTwoPi * candidates[k * n + static_cast<std::size_t>(i)];
    if (v.transpose().lazyProduct(xi).norm() > leaf_cutoff) continue;
    const double a = model.operator_symbol(xi);
    if (a > cutoff * cutoff) continue;
    keep.push_back(k);
  }
  if (keep.size() > max_lines) throw BudgetExceeded(keep.size(), max_lines);

  auto row = [&](std::size_t k) { return candidates.begin() + static_cast<std::ptrdiff_t>(k * n); };
  std::sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(row(a), row(a) + n, row(b), row(b) + n);
  });

  Spectrum s;
  const auto total = static_cast<Eigen::Index>(keep.size());
  s.lattice_.resize(n, total);
  s.eigenvalues_.resize(total);
  s.leaf_freq_.resize(model.p(), total);
  s.trans_freq_.resize(model.q(), total);
  for (Eigen::Index c = 0; c < total; ++c) {
    const std::size_t k = keep[static_cast<std::size_t>(c)];
    for (int i = 0; i < n; ++i) {
      s.lattice_(i, c) = candidates[k * n + static_cast<std::size_t>(i)];
      xi[i] = kTwoPi * s.lattice_(i, c);
    }
    s.eigenvalues_[c] = std::sqrt(model.operator_symbol(xi));
    s.leaf_freq_.col(c) = model.leaf_frequencies(xi);
    s.trans_freq_.col(c) = model.transverse_frequencies(xi);
  }
  s.cutoff_ = cutoff;
  s.leaf_cutoff_ = leaf_cutoff;
  return s;
}

cplx spectral_weight(const FlatFoliatedModel& model, const GroupoidKernel& kernel, const VecI& m) {
  const Vec xi = kTwoPi * m.cast<double>();
  const double k = model.leaf_frequencies(xi).norm();
  cplx w = 0.0;
  for (const auto& t : kernel.terms()) w += t.phi.mean() * t.psi.fourier(k);
  return w;
}

cplx probe_transform(const GaussianProbe& f, double lambda) {
  const double d = lambda - f.frequency;
  const double env = std::sqrt(kTwoPi) * f.width * std::exp(-0.5 * f.width * f.width * d * d);
  return env * std::polar(1.0, f.center * d);
}

TraceEvaluator::TraceEvaluator(FlatFoliatedModel model, GroupoidKernel kernel, Spectrum spectrum,
                               const DirectionWeight& direction)
    : model_(std::move(model)), kernel_(std::move(kernel)), spectrum_(std::move(spectrum)) {
  const auto total = static_cast<Eigen::Index>(spectrum_.size());
  weights_.resize(total);
  std::vector<std::unordered_map<std::uint64_t, double>> cache(kernel_.terms().size());
  for (Eigen::Index c = 0; c < total; ++c) {
    const double k = spectrum_.leaf_frequencies().col(c).norm();
    cplx w = 0.0;
    for (std::size_t j = 0; j < kernel_.terms().size(); ++j) {
      const auto key = std::bit_cast<std::uint64_t>(k);
      auto it = cache[j].find(key);
      if (it == cache[j].end()) it = cache[j].emplace(key, kernel_.terms()[j].psi.fourier(k)).first;
      w += kernel_.terms()[j].phi.mean() * it->second;
    }
    if (direction) {
      const auto eta = spectrum_.transverse_frequencies().col(c);
      const double len = eta.norm();
      if (len > 0.0) w *= direction(eta / len);
    }
    weights_[c] = w;
  }

  const double cutoff = spectrum_.cutoff();
  const int q = model_.q();
  double band = 0.0, all = 0.0;
  const double band_lo = 0.9 * cutoff;
  for (Eigen::Index c = 0; c < total; ++c) {
    const double a = std::abs(weights_[c]);
    all += a;
    if (spectrum_.eigenvalues()[c] >= band_lo) band += a;
  }
  // Weighted counting function grows like lambda^q.
  edge_density_ = std::max(band / (cutoff - band_lo), q * all / cutoff);
  density_growth_ = q - 1;
  leaf_tolerance_ = 0.0;
  if (!kernel_.empty() && spectrum_.leaf_cutoff() > 0.0) {
    for (const auto& t : kernel_.terms())
      leaf_tolerance_ = std::max(leaf_tolerance_, std::abs(t.psi.fourier(spectrum_.leaf_cutoff())));
  }
}

double TraceEvaluator::cutoff_tail(double width, double frequency) const {
  if (edge_density_ == 0.0) return 0.0;
  const double cutoff = spectrum_.cutoff();
  const int growth = density_growth_;
  auto integrand = [&](double lambda) {
    const double d = width * (lambda - frequency);
    return std::pow(lambda / cutoff, growth) * std::exp(-0.5 * d * d);
  };
  const double upper = std::max(cutoff, frequency) + 40.0 / width;
  const double integral =
      integrate_adaptive(integrand, cutoff, upper, 1e-6, 1e-300, 8).value;
  // Factor 2 covers the error of the density estimate.
  return 2.0 * edge_density_ * std::sqrt(kTwoPi) * width * integral;
}

std::vector<TraceValue> TraceEvaluator::evaluate_centers(double width, double frequency,
                                                         const std::vector<double>& centers) const {
  if (!(width > 0.0)) throw std::invalid_argument("probe width must be positive");
  const auto total = static_cast<Eigen::Index>(spectrum_.size());
  const Vec& lambda = spectrum_.eigenvalues();
  const double norm = std::sqrt(kTwoPi) * width;

  std::vector<Eigen::Index> active;
  std::vector<cplx> envelope;
  std::vector<double> offset;
  double skipped = 0.0;
  double envelope_abs = 0.0;
  for (Eigen::Index c = 0; c < total; ++c) {
    if (weights_[c] == 0.0) continue;
    const double d = lambda[c] - frequency;
    const double g = std::exp(-0.5 * width * width * d * d);
    if (g < kNegligibleEnvelope) {
      skipped += std::abs(weights_[c]) * norm * g;
      continue;
    }
    active.push_back(c);
    envelope.push_back(weights_[c] * (norm * g));
    offset.push_back(d);
    envelope_abs += std::abs(envelope.back());
  }

  const double tail = cutoff_tail(width, frequency);
  const double leaf_tail = leaf_tolerance_ * envelope_abs;
  std::vector<TraceValue> out;
  out.reserve(centers.size());
  for (double t0 : centers) {
    CompensatedSum<cplx> acc;
    double magnitude = 0.0;
    double phase_error = 0.0;
    for (std::size_t i = 0; i < active.size(); ++i) {
      const cplx term = envelope[i] * std::polar(1.0, t0 * offset[i]);
      acc.add(term);
      const double a = std::abs(envelope[i]);
      magnitude += a;
      const double lam = lambda[active[i]];
      phase_error += a * lam * (std::abs(t0) + width * width * std::abs(offset[i]));
    }
    TraceValue v;
    v.value = acc.value();
    v.cutoff_tail = tail;
    v.truncation_bound = tail + leaf_tail;
    v.rounding_bound = 16.0 * kUnitRoundoff * magnitude + 4.0 * kUnitRoundoff * phase_error + skipped;
    out.push_back(v);
  }
  return out;
}

TraceValue TraceEvaluator::evaluate(const GaussianProbe& f) const {
  return evaluate_centers(f.width, f.frequency, {f.center}).front();
}

TraceEvaluator make_evaluator(const FlatFoliatedModel& model, const GroupoidKernel& kernel,
                              double cutoff, double leaf_tolerance, std::size_t max_lines,
                              const DirectionWeight& direction) {
  const double k = kernel.empty() ? 1.0 : leaf_frequency_cutoff(kernel, leaf_tolerance);
  return TraceEvaluator(model, kernel, enumerate_spectrum(model, cutoff, k, max_lines), direction);
}

TraceValue smoothed_trace(const TraceEvaluator& evaluator, const GaussianProbe& f) {
  TraceValue v = evaluator.evaluate(f);
  if (v.cutoff_tail > 0.01 * std::abs(v.value)) {
    std::ostringstream os;
    os << "cutoff " << evaluator.spectrum().cutoff() << " too small for s = " << f.frequency
       << ", width = " << f.width << ": tail bound " << v.cutoff_tail << " vs |sum| "
       << std::abs(v.value);
    throw TruncationError(os.str());
  }
  return v;
}

ScanResult singularity_scan(const TraceEvaluator& evaluator, double t_lo, double t_hi,
                            double width, double frequency, const ScanOptions& options) {
  if (!(t_hi > t_lo)) throw std::invalid_argument("scan window must have t_hi > t_lo");
  if (!(options.step_fraction > 0.0) || options.step_fraction > 0.25)
    throw std::invalid_argument("scan grid too coarse: step must be at most width / 4");
  const int intervals = static_cast<int>(std::ceil((t_hi - t_lo) / (options.step_fraction * width)));
  const double step = (t_hi - t_lo) / intervals;
  const int pad = std::max(1, options.padding_steps);

  std::vector<double> grid;
  for (int i = -pad; i <= intervals + pad; ++i) grid.push_back(t_lo + i * step);
  const auto values = evaluator.evaluate_centers(width, frequency, grid);
  std::vector<double> amp(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) amp[i] = std::abs(values[i].value);

  ScanResult r;
  r.width = width;
  r.frequency = frequency;
  const auto first = static_cast<std::size_t>(pad);
  const auto last = first + static_cast<std::size_t>(intervals);
  r.t.assign(grid.begin() + static_cast<std::ptrdiff_t>(first),
             grid.begin() + static_cast<std::ptrdiff_t>(last + 1));
  r.amplitude.assign(amp.begin() + static_cast<std::ptrdiff_t>(first),
                     amp.begin() + static_cast<std::ptrdiff_t>(last + 1));

  const double peak = *std::max_element(amp.begin(), amp.end());
  if (values.front().cutoff_tail > 0.01 * peak && peak > 0.0) {
    std::ostringstream os;
    os << "cutoff " << evaluator.spectrum().cutoff() << " too small for scan frequency "
       << frequency;
    throw TruncationError(os.str());
  }

  std::vector<double> sorted = r.amplitude;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2),
                   sorted.end());
  r.noise_floor = options.noise_multiplier * sorted[sorted.size() / 2];

  for (std::size_t i = 1; i + 1 < amp.size(); ++i) {
    if (!(amp[i] > amp[i - 1] && amp[i] >= amp[i + 1])) continue;
    if (!(amp[i] > r.noise_floor) || amp[i] == 0.0) continue;
    double t = grid[i];
    double height = amp[i];
    if (amp[i - 1] > 0.0 && amp[i + 1] > 0.0) {
      const double l = std::log(amp[i - 1]), c = std::log(amp[i]), u = std::log(amp[i + 1]);
      const double curv = l - 2.0 * c + u;
      if (curv < 0.0) {
        const double shift = 0.5 * (l - u) / curv;
        t += shift * step;
        height = std::exp(c - 0.25 * (l - u) * shift);
      }
    }
    if (t < t_lo - 0.5 * step || t > t_hi + 0.5 * step) continue;
    r.peaks.push_back({t, height});
  }
  return r;
}

cplx demodulate(cplx amplitude, double t0, double s) {
  return amplitude * std::polar(1.0, s * t0) / kTwoPi;
}

TraceProbeResult amplitude_probe(const TraceEvaluator& evaluator, double t0,
                                 const std::vector<double>& s_ladder, double width,
                                 const ProbeOptions& options) {
  if (s_ladder.size() < 4) throw std::invalid_argument("probe ladder needs at least 4 frequencies");
  for (std::size_t i = 1; i < s_ladder.size(); ++i)
    if (!(s_ladder[i] > s_ladder[i - 1]))
      throw std::invalid_argument("probe ladder is not strictly increasing");
  if (!(s_ladder.front() > 0.0)) throw std::invalid_argument("probe frequencies must be positive");

  TraceProbeResult r;
  r.t0 = t0;
  r.width = width;
  r.s_ladder = s_ladder;
  for (double s : s_ladder) {
    const TraceValue v = smoothed_trace(evaluator, {t0, width, s});
    r.amplitudes.push_back(v.value);
    r.tail_bounds.push_back(v.tail_bound());
  }

  const std::size_t start = s_ladder.size() / 2;
  std::vector<double> x, y, w;
  std::vector<cplx> alpha;
  for (std::size_t i = start; i < s_ladder.size(); ++i) {
    const cplx a = demodulate(r.amplitudes[i], t0, s_ladder[i]);
    alpha.push_back(a);
    x.push_back(std::log(s_ladder[i]));
    y.push_back(std::log(std::max(std::abs(a), std::numeric_limits<double>::min())));
    w.push_back(s_ladder[i]);
  }
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  double xm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xm += w[i] * x[i];
    ym += w[i] * y[i];
  }
  xm /= wsum;
  ym /= wsum;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += w[i] * (x[i] - xm) * (y[i] - ym);
    sxx += w[i] * (x[i] - xm) * (x[i] - xm);
  }
  r.fitted_exponent = sxy / sxx;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double res = y[i] - ym - r.fitted_exponent * (x[i] - xm);
    rss += w[i] * res * res;
  }
  r.exponent_residual = std::sqrt(rss / wsum);
  r.snapped_exponent = std::round(2.0 * r.fitted_exponent) / 2.0;

  cplx direction = 0.0, alpha0 = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (std::abs(alpha[i]) > 0.0) direction += w[i] * alpha[i] / std::abs(alpha[i]);
    alpha0 += w[i] * alpha[i] * std::pow(kTwoPi / s_ladder[start + i], r.snapped_exponent);
  }
  r.fitted_phase = std::arg(direction);
  r.fitted_alpha0 = alpha0 / wsum;
  double pss = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double d = std::arg(alpha[i] * std::polar(1.0, -r.fitted_phase));
    pss += w[i] * d * d;
  }
  r.phase_residual = std::sqrt(pss / wsum);
  r.noisy = r.exponent_residual > options.residual_threshold ||
            r.phase_residual > options.residual_threshold;
  return r;
}

double decay_slope(const TraceProbeResult& result) {
  const std::size_t n = result.s_ladder.size();
  double xm = 0.0, ym = 0.0;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::log(result.s_ladder[i]);
    y[i] = std::log(std::max(std::abs(result.amplitudes[i]), std::numeric_limits<double>::min()));
    xm += x[i];
    ym += y[i];
  }
  xm /= static_cast<double>(n);
  ym /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - xm) * (y[i] - ym);
    sxx += (x[i] - xm) * (x[i] - xm);
  }
  return sxy / sxx;
}

std::vector<double> log_ladder(double lo, double hi, int count) {
  if (count < 2 || !(lo > 0.0) || !(hi > lo))
    throw std::invalid_argument("log ladder needs 0 < lo < hi and count >= 2");
  std::vector<double> s(static_cast<std::size_t>(count));
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < count; ++i) s[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (count - 1));
  s.front() = lo;
  s.back() = hi;
  return s;
}

void write_probe_csv(std::ostream& os, const TraceProbeResult& result, bool header) {
  if (header) os << "t0,s,Re(amp),Im(amp),tail_bound\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < result.s_ladder.size(); ++i)
    os << result.t0 << ',' << result.s_ladder[i] << ',' << result.amplitudes[i].real() << ','
       << result.amplitudes[i].imag() << ',' << result.tail_bounds[i] << '\n';
}

void write_scan_csv(std::ostream& os, const ScanResult& result) {
  os << "t,|amp|\n" << std::setprecision(17);
  for (std::size_t i = 0; i < result.t.size(); ++i)
    os << result.t[i] << ',' << result.amplitude[i] << '\n';
}

}  // namespace foliatrace
