#include "foliatrace/harness.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace foliatrace {

StageError::StageError(std::string stage, const std::string& detail)
    : std::runtime_error(stage + ": " + detail), stage_(std::move(stage)) {}

namespace {

template <typename F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

double wrap_angle(double a) {
  a = std::remainder(a, kTwoPi);
  return a <= -kPi ? a + kTwoPi : a;
}

double degrees(double rad) { return rad * 180.0 / kPi; }

cplx i_power(double k) { return std::polar(1.0, kPi * k / 2.0); }

}  // namespace

Prediction predict_periods(const FlatFoliatedModel& model, const GroupoidKernel& kernel,
                           double t_max, int samples, std::uint64_t seed,
                           const DirectionWeight& direction) {
  Prediction out;
  out.components = find_relative_periods(model, kernel, t_max);
  std::mt19937_64 rng(seed);
  for (RelativePeriodComponent& c : out.components) {
    const MaslovData md = maslov_index(model, c, samples, rng);
    c.maslov = md.sigma;
    c.density_mass = fixed_point_density(model, c).mass;
    c.alpha0 = leading_coefficient(model, kernel, c, direction);
    out.maslov.push_back({c.t, c.v, md.signature, md.kappa, md.sigma, md.samples, md.consistent,
                          md.marginal});
  }
  for (const RelativePeriodComponent& c : out.components) {
    if (c.t <= 0.0) continue;
    if (out.groups.empty() || std::abs(out.groups.back().t - c.t) > 1e-9 * std::max(1.0, c.t)) {
      PeriodGroup g;
      g.t = c.t;
      g.exponent = (c.dimension - model.p() - 1) / 2.0;
      g.sigma = c.maslov;
      out.groups.push_back(g);
    }
    PeriodGroup& g = out.groups.back();
    g.components.push_back(c);
    g.alpha += i_power(-c.maslov) * c.alpha0;
  }
  for (PeriodGroup& g : out.groups) g.phase = wrap_angle(std::arg(g.alpha) - kPi * g.exponent / 2.0);
  return out;
}

bool PeriodRow::pass() const { return period_pass && exponent_pass && phase_pass && amplitude_pass; }

ComparisonReport run_experiment(const ExperimentConfig& config) {
  ComparisonReport report;
  report.name = config.name;
  report.config = config;
  report.warnings = in_stage("config", [&] { return validate_config(config); });

  const FlatFoliatedModel model = in_stage("model", [&] { return make_model(config.model); });
  const GroupoidKernel kernel = in_stage("kernel", [&] { return make_kernel(config); });
  const DirectionWeight direction =
      in_stage("model", [&] { return make_direction_weight(config, model); });
  const Tolerances& tol = config.tolerances;
  const double t_max = config.geometry.t_max;

  if (kernel.empty()) {
    report.warnings.push_back("empty kernel: the trace vanishes identically");
    report.all_pass = true;
    return report;
  }

  auto geometry = std::async(std::launch::async, [&] {
    return in_stage("geometry", [&] {
      return predict_periods(model, kernel, t_max, config.geometry.samples, config.seed, direction);
    });
  });
  auto spectrum = std::async(std::launch::async, [&] {
    return in_stage("spectrum", [&] {
      return make_evaluator(model, kernel, config.spectral.cutoff, config.spectral.leaf_tolerance,
                            static_cast<std::size_t>(config.spectral.max_lines), direction);
    });
  });
  report.prediction = geometry.get();
  const TraceEvaluator evaluator = spectrum.get();
  report.spectral_lines = evaluator.spectrum().size();
  report.leaf_cutoff = evaluator.spectrum().leaf_cutoff();

  const ScanSpec& sc = config.spectral.scan;
  report.scan = in_stage("scan", [&] {
    ScanOptions opts;
    opts.step_fraction = sc.step_fraction;
    opts.noise_multiplier = sc.noise_multiplier;
    return singularity_scan(evaluator, 0.0, t_max, sc.width, sc.frequency, opts);
  });

  const auto& groups = report.prediction.groups;
  double alpha_max = 0.0;
  for (const PeriodGroup& g : groups) alpha_max = std::max(alpha_max, std::abs(g.alpha));

  const LadderSpec& lp = config.spectral.probe;
  const std::vector<double> ladder = log_ladder(lp.s_min, lp.s_max, lp.count);
  for (const PeriodGroup& g : groups) {
    PeriodRow row;
    row.t_predicted = g.t;
    row.components = static_cast<int>(g.components.size());
    row.exponent_predicted = g.exponent;
    row.sigma_predicted = g.sigma;
    row.phase_predicted_deg = degrees(g.phase);
    row.alpha_predicted = std::abs(g.alpha);
    const double expected_peak =
        kTwoPi * std::pow(sc.frequency / kTwoPi, g.exponent) * std::abs(g.alpha);
    row.expected_visible = expected_peak > report.scan.noise_floor;

    double best = std::numeric_limits<double>::infinity();
    for (const ScanPeak& pk : report.scan.peaks) {
      if (std::abs(pk.t - g.t) < std::abs(best)) best = pk.t - g.t;
    }
    row.detected = std::abs(best) <= tol.period;
    if (row.detected) {
      row.t_detected = g.t + best;
      row.dt = std::abs(best);
    }
    row.period_pass = row.detected || !row.expected_visible;

    row.probed = alpha_max > 0.0 &&
                 std::abs(g.alpha) >= config.spectral.probe_min_relative_alpha * alpha_max;
    row.exponent_pass = row.phase_pass = row.amplitude_pass = true;
    if (row.probed) {
      std::ostringstream stage;
      stage << "probe t=" << std::setprecision(10) << g.t;
      TraceProbeResult pr = in_stage(stage.str(), [&] {
        return amplitude_probe(evaluator, g.t, ladder, lp.width);
      });
      row.exponent_fitted = pr.fitted_exponent;
      row.exponent_residual = pr.exponent_residual;
      row.phase_fitted_deg = degrees(pr.fitted_phase);
      row.alpha_fitted = std::abs(pr.fitted_alpha0);
      row.ratio = row.alpha_fitted / row.alpha_predicted;
      row.noisy = pr.noisy;
      row.exponent_pass = std::abs(row.exponent_fitted - row.exponent_predicted) <= tol.exponent;
      row.phase_pass = std::abs(degrees(wrap_angle(pr.fitted_phase - g.phase))) <= tol.phase_deg;
      row.amplitude_pass = std::abs(row.ratio - 1.0) <= tol.amplitude;
      report.probes.push_back(std::move(pr));
    }
    report.periods_ok = report.periods_ok && row.pass();
    report.periods.push_back(row);
  }

  for (const ScanPeak& pk : report.scan.peaks) {
    bool near = std::abs(pk.t) <= tol.period;
    for (const PeriodGroup& g : groups) near = near || std::abs(pk.t - g.t) <= tol.period;
    if (!near) report.spurious.push_back(pk);
  }
  report.no_spurious_ok = report.spurious.empty();

  for (const MaslovRow& m : report.prediction.maslov) report.maslov_ok = report.maslov_ok && m.consistent;

  const DecaySpec& ds = config.decay;
  if (ds.times > 0) {
    const double gap = ds.min_distance_widths * ds.ladder.width;
    if (t_max <= 2.0 * gap) throw StageError("decay", "window too short for off-period times");
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unif(gap, t_max - gap);
    std::vector<double> times;
    int attempts = 0;
    while (static_cast<int>(times.size()) < ds.times) {
      if (++attempts > 100000) throw StageError("decay", "no off-period times found");
      const double t = unif(rng);
      bool clear = true;
      for (const RelativePeriodComponent& c : report.prediction.components)
        clear = clear && std::abs(t - std::abs(c.t)) >= gap;
      if (clear) times.push_back(t);
    }
    const std::vector<double> dl = log_ladder(ds.ladder.s_min, ds.ladder.s_max, ds.ladder.count);
    for (double t : times) {
      TraceProbeResult pr = in_stage("decay", [&] {
        return amplitude_probe(evaluator, t, dl, ds.ladder.width);
      });
      DecayRow row{t, decay_slope(pr), false};
      row.pass = row.slope < tol.decay_slope;
      report.decay_ok = report.decay_ok && row.pass;
      report.decay.push_back(row);
      report.decay_probes.push_back(std::move(pr));
    }
  }

  report.all_pass = report.periods_ok && report.maslov_ok && report.decay_ok && report.no_spurious_ok;
  return report;
}

void write_report(std::ostream& os, const ComparisonReport& r) {
  auto flag = [](bool b) { return b ? "pass" : "FAIL"; };
  os << std::setprecision(10);
  os << "name: " << r.name << '\n';
  os << "spectral_lines: " << r.spectral_lines << '\n';
  os << "leaf_cutoff: " << r.leaf_cutoff << '\n';
  os << "components: " << r.prediction.components.size() << '\n';
  os << "period_groups: " << r.prediction.groups.size() << '\n';
  os << "scan_peaks: " << r.scan.peaks.size() << '\n';
  os << "scan_noise_floor: " << r.scan.noise_floor << '\n';
  os << "periods: " << flag(r.periods_ok) << '\n';
  os << "maslov_consistent: " << flag(r.maslov_ok) << '\n';
  os << "decay_off_periods: " << flag(r.decay_ok) << '\n';
  os << "no_spurious_peaks: " << flag(r.no_spurious_ok) << '\n';
  os << "all_pass: " << (r.all_pass ? "true" : "false") << '\n';
  for (const std::string& w : r.warnings) os << "warning: " << w << '\n';
  for (const ScanPeak& pk : r.spurious) os << "spurious_peak: t=" << pk.t << " amp=" << pk.amplitude << '\n';
  for (const DecayRow& d : r.decay)
    os << "decay: t=" << d.t << " slope=" << d.slope << ' ' << flag(d.pass) << '\n';
  os << '\n';
  os << std::left << std::setw(14) << "t_pred" << std::setw(14) << "t_det" << std::setw(11) << "dt"
     << std::setw(6) << "comp" << std::setw(7) << "e_pred" << std::setw(11) << "e_fit"
     << std::setw(7) << "sigma" << std::setw(11) << "ph_pred" << std::setw(11) << "ph_fit"
     << std::setw(13) << "|a0|_pred" << std::setw(13) << "|a0|_fit" << std::setw(11) << "ratio"
     << "flags\n";
  os << std::setprecision(6);
  for (const PeriodRow& p : r.periods) {
    os << std::setw(14) << std::setprecision(10) << p.t_predicted << std::setw(14);
    if (p.detected)
      os << p.t_detected;
    else
      os << "-";
    os << std::setprecision(3) << std::setw(11) << p.dt << std::setw(6) << p.components
       << std::setw(7) << p.exponent_predicted << std::setw(11);
    if (p.probed)
      os << std::setprecision(4) << p.exponent_fitted;
    else
      os << "-";
    os << std::setw(7) << p.sigma_predicted << std::setprecision(5) << std::setw(11)
       << p.phase_predicted_deg << std::setw(11);
    if (p.probed)
      os << p.phase_fitted_deg;
    else
      os << "-";
    os << std::setw(13) << p.alpha_predicted << std::setw(13);
    if (p.probed)
      os << p.alpha_fitted << std::setw(11) << p.ratio;
    else
      os << "-" << std::setw(11) << "-";
    os << "period=" << flag(p.period_pass) << (p.expected_visible ? "" : "(below-noise)")
       << " exponent=" << flag(p.exponent_pass) << " phase=" << flag(p.phase_pass)
       << " amplitude=" << flag(p.amplitude_pass) << (p.noisy ? " noisy" : "") << '\n';
  }
}

void write_maslov_csv(std::ostream& os, const std::vector<MaslovRow>& rows) {
  os << "t,v,signature,kappa,sigma,samples,consistent,marginal\n" << std::setprecision(17);
  for (const MaslovRow& m : rows) {
    os << m.t << ',';
    for (Eigen::Index i = 0; i < m.v.size(); ++i) os << (i ? " " : "") << m.v[i];
    os << ',' << m.signature << ',' << m.kappa << ',' << m.sigma << ',' << m.samples << ','
       << (m.consistent ? 1 : 0) << ',' << (m.marginal ? 1 : 0) << '\n';
  }
}

void write_decay_csv(std::ostream& os, const std::vector<DecayRow>& rows) {
  os << "t,slope,pass\n" << std::setprecision(17);
  for (const DecayRow& d : rows) os << d.t << ',' << d.slope << ',' << (d.pass ? 1 : 0) << '\n';
}

void write_file(const std::filesystem::path& path, bool overwrite,
                const std::function<void(std::ostream&)>& writer) {
  if (!overwrite && std::filesystem::exists(path))
    throw std::runtime_error("refusing to overwrite existing file " + path.string());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + ": " + std::strerror(errno));
  writer(out);
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<std::filesystem::path> emit_outputs(const ComparisonReport& report,
                                                const std::filesystem::path& dir, bool overwrite) {
  using Writer = std::function<void(std::ostream&)>;
  const std::vector<std::pair<std::string, Writer>> files = {
      {"report.txt", [&](std::ostream& os) { write_report(os, report); }},
      {"periods.csv", [&](std::ostream& os) { write_periods_csv(os, report.prediction.components); }},
      {"maslov.csv", [&](std::ostream& os) { write_maslov_csv(os, report.prediction.maslov); }},
      {"scan.csv", [&](std::ostream& os) { write_scan_csv(os, report.scan); }},
      {"probe.csv",
       [&](std::ostream& os) {
         bool header = true;
         for (const TraceProbeResult& p : report.probes) {
           write_probe_csv(os, p, header);
           header = false;
         }
         if (header) write_probe_csv(os, TraceProbeResult{}, true);
       }},
      {"decay.csv", [&](std::ostream& os) { write_decay_csv(os, report.decay); }},
  };
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
  if (!overwrite) {
    for (const auto& [name, writer] : files)
      if (std::filesystem::exists(dir / name))
        throw std::runtime_error("refusing to overwrite existing file " + (dir / name).string());
  }
  std::vector<std::filesystem::path> written;
  for (const auto& [name, writer] : files) {
    write_file(dir / name, true, writer);
    written.push_back(dir / name);
  }
  return written;
}

}  // namespace foliatrace
