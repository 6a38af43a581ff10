#include "foliatrace/config.hpp"
#include "foliatrace/harness.hpp"
#include "foliatrace/validation.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>
#include <optional>

using namespace foliatrace;

namespace {

struct Common {
  std::string config_path;
  std::string out;
  std::optional<double> cutoff;
  std::optional<double> t_max;
  std::optional<std::uint64_t> seed;
  bool overwrite = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "experiment config (YAML)")->required();
  sub->add_option("--out", c.out, "output directory; stdout when omitted");
  sub->add_option("--cutoff", c.cutoff, "eigenvalue cutoff override");
  sub->add_option("--tmax", c.t_max, "scan window end override");
  sub->add_option("--seed", c.seed, "seed for sampled checks");
  sub->add_flag("--overwrite", c.overwrite, "replace existing output files");
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig config = load_config(c.config_path);
  if (c.cutoff) config.spectral.cutoff = *c.cutoff;
  if (c.t_max) config.geometry.t_max = *c.t_max;
  if (c.seed) config.seed = *c.seed;
  for (const std::string& w : validate_config(config)) std::cerr << "warning: " << w << '\n';
  return config;
}

void emit(const Common& c, const std::string& name, const std::function<void(std::ostream&)>& writer) {
  if (c.out.empty()) {
    writer(std::cout);
    return;
  }
  std::filesystem::create_directories(c.out);
  write_file(std::filesystem::path(c.out) / name, c.overwrite, writer);
}

TraceEvaluator evaluator_for(const ExperimentConfig& config) {
  const FlatFoliatedModel model = make_model(config.model);
  return make_evaluator(model, make_kernel(config), config.spectral.cutoff,
                       config.spectral.leaf_tolerance,
                       static_cast<std::size_t>(config.spectral.max_lines),
                       make_direction_weight(config, model));
}

Prediction predict(const ExperimentConfig& config) {
  const FlatFoliatedModel model = make_model(config.model);
  return predict_periods(model, make_kernel(config), config.geometry.t_max, config.geometry.samples,
                         config.seed, make_direction_weight(config, model));
}

int run_periods(const Common& c) {
  const ExperimentConfig config = load(c);
  const Prediction p = predict(config);
  emit(c, "periods.csv", [&](std::ostream& os) { write_periods_csv(os, p.components); });
  bool ok = true;
  for (const MaslovRow& m : p.maslov) ok = ok && m.consistent;
  return ok ? 0 : 1;
}

int run_maslov(const Common& c) {
  const ExperimentConfig config = load(c);
  const Prediction p = predict(config);
  emit(c, "maslov.csv", [&](std::ostream& os) { write_maslov_csv(os, p.maslov); });
  bool ok = true;
  for (const MaslovRow& m : p.maslov) ok = ok && m.consistent && !m.marginal;
  return ok ? 0 : 1;
}

int run_scan(const Common& c) {
  const ExperimentConfig config = load(c);
  const TraceEvaluator ev = evaluator_for(config);
  ScanOptions opts;
  opts.step_fraction = config.spectral.scan.step_fraction;
  opts.noise_multiplier = config.spectral.scan.noise_multiplier;
  const ScanResult scan = singularity_scan(ev, 0.0, config.geometry.t_max, config.spectral.scan.width,
                                           config.spectral.scan.frequency, opts);
  emit(c, "scan.csv", [&](std::ostream& os) { write_scan_csv(os, scan); });

  const Prediction p = predict(config);
  const double tol = config.tolerances.period;
  bool ok = true;
  std::cerr << std::setprecision(10);
  for (const ScanPeak& pk : scan.peaks) {
    bool near = std::abs(pk.t) <= tol;
    for (const PeriodGroup& g : p.groups) near = near || std::abs(pk.t - g.t) <= tol;
    std::cerr << "peak t=" << pk.t << " amp=" << pk.amplitude << (near ? "" : " (unpredicted)") << '\n';
    ok = ok && near;
  }
  for (const PeriodGroup& g : p.groups) {
    const double expected = kTwoPi * std::pow(config.spectral.scan.frequency / kTwoPi, g.exponent) *
                            std::abs(g.alpha);
    if (expected <= scan.noise_floor) continue;
    const bool found = std::any_of(scan.peaks.begin(), scan.peaks.end(),
                                   [&](const ScanPeak& pk) { return std::abs(pk.t - g.t) <= tol; });
    if (!found) std::cerr << "missed period t=" << g.t << '\n';
    ok = ok && found;
  }
  return ok ? 0 : 1;
}

int run_probe(const Common& c, double t0) {
  const ExperimentConfig config = load(c);
  const TraceEvaluator ev = evaluator_for(config);
  const LadderSpec& l = config.spectral.probe;
  const TraceProbeResult r = amplitude_probe(ev, t0, log_ladder(l.s_min, l.s_max, l.count), l.width);
  emit(c, "probe.csv", [&](std::ostream& os) { write_probe_csv(os, r); });
  std::cerr << std::setprecision(8) << "exponent " << r.fitted_exponent << " (residual "
            << r.exponent_residual << ")\nphase_deg " << r.fitted_phase * 180.0 / kPi
            << " (residual " << r.phase_residual << ")\n|alpha0| " << std::abs(r.fitted_alpha0)
            << (r.noisy ? "\nnoisy fit\n" : "\n");
  return r.noisy ? 1 : 0;
}

int run_compare(const Common& c) {
  const ExperimentConfig config = load(c);
  const ComparisonReport report = run_experiment(config);
  if (c.out.empty()) {
    write_report(std::cout, report);
  } else {
    for (const auto& path : emit_outputs(report, c.out, c.overwrite)) std::cerr << "wrote " << path.string() << '\n';
  }
  return report.all_pass ? 0 : 1;
}

int run_oracle(const Common& c) {
  const ExperimentConfig config = load(c);
  std::ostringstream os;
  os << std::setprecision(6);
  bool ok = true;

  const EigenvalueAgreement eig = compare_eigenvalues(config, config.spectral.cutoff, 200, config.seed);
  os << "eigenvalues: " << (eig.pass ? "pass" : "FAIL") << " samples=" << eig.samples
     << " max_rel=" << eig.max_relative << '\n';
  ok = ok && eig.pass;

  if (config.model.n - config.model.p == 1) {
    const PeriodAgreement per = compare_periods_with_grid(config);
    os << "periods_vs_grid: " << (per.pass ? "pass" : "FAIL") << " library=" << per.library_count
       << " oracle=" << per.oracle_count << " matched=" << per.matched << " max_dt=" << per.max_dt
       << " max_dw=" << per.max_dw << '\n';
    ok = ok && per.pass;
  } else {
    os << "periods_vs_grid: skipped (codimension " << config.model.n - config.model.p << ")\n";
  }

  if (config.model.p <= 2) {
    const TraceAgreement tr = compare_trace_with_brute_force(config, 200.0, 10, config.seed);
    os << "trace_vs_brute_force: " << (tr.pass ? "pass" : "FAIL") << " probes=" << tr.probes
       << " box=" << tr.box << " max_rel=" << tr.max_relative << '\n';
    ok = ok && tr.pass;
  } else {
    os << "trace_vs_brute_force: skipped (leaf dimension " << config.model.p << ")\n";
  }
  emit(c, "oracle.txt", [&](std::ostream& out) { out << os.str(); });
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Foliated wave-trace experiments on flat tori"};
  app.require_subcommand(1);
  Common common;
  double t0 = 0.0;

  auto* periods = app.add_subcommand("periods", "geometric period table");
  auto* scan = app.add_subcommand("scan", "spectral singularity scan");
  auto* probe = app.add_subcommand("probe", "amplitude ladder at one time");
  auto* maslov = app.add_subcommand("maslov", "Maslov index table");
  auto* compare = app.add_subcommand("compare", "full spectral/geometric comparison");
  auto* oracle = app.add_subcommand("oracle", "brute-force validation oracles");
  for (auto* sub : {periods, scan, probe, maslov, compare, oracle}) add_common(sub, common);
  probe->add_option("--t0", t0, "probe time")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*periods) return run_periods(common);
    if (*scan) return run_scan(common);
    if (*probe) return run_probe(common, t0);
    if (*maslov) return run_maslov(common);
    if (*compare) return run_compare(common);
    if (*oracle) return run_oracle(common);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
