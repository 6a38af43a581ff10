#include "foliatrace/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace foliatrace {

namespace {

template <typename T>
T read(const YAML::Node& node, const std::string& key, const std::string& path, const T& fallback,
       bool required = false) {
  const YAML::Node child = node[key];
  if (!child) {
    if (required) throw ConfigError("missing required key '" + path + key + "'");
    return fallback;
  }
  try {
    return child.as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError("bad value for '" + path + key + "': " + e.what());
  }
}

void known_keys(const YAML::Node& node, const std::string& path, std::initializer_list<const char*> keys) {
  if (!node.IsMap()) throw ConfigError("'" + (path.empty() ? std::string("config") : path.substr(0, path.size() - 1)) +
                                       "' must be a mapping");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; }))
      throw ConfigError("unknown key '" + path + key + "'");
  }
}

LadderSpec read_ladder(const YAML::Node& node, const std::string& path, const LadderSpec& d) {
  if (!node) return d;
  known_keys(node, path, {"width", "s_min", "s_max", "count"});
  LadderSpec l;
  l.width = read(node, "width", path, d.width);
  l.s_min = read(node, "s_min", path, d.s_min);
  l.s_max = read(node, "s_max", path, d.s_max);
  l.count = read(node, "count", path, d.count);
  return l;
}

void emit_ladder(YAML::Emitter& out, const LadderSpec& l) {
  out << YAML::BeginMap << YAML::Key << "width" << YAML::Value << l.width << YAML::Key << "s_min"
      << YAML::Value << l.s_min << YAML::Key << "s_max" << YAML::Value << l.s_max << YAML::Key
      << "count" << YAML::Value << l.count << YAML::EndMap;
}

template <typename T>
void emit_flow_seq(YAML::Emitter& out, const std::vector<T>& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (const auto& x : v) out << x;
  out << YAML::EndSeq;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("config root must be a mapping");

  known_keys(root, "",
             {"version", "name", "seed", "model", "kernel", "spectral", "geometry", "decay", "tolerances", "output"});
  ExperimentConfig c;
  c.version = read(root, "version", "", 0, true);
  if (c.version != kConfigVersion)
    throw ConfigError("unsupported config version " + std::to_string(c.version));
  c.name = read(root, "name", "", c.name);
  c.seed = read(root, "seed", "", c.seed);

  const YAML::Node model = root["model"];
  if (!model) throw ConfigError("missing required key 'model'");
  known_keys(model, "model.", {"n", "p", "leaf_basis", "metric", "drift"});
  c.model.n = read(model, "n", "model.", 0, true);
  c.model.p = read(model, "p", "model.", 0, true);
  c.model.leaf_basis = read(model, "leaf_basis", "model.", std::vector<std::vector<double>>{}, true);
  c.model.metric = read(model, "metric", "model.", std::vector<std::vector<double>>{}, true);
  c.model.drift = read(model, "drift", "model.",
                       std::vector<double>(static_cast<std::size_t>(std::max(c.model.n, 0)), 0.0));

  const YAML::Node kernel = root["kernel"];
  if (kernel) {
    if (!kernel.IsSequence()) throw ConfigError("'kernel' must be a list of terms");
    for (std::size_t i = 0; i < kernel.size(); ++i) {
      const std::string path = "kernel[" + std::to_string(i) + "].";
      known_keys(kernel[i], path, {"support_radius", "phi"});
      KernelTermSpec term;
      term.support_radius = read(kernel[i], "support_radius", path, 0.0, true);
      const YAML::Node phi = kernel[i]["phi"];
      if (!phi || !phi.IsSequence()) throw ConfigError("missing required key '" + path + "phi'");
      for (std::size_t j = 0; j < phi.size(); ++j) {
        const std::string cpath = path + "phi[" + std::to_string(j) + "].";
        known_keys(phi[j], cpath, {"m", "re", "im"});
        PhiCoefficient coeff;
        coeff.m = read(phi[j], "m", cpath, std::vector<int>{}, true);
        coeff.re = read(phi[j], "re", cpath, 0.0);
        coeff.im = read(phi[j], "im", cpath, 0.0);
        term.phi.push_back(coeff);
      }
      c.kernel.push_back(term);
    }
  }

  if (const YAML::Node s = root["spectral"]) {
    known_keys(s, "spectral.",
               {"cutoff", "leaf_tolerance", "max_lines", "probe_min_relative_alpha", "conic_cutoff", "scan", "probe"});
    c.spectral.cutoff = read(s, "cutoff", "spectral.", c.spectral.cutoff);
    c.spectral.leaf_tolerance = read(s, "leaf_tolerance", "spectral.", c.spectral.leaf_tolerance);
    c.spectral.max_lines = read(s, "max_lines", "spectral.", c.spectral.max_lines);
    c.spectral.probe_min_relative_alpha =
        read(s, "probe_min_relative_alpha", "spectral.", c.spectral.probe_min_relative_alpha);
    c.spectral.conic_cutoff = read(s, "conic_cutoff", "spectral.", c.spectral.conic_cutoff);
    if (const YAML::Node scan = s["scan"]) {
      known_keys(scan, "spectral.scan.", {"width", "frequency", "step_fraction", "noise_multiplier"});
      c.spectral.scan.width = read(scan, "width", "spectral.scan.", c.spectral.scan.width);
      c.spectral.scan.frequency = read(scan, "frequency", "spectral.scan.", c.spectral.scan.frequency);
      c.spectral.scan.step_fraction =
          read(scan, "step_fraction", "spectral.scan.", c.spectral.scan.step_fraction);
      c.spectral.scan.noise_multiplier =
          read(scan, "noise_multiplier", "spectral.scan.", c.spectral.scan.noise_multiplier);
    }
    c.spectral.probe = read_ladder(s["probe"], "spectral.probe.", c.spectral.probe);
  }
  if (const YAML::Node g = root["geometry"]) {
    known_keys(g, "geometry.", {"t_max", "samples"});
    c.geometry.t_max = read(g, "t_max", "geometry.", c.geometry.t_max);
    c.geometry.samples = read(g, "samples", "geometry.", c.geometry.samples);
  }
  if (const YAML::Node d = root["decay"]) {
    known_keys(d, "decay.", {"times", "min_distance_widths", "ladder"});
    c.decay.times = read(d, "times", "decay.", c.decay.times);
    c.decay.min_distance_widths =
        read(d, "min_distance_widths", "decay.", c.decay.min_distance_widths);
    c.decay.ladder = read_ladder(d["ladder"], "decay.ladder.", c.decay.ladder);
  }
  if (const YAML::Node t = root["tolerances"]) {
    known_keys(t, "tolerances.", {"period", "exponent", "phase_deg", "amplitude", "decay_slope"});
    c.tolerances.period = read(t, "period", "tolerances.", c.tolerances.period);
    c.tolerances.exponent = read(t, "exponent", "tolerances.", c.tolerances.exponent);
    c.tolerances.phase_deg = read(t, "phase_deg", "tolerances.", c.tolerances.phase_deg);
    c.tolerances.amplitude = read(t, "amplitude", "tolerances.", c.tolerances.amplitude);
    c.tolerances.decay_slope = read(t, "decay_slope", "tolerances.", c.tolerances.decay_slope);
  }
  if (const YAML::Node o = root["output"]) {
    known_keys(o, "output.", {"dir", "overwrite"});
    c.output.dir = read(o, "dir", "output.", c.output.dir);
    c.output.overwrite = read(o, "overwrite", "output.", c.output.overwrite);
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string serialize_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "version" << YAML::Value << c.version;
  out << YAML::Key << "name" << YAML::Value << c.name;
  out << YAML::Key << "seed" << YAML::Value << c.seed;

  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "n" << YAML::Value << c.model.n;
  out << YAML::Key << "p" << YAML::Value << c.model.p;
  out << YAML::Key << "leaf_basis" << YAML::Value << YAML::BeginSeq;
  for (const auto& v : c.model.leaf_basis) emit_flow_seq(out, v);
  out << YAML::EndSeq;
  out << YAML::Key << "metric" << YAML::Value << YAML::BeginSeq;
  for (const auto& row : c.model.metric) emit_flow_seq(out, row);
  out << YAML::EndSeq;
  out << YAML::Key << "drift" << YAML::Value;
  emit_flow_seq(out, c.model.drift);
  out << YAML::EndMap;

  out << YAML::Key << "kernel" << YAML::Value << YAML::BeginSeq;
  for (const auto& term : c.kernel) {
    out << YAML::BeginMap << YAML::Key << "support_radius" << YAML::Value << term.support_radius;
    out << YAML::Key << "phi" << YAML::Value << YAML::BeginSeq;
    for (const auto& coeff : term.phi) {
      out << YAML::Flow << YAML::BeginMap << YAML::Key << "m" << YAML::Value;
      emit_flow_seq(out, coeff.m);
      out << YAML::Key << "re" << YAML::Value << coeff.re << YAML::Key << "im" << YAML::Value
          << coeff.im << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "spectral" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "cutoff" << YAML::Value << c.spectral.cutoff;
  out << YAML::Key << "leaf_tolerance" << YAML::Value << c.spectral.leaf_tolerance;
  out << YAML::Key << "max_lines" << YAML::Value << c.spectral.max_lines;
  out << YAML::Key << "probe_min_relative_alpha" << YAML::Value
      << c.spectral.probe_min_relative_alpha;
  if (!c.spectral.conic_cutoff.empty()) {
    out << YAML::Key << "conic_cutoff" << YAML::Value;
    emit_flow_seq(out, c.spectral.conic_cutoff);
  }
  out << YAML::Key << "scan" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "width" << YAML::Value << c.spectral.scan.width;
  out << YAML::Key << "frequency" << YAML::Value << c.spectral.scan.frequency;
  out << YAML::Key << "step_fraction" << YAML::Value << c.spectral.scan.step_fraction;
  out << YAML::Key << "noise_multiplier" << YAML::Value << c.spectral.scan.noise_multiplier;
  out << YAML::EndMap;
  out << YAML::Key << "probe" << YAML::Value;
  emit_ladder(out, c.spectral.probe);
  out << YAML::EndMap;

  out << YAML::Key << "geometry" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "t_max" << YAML::Value << c.geometry.t_max;
  out << YAML::Key << "samples" << YAML::Value << c.geometry.samples;
  out << YAML::EndMap;

  out << YAML::Key << "decay" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "times" << YAML::Value << c.decay.times;
  out << YAML::Key << "min_distance_widths" << YAML::Value << c.decay.min_distance_widths;
  out << YAML::Key << "ladder" << YAML::Value;
  emit_ladder(out, c.decay.ladder);
  out << YAML::EndMap;

  out << YAML::Key << "tolerances" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "period" << YAML::Value << c.tolerances.period;
  out << YAML::Key << "exponent" << YAML::Value << c.tolerances.exponent;
  out << YAML::Key << "phase_deg" << YAML::Value << c.tolerances.phase_deg;
  out << YAML::Key << "amplitude" << YAML::Value << c.tolerances.amplitude;
  out << YAML::Key << "decay_slope" << YAML::Value << c.tolerances.decay_slope;
  out << YAML::EndMap;

  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dir" << YAML::Value << c.output.dir;
  out << YAML::Key << "overwrite" << YAML::Value << c.output.overwrite;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> warnings;
  const auto& m = c.model;
  if (m.n < 2 || m.p < 1 || m.p >= m.n) throw ConfigError("model: need n >= 2 and 1 <= p < n");
  if (static_cast<int>(m.leaf_basis.size()) != m.p)
    throw ConfigError("model.leaf_basis must list p vectors");
  for (const auto& v : m.leaf_basis)
    if (static_cast<int>(v.size()) != m.n) throw ConfigError("model.leaf_basis vectors must have length n");
  if (static_cast<int>(m.metric.size()) != m.n) throw ConfigError("model.metric must have n rows");
  for (const auto& row : m.metric)
    if (static_cast<int>(row.size()) != m.n) throw ConfigError("model.metric rows must have length n");
  if (static_cast<int>(m.drift.size()) != m.n) throw ConfigError("model.drift must have length n");
  for (const auto& term : c.kernel) {
    if (!(term.support_radius > 0.0)) throw ConfigError("kernel support_radius must be positive");
    for (const auto& coeff : term.phi)
      if (static_cast<int>(coeff.m.size()) != m.n)
        throw ConfigError("kernel phi frequencies must have length n");
  }

  auto positive = [](double x, const char* what) {
    if (!(x > 0.0)) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(c.tolerances.period, "tolerances.period");
  positive(c.tolerances.exponent, "tolerances.exponent");
  positive(c.tolerances.phase_deg, "tolerances.phase_deg");
  positive(c.tolerances.amplitude, "tolerances.amplitude");
  if (!(c.tolerances.decay_slope < 0.0)) throw ConfigError("tolerances.decay_slope must be negative");
  positive(c.geometry.t_max, "geometry.t_max");
  positive(c.spectral.scan.width, "spectral.scan.width");
  positive(c.spectral.probe.width, "spectral.probe.width");
  positive(c.decay.ladder.width, "decay.ladder.width");
  if (!(c.spectral.cutoff > 1.0)) throw ConfigError("spectral.cutoff must exceed 1");
  if (c.spectral.scan.step_fraction > 0.25 || !(c.spectral.scan.step_fraction > 0.0))
    throw ConfigError("spectral.scan.step_fraction must be in (0, 0.25]");
  for (const LadderSpec* l : {&c.spectral.probe, &c.decay.ladder}) {
    if (!(l->s_min > 0.0) || !(l->s_max > l->s_min) || l->count < 4)
      throw ConfigError("probe ladders need 0 < s_min < s_max and count >= 4");
  }
  if (c.geometry.samples < 1) throw ConfigError("geometry.samples must be >= 1");
  if (c.decay.times < 0) throw ConfigError("decay.times must be >= 0");
  if (!c.spectral.conic_cutoff.empty()) {
    if (static_cast<int>(c.spectral.conic_cutoff.size()) != m.n)
      throw ConfigError("spectral.conic_cutoff must have length n");
    if (m.n - m.p != 1)
      throw ConfigError("spectral.conic_cutoff is only supported in codimension 1");
  }

  // A probe at frequency s with width e needs lines up to about s + 8 / e.
  const double need_scan = c.spectral.scan.frequency + 8.0 / c.spectral.scan.width;
  const double need_probe = c.spectral.probe.s_max + 8.0 / c.spectral.probe.width;
  const double need_decay = c.decay.times > 0 ? c.decay.ladder.s_max + 8.0 / c.decay.ladder.width : 0.0;
  if (c.spectral.cutoff < std::max({need_scan, need_probe, need_decay}))
    warnings.push_back("spectral.cutoff may be too small for the requested frequencies");
  return warnings;
}

FlatFoliatedModel make_model(const ModelSpec& spec) {
  Mat basis(spec.n, spec.p);
  for (int j = 0; j < spec.p; ++j)
    for (int i = 0; i < spec.n; ++i) basis(i, j) = spec.leaf_basis[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
  Mat g(spec.n, spec.n);
  for (int i = 0; i < spec.n; ++i)
    for (int j = 0; j < spec.n; ++j) g(i, j) = spec.metric[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  Vec c(spec.n);
  for (int i = 0; i < spec.n; ++i) c[i] = spec.drift[static_cast<std::size_t>(i)];
  return build_model(spec.n, spec.p, basis, g, c);
}

GroupoidKernel make_kernel(const ExperimentConfig& config) {
  std::vector<SeparableTerm> terms;
  for (const auto& t : config.kernel) {
    std::map<TrigPolynomial::Frequency, cplx> coeffs;
    for (const auto& c : t.phi) coeffs[c.m] += cplx(c.re, c.im);
    terms.push_back({TrigPolynomial(std::move(coeffs)), BumpProfile(config.model.p, t.support_radius)});
  }
  return GroupoidKernel(std::move(terms));
}

DirectionWeight make_direction_weight(const ExperimentConfig& config, const FlatFoliatedModel& model) {
  if (config.spectral.conic_cutoff.empty()) return {};
  Vec d(model.n());
  for (int i = 0; i < model.n(); ++i) d[i] = config.spectral.conic_cutoff[static_cast<std::size_t>(i)];
  const Vec dt = model.transverse_frequencies(d);
  if (!(dt.norm() > 0.0)) throw ConfigError("spectral.conic_cutoff has no transverse component");
  return [dt](const Vec& eta) { return eta.dot(dt) > 0.0 ? 1.0 : 0.0; };
}

}  // namespace foliatrace
