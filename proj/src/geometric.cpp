#include "foliatrace/geometric.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

namespace foliatrace {

namespace {

Vec symbol_gradient(const FlatFoliatedModel& model, const Vec& xi) {
  const Vec gxi = model.dual_metric() * xi;
  return gxi / std::sqrt(xi.dot(gxi));
}

}  // namespace

ConormalVector flow(const FlatFoliatedModel& model, const ConormalVector& nu, double t,
                    Integrator integrator) {
  if (!(nu.xi().norm() > 0.0)) throw std::invalid_argument("flow: xi = 0");
  if (integrator.kind == Integrator::Kind::Exact)
    return make_conormal_unchecked(nu.x() + t * symbol_gradient(model, nu.xi()), nu.xi());

  if (!(integrator.step > 0.0)) throw std::invalid_argument("flow: RK4 step must be positive");
  const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(t) / integrator.step)));
  const double h = t / steps;
  // Hamilton's equations for z = (x, xi); p does not depend on x, so the
  // xi-component of the vector field vanishes.
  const int n = model.n();
  auto rhs = [&](const Vec& z) {
    Vec dz = Vec::Zero(2 * n);
    dz.head(n) = symbol_gradient(model, z.tail(n));
    return dz;
  };
  Vec z(2 * n);
  z << nu.x(), nu.xi();
  for (int k = 0; k < steps; ++k) {
    const Vec k1 = rhs(z);
    const Vec k2 = rhs(z + 0.5 * h * k1);
    const Vec k3 = rhs(z + 0.5 * h * k2);
    const Vec k4 = rhs(z + h * k3);
    z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  const Vec x = z.head(n);
  const Vec xi = z.tail(n);
  return make_conormal_unchecked(x, xi);
}

FlowState advance(const FlatFoliatedModel& model, const FlowState& state, double dt,
                  Integrator integrator) {
  return {flow(model, state.nu, dt, integrator), state.t + dt};
}

Mat transverse_hessian(const Vec& eta) {
  const double r = eta.norm();
  const Vec u = eta / r;
  return (Mat::Identity(eta.size(), eta.size()) - u * u.transpose()) / r;
}

std::vector<RelativePeriodComponent> find_relative_periods(const FlatFoliatedModel& model,
                                                           const GroupoidKernel& kernel,
                                                           double t_max) {
  std::vector<RelativePeriodComponent> out;
  const double s = kernel.support_radius();
  if (!(t_max > 0.0) || !(s > 0.0)) return out;

  const int n = model.n();
  const Mat& g = model.metric();
  const Mat& h = model.transverse_frame();
  const Mat& v = model.leaf_frame();
  // Vector v has transverse coordinates H^T g v and leaf coordinates V^T g v.
  const Mat th = h.transpose() * g;
  const Mat tv = v.transpose() * g;
  const Mat form = th.transpose() * th / (t_max * t_max) + tv.transpose() * tv / (s * s);
  const std::vector<int> points = lattice_points_in_ellipsoid(form, 2.0 * (1.0 + 1e-9));

  std::vector<VecI> lattice;
  for (std::size_t k = 0; k * n < points.size(); ++k) {
    VecI m(n);
    for (int i = 0; i < n; ++i) m[i] = points[k * n + static_cast<std::size_t>(i)];
    lattice.push_back(m);
  }
  for (const VecI& m : lattice) {
    const Vec vd = m.cast<double>();
    const Vec a_h = th * vd;
    const double len = a_h.norm();
    const Vec w = model.leaf_projector() * vd;
    const double wl = (tv * vd).norm();
    if (!(len > 1e-12) || len > t_max || !(wl < s)) continue;
    for (int sign : {1, -1}) {
      RelativePeriodComponent c;
      c.t = sign * len;
      c.v = m;
      c.direction = sign * model.conormal_from_transverse(a_h / len);
      c.shift = w;
      c.shift_length = wl;
      c.dimension = n;
      out.push_back(c);
    }
  }
  std::sort(out.begin(), out.end(), [](const RelativePeriodComponent& a, const RelativePeriodComponent& b) {
    if (std::abs(a.t) != std::abs(b.t)) return std::abs(a.t) < std::abs(b.t);
    if ((a.t > 0) != (b.t > 0)) return a.t > 0;
    return std::lexicographical_compare(a.v.data(), a.v.data() + a.v.size(), b.v.data(),
                                        b.v.data() + b.v.size());
  });
  return out;
}

RelativePeriodComponent diagonal_component(const FlatFoliatedModel& model, const Vec& direction) {
  RelativePeriodComponent c;
  c.v = VecI::Zero(model.n());
  const ConormalVector nu = make_conormal(model, Vec::Zero(model.n()), direction);
  c.direction = direction / transverse_symbol(model, nu);
  c.shift = Vec::Zero(model.n());
  c.dimension = model.n();
  return c;
}

double fixed_point_residual(const FlatFoliatedModel& model, const RelativePeriodComponent& c,
                            const ConormalVector& nu) {
  const HolonomyElement gamma = make_holonomy(model, nu.x(), c.shift);
  const ConormalVector moved = flow(model, holonomy_transport(model, gamma, nu), -c.t);
  const double scale = std::max(1.0, nu.xi().norm());
  return torus_distance(moved.x(), nu.x()) + (moved.xi() - nu.xi()).norm() / scale;
}

SaturationReport saturation_check(const FlatFoliatedModel& model,
                                  const RelativePeriodComponent& component, int sample_count,
                                  std::mt19937_64& rng, const ConormalSet& membership) {
  const ConormalSet in_set = membership ? membership : [&](const ConormalVector& nu) {
    const double dir = (nu.xi() / transverse_symbol(model, nu) - component.direction).norm();
    return dir < 1e-10 && fixed_point_residual(model, component, nu) < 1e-10;
  };
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SaturationReport r;
  for (int k = 0; k < sample_count; ++k) {
    ConormalVector nu;
    bool found = false;
    for (int tries = 0; tries < 1000 && !found; ++tries) {
      Vec x(model.n());
      for (int i = 0; i < model.n(); ++i) x[i] = unif(rng);
      nu = make_conormal_unchecked(x, component.direction * (0.5 + unif(rng)));
      found = in_set(nu);
    }
    if (!found) {
      r.saturated = false;
      break;
    }
    Vec u(model.p());
    for (int i = 0; i < model.p(); ++i) u[i] = gauss(rng);
    const Vec shift = model.leaf_frame() * u;
    const ConormalVector moved =
        holonomy_transport(model, make_holonomy(model, nu.x(), shift), nu);
    // Conjugated witness gamma_1^{-1} gamma gamma_1 has the same shift.
    const double res = fixed_point_residual(model, component, moved);
    r.max_residual = std::max(r.max_residual, res);
    ++r.samples;
    if (!in_set(moved) || res > 1e-10) r.saturated = false;
  }
  return r;
}

Mat linearized_return_map(const FlatFoliatedModel& model, const RelativePeriodComponent& c) {
  const int q = model.q();
  const Vec eta = model.transverse_frequencies(c.direction);
  Mat m = Mat::Identity(2 * q, 2 * q);
  m.topRightCorner(q, q) = c.t * transverse_hessian(eta);
  return m;
}

Mat fixed_subspace(const Mat& map, double threshold) {
  const Mat d = Mat::Identity(map.rows(), map.cols()) - map;
  Eigen::JacobiSVD<Mat> svd(d, Eigen::ComputeFullV);
  const Vec& sv = svd.singularValues();
  const double scale = std::max(1.0, sv.size() ? sv[0] : 0.0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > threshold * scale) ++rank;
  return svd.matrixV().rightCols(map.cols() - rank);
}

CleannessReport cleanness_check(const FlatFoliatedModel& model,
                                const RelativePeriodComponent& component, int sample_count,
                                std::mt19937_64& rng, double threshold) {
  CleannessReport r;
  const int q = model.q();
  r.dim_expected = q + 1;
  if (component.t == 0.0) {
    r.failure = "t = 0 component is handled separately";
    return r;
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  r.clean = true;
  const Vec eta = model.transverse_frequencies(component.direction);
  // Tangent of the component: every dy, and deta along eta.
  Mat tangent = Mat::Zero(2 * q, q + 1);
  tangent.topLeftCorner(q, q) = Mat::Identity(q, q);
  tangent.block(q, q, q, 1) = eta.normalized();
  for (int k = 0; k < std::max(1, sample_count); ++k) {
    Vec x(model.n());
    for (int i = 0; i < model.n(); ++i) x[i] = unif(rng);
    const ConormalVector nu = make_conormal_unchecked(x, component.direction);
    const double res = fixed_point_residual(model, component, nu);
    const Mat m = linearized_return_map(model, component);
    const Mat fixed = fixed_subspace(m, threshold);
    const double defect = ((Mat::Identity(2 * q, 2 * q) - m) * tangent).norm();
    r.max_defect = std::max({r.max_defect, defect, res});
    r.dim_found = static_cast<int>(fixed.cols());
    if (r.dim_found != r.dim_expected) {
      r.clean = false;
      std::ostringstream os;
      os << "fixed subspace has dimension " << r.dim_found << ", component tangent has "
         << r.dim_expected;
      r.failure = os.str();
      break;
    }
    if (defect > threshold || res > 1e-10) {
      r.clean = false;
      r.failure = "component tangent is not fixed by the return map";
      break;
    }
  }
  return r;
}

DensityResult fixed_point_density(const FlatFoliatedModel& model,
                                  const RelativePeriodComponent& component, double threshold) {
  const Mat m = linearized_return_map(model, component);
  const int dim = static_cast<int>(m.rows());
  const int q = dim / 2;
  const Mat fixed = fixed_subspace(m, threshold);
  DensityResult r;
  r.fixed_dim = static_cast<int>(fixed.cols());
  const int cdim = dim - r.fixed_dim;
  if (cdim > 0) {
    // Orthonormal complement of the fixed subspace.
    Eigen::JacobiSVD<Mat> svd(fixed, Eigen::ComputeFullU);
    const Mat complement = svd.matrixU().rightCols(cdim);
    Mat j = Mat::Zero(dim, dim);
    j.topRightCorner(q, q) = -Mat::Identity(q, q);
    j.bottomLeftCorner(q, q) = Mat::Identity(q, q);
    const Mat b = complement.transpose() * j * (Mat::Identity(dim, dim) - m) * complement;
    const double det = b.determinant();
    if (std::abs(det) < threshold)
      throw GeometricError("I - P restricted to the complement of the fixed set is singular");
    r.complement_factor = 1.0 / std::sqrt(std::abs(det));
  }
  r.mass = model.volume() * r.complement_factor;
  return r;
}

double subprincipal_phase(const FlatFoliatedModel& model, const RelativePeriodComponent& component) {
  if (component.t == 0.0) return 0.0;
  const auto [nodes, weights] = gauss_legendre(8);
  const ConormalVector nu = make_conormal_unchecked(Vec::Zero(model.n()), component.direction);
  const double half = 0.5 * component.t;
  double total = 0.0;
  for (Eigen::Index i = 0; i < nodes.size(); ++i) {
    const double tau = half * (nodes[i] + 1.0);
    total += weights[i] * subprincipal_p(model, flow(model, nu, -tau));
  }
  return half * total;
}

double torus_average(const TrigPolynomial& phi, int n, double rel_tol) {
  double scale = 0.0;
  for (const auto& [m, c] : phi.coefficients()) scale += std::abs(c);
  if (scale == 0.0) return 0.0;
  double previous = 0.0;
  for (int points = 2;; points *= 2) {
    const double total_points = std::pow(static_cast<double>(points), n);
    if (total_points > 1e7) throw GeometricError("torus quadrature did not converge");
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    CompensatedSum<double> acc;
    Vec x(n);
    for (long k = 0; k < static_cast<long>(total_points); ++k) {
      long r = k;
      for (int i = 0; i < n; ++i) {
        x[i] = static_cast<double>(r % points) / points;
        r /= points;
      }
      acc.add(phi(x));
    }
    const double value = acc.value() / total_points;
    if (points > 2 && std::abs(value - previous) <= rel_tol * std::max(std::abs(value), scale))
      return value;
    previous = value;
  }
}

cplx leading_coefficient(const FlatFoliatedModel& model, const GroupoidKernel& kernel,
                         const RelativePeriodComponent& component,
                         const DirectionWeight& direction) {
  std::mt19937_64 rng(0x5eed);
  const CleannessReport clean = cleanness_check(model, component, 5, rng);
  if (!clean.clean) throw GeometricError("component is not clean: " + clean.failure);
  double restricted = 0.0;
  for (const auto& term : kernel.terms())
    restricted += torus_average(term.phi, model.n()) * term.psi.value(component.shift_length);
  if (direction) restricted *= direction(model.transverse_frequencies(component.direction).normalized());
  const DensityResult density = fixed_point_density(model, component);
  return restricted * density.mass * std::polar(1.0, subprincipal_phase(model, component)) / kTwoPi;
}

void write_periods_csv(std::ostream& os, const std::vector<RelativePeriodComponent>& components) {
  os << "t,v,|w|,d_j,sigma_j,Re(alpha0),Im(alpha0),density_mass\n" << std::setprecision(17);
  for (const auto& c : components) {
    os << c.t << ',';
    for (Eigen::Index i = 0; i < c.v.size(); ++i) os << (i ? " " : "") << c.v[i];
    os << ',' << c.shift_length << ',' << c.dimension << ',' << c.maslov << ','
       << c.alpha0.real() << ',' << c.alpha0.imag() << ',' << c.density_mass << '\n';
  }
}

}  // namespace foliatrace
