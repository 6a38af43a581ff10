#include "foliatrace/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace foliatrace {

TrigPolynomial::TrigPolynomial(std::map<Frequency, cplx> coefficients)
    : coefficients_(std::move(coefficients)) {
  for (const auto& [m, c] : coefficients_) {
    Frequency neg(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) neg[i] = -m[i];
    auto it = coefficients_.find(neg);
    const cplx partner = it == coefficients_.end() ? cplx(0.0) : it->second;
    if (std::abs(partner - std::conj(c)) > 1e-14 * std::max(1.0, std::abs(c)))
      throw std::invalid_argument("trigonometric weight is not real: c(-m) != conj(c(m))");
  }
}

TrigPolynomial TrigPolynomial::constant(int n, double value) {
  return TrigPolynomial({{Frequency(static_cast<std::size_t>(n), 0), cplx(value)}});
}

cplx TrigPolynomial::mean() const {
  for (const auto& [m, c] : coefficients_) {
    bool zero = true;
    for (int mi : m) zero = zero && mi == 0;
    if (zero) return c;
  }
  return 0.0;
}

double TrigPolynomial::operator()(const Vec& x) const {
  CompensatedSum<double> acc;
  for (const auto& [m, c] : coefficients_) {
    double phase = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) phase += m[i] * x[static_cast<Eigen::Index>(i)];
    acc.add((c * std::polar(1.0, kTwoPi * phase)).real());
  }
  return acc.value();
}

int TrigPolynomial::max_frequency() const {
  int top = 0;
  for (const auto& [m, c] : coefficients_)
    for (int mi : m) top = std::max(top, std::abs(mi));
  return top;
}

TrigPolynomial TrigPolynomial::scaled(double factor) const {
  auto coeffs = coefficients_;
  for (auto& [m, c] : coeffs) c *= factor;
  return TrigPolynomial(std::move(coeffs));
}

TrigPolynomial TrigPolynomial::translated(const Vec& shift) const {
  auto coeffs = coefficients_;
  for (auto& [m, c] : coeffs) {
    double phase = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) phase += m[i] * shift[static_cast<Eigen::Index>(i)];
    c *= std::polar(1.0, -kTwoPi * phase);
  }
  return TrigPolynomial(std::move(coeffs));
}

namespace {

double unnormalized_bump(double r, double radius) {
  const double u = r / radius;
  const double u2 = u * u;
  if (u2 >= 1.0) return 0.0;
  return std::exp(1.0 / (u2 - 1.0));
}

double sphere_area(int dim) {
  // |S^{dim-1}| = 2 pi^{dim/2} / Gamma(dim/2)
  return 2.0 * std::pow(kPi, 0.5 * dim) / std::tgamma(0.5 * dim);
}

}  // namespace

BumpProfile::BumpProfile(int leaf_dim, double support_radius)
    : leaf_dim_(leaf_dim), radius_(support_radius), mass_(1.0) {
  if (leaf_dim < 1) throw std::invalid_argument("bump profile needs leaf dimension >= 1");
  if (!(support_radius > 0.0) || !std::isfinite(support_radius))
    throw std::invalid_argument("bump support radius must be positive and finite");
  const int p = leaf_dim;
  const double radius = radius_;
  auto radial = [p, radius](double r) { return unnormalized_bump(r, radius) * std::pow(r, p - 1); };
  mass_ = sphere_area(p) * integrate_adaptive(radial, 0.0, radius, 1e-14, 0.0, 4).value;
}

double BumpProfile::value(double r) const { return unnormalized_bump(r, radius_) / mass_; }

double BumpProfile::fourier(double k) const {
  k = std::abs(k);
  if (k == 0.0) return 1.0;
  const int panels = static_cast<int>(std::ceil(k * radius_ / kPi)) + 2;
  if (leaf_dim_ == 1) {
    auto f = [this, k](double r) { return 2.0 * value(r) * std::cos(k * r); };
    return integrate_adaptive(f, 0.0, radius_, 1e-13, 1e-17, panels).value;
  }
  const double order = 0.5 * leaf_dim_ - 1.0;
  const double half = 0.5 * leaf_dim_;
  auto f = [this, k, order, half](double r) {
    return value(r) * std::cyl_bessel_j(order, k * r) * std::pow(r, half);
  };
  const double radial = integrate_adaptive(f, 0.0, radius_, 1e-13, 1e-17, panels).value;
  return std::pow(kTwoPi, half) * std::pow(k, 1.0 - half) * radial;
}

double BumpProfile::fourier_simpson(double k, int points) const {
  if (points % 2 == 0) ++points;
  k = std::abs(k);
  const double h = radius_ / (points - 1);
  auto f = [&](double r) -> double {
    if (leaf_dim_ == 1) return 2.0 * value(r) * std::cos(k * r);
    const double half = 0.5 * leaf_dim_;
    if (k == 0.0) return sphere_area(leaf_dim_) * value(r) * std::pow(r, leaf_dim_ - 1);
    return std::pow(kTwoPi, half) * std::pow(k, 1.0 - half) * value(r) *
           std::cyl_bessel_j(half - 1.0, k * r) * std::pow(r, half);
  };
  CompensatedSum<double> acc;
  for (int i = 0; i < points; ++i) {
    const double w = (i == 0 || i == points - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc.add(w * f(i * h));
  }
  return acc.value() * h / 3.0;
}

GroupoidKernel::GroupoidKernel(std::vector<SeparableTerm> terms) : terms_(std::move(terms)) {}

GroupoidKernel GroupoidKernel::separable(TrigPolynomial phi, BumpProfile psi) {
  return GroupoidKernel({SeparableTerm{std::move(phi), std::move(psi)}});
}

double GroupoidKernel::support_radius() const {
  double s = 0.0;
  for (const auto& t : terms_) s = std::max(s, t.psi.support_radius());
  return s;
}

GroupoidKernel GroupoidKernel::operator+(const GroupoidKernel& other) const {
  auto terms = terms_;
  terms.insert(terms.end(), other.terms_.begin(), other.terms_.end());
  return GroupoidKernel(std::move(terms));
}

GroupoidKernel GroupoidKernel::scaled(double factor) const {
  auto terms = terms_;
  for (auto& t : terms) t.phi = t.phi.scaled(factor);
  return GroupoidKernel(std::move(terms));
}

double kernel_eval(const FlatFoliatedModel& model, const GroupoidKernel& kernel,
                   const HolonomyElement& gamma) {
  const double r = model.leaf_coordinates(gamma.shift()).norm();
  double total = 0.0;
  for (const auto& t : kernel.terms()) total += t.phi(gamma.target()) * t.psi.value(r);
  return total;
}

double leaf_frequency_cutoff(const GroupoidKernel& kernel, double rel_tol) {
  double cutoff = 0.0;
  for (const auto& t : kernel.terms()) {
    const double s = t.psi.support_radius();
    const double step = kPi / (8.0 * s);
    const double floor = rel_tol * t.psi.fourier(0.0);
    double last_above = 0.0;
    // Ten oscillation periods with every sample below the floor ends the scan.
    const double quiet = 10.0 * kTwoPi / s;
    for (double k = 0.0;; k += step) {
      if (std::abs(t.psi.fourier(k)) > floor) last_above = k;
      if (k > last_above + quiet && k > 10.0 / s) break;
    }
    cutoff = std::max(cutoff, last_above + 2.0 * step);
  }
  return cutoff;
}

}  // namespace foliatrace
