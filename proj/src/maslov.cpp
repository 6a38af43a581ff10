#include "foliatrace/maslov.hpp"

#include <sstream>

namespace foliatrace {

GeneratingFunction::GeneratingFunction(double t, Mat dual_metric) : t_(t), q_(std::move(dual_metric)) {
  if (!std::isfinite(t_)) throw std::invalid_argument("generating function needs a finite time");
}

double GeneratingFunction::symbol(const Vec& eta) const {
  const double p2 = eta.dot(q_ * eta);
  if (!(p2 > 0.0)) throw std::invalid_argument("generating function: eta = 0");
  return std::sqrt(p2);
}

double GeneratingFunction::value(const Vec& y, const Vec& eta) const {
  return y.dot(eta) + t_ * symbol(eta);
}

Vec GeneratingFunction::grad_y(const Vec&, const Vec& eta) const { return eta; }

Vec GeneratingFunction::grad_eta(const Vec& y, const Vec& eta) const {
  return y + t_ * (q_ * eta) / symbol(eta);
}

Mat GeneratingFunction::hess_yy(const Vec&, const Vec& eta) const {
  return Mat::Zero(eta.size(), eta.size());
}

Mat GeneratingFunction::hess_yeta(const Vec&, const Vec& eta) const {
  return Mat::Identity(eta.size(), eta.size());
}

Mat GeneratingFunction::hess_etaeta(const Vec&, const Vec& eta) const {
  const double p = symbol(eta);
  const Vec qe = q_ * eta;
  return t_ * (q_ / p - qe * qe.transpose() / (p * p * p));
}

GeneratingFunction GeneratingFunction::in_chart(const Mat& a) const {
  return GeneratingFunction(t_, a * q_ * a.transpose());
}

GeneratingFunction solve_generating_function(const FlatFoliatedModel& model, double t) {
  return GeneratingFunction(t, Mat::Identity(model.q(), model.q()));
}

double characteristics_value(const GeneratingFunction& chi, const Vec& y, const Vec& eta, int steps) {
  const int q = chi.q();
  const double h = 1e-6 * std::max(1.0, eta.norm());
  Vec grad(q);
  for (int i = 0; i < q; ++i) {
    Vec e = Vec::Zero(q);
    e[i] = h;
    grad[i] = (chi.symbol(eta + e) - chi.symbol(eta - e)) / (2.0 * h);
  }
  const double p = chi.symbol(eta);
  // Hamiltonian H = -p: y' = -grad p, eta' = 0, S' = eta.y' - H.
  auto rhs = [&](const Vec&) {
    Vec dz(q + 1);
    dz.head(q) = -grad;
    dz[q] = eta.dot(-grad) + p;
    return dz;
  };
  auto integrate = [&](const Vec& y0) {
    Vec z(q + 1);
    z << y0, y0.dot(eta);
    const double dt = chi.t() / steps;
    for (int k = 0; k < steps; ++k) {
      const Vec k1 = rhs(z);
      const Vec k2 = rhs(z + 0.5 * dt * k1);
      const Vec k3 = rhs(z + 0.5 * dt * k2);
      const Vec k4 = rhs(z + dt * k3);
      z += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return z;
  };
  // Shoot: the characteristic from y0 must end at y.
  const Vec first = integrate(y);
  const Vec y0 = y - (first.head(q) - y);
  return integrate(y0)[q];
}

double cauchy_residual(const GeneratingFunction& chi, const Vec& y, const Vec& eta) {
  const double dt = 1e-6 * std::max(1.0, std::abs(chi.t()));
  const GeneratingFunction ahead(chi.t() + dt, chi.dual_metric());
  const GeneratingFunction behind(chi.t() - dt, chi.dual_metric());
  const double chi_t = (ahead.value(y, eta) - behind.value(y, eta)) / (2.0 * dt);
  return std::abs(chi_t - chi.symbol(chi.grad_y(y, eta)));
}

Mat assemble_R(const GeneratingFunction& chi, const Vec& y, const Vec& eta) {
  const int q = chi.q();
  Mat r = Mat::Zero(3 * q, 3 * q);
  const Mat i = Mat::Identity(q, q);
  r.block(0, 0, q, q) = chi.hess_yy(y, eta);
  r.block(0, q, q, q) = chi.hess_yeta(y, eta);
  r.block(q, 0, q, q) = chi.hess_yeta(y, eta).transpose();
  r.block(q, q, q, q) = chi.hess_etaeta(y, eta);
  r.block(0, 2 * q, q, q) = -i;
  r.block(2 * q, 0, q, q) = -i;
  return r;
}

namespace {

Mat hessian_fd(const GeneratingFunction& chi, const Vec& y, const Vec& eta, double h) {
  const int q = chi.q();
  Vec z(2 * q);
  z << y, eta;
  auto f = [&](const Vec& w) { return chi.value(w.head(q), w.tail(q)); };
  Mat hess(2 * q, 2 * q);
  for (int a = 0; a < 2 * q; ++a) {
    for (int b = 0; b < 2 * q; ++b) {
      Vec ea = Vec::Zero(2 * q), eb = Vec::Zero(2 * q);
      ea[a] = h;
      eb[b] = h;
      hess(a, b) = (f(z + ea + eb) - f(z + ea - eb) - f(z - ea + eb) + f(z - ea - eb)) / (4.0 * h * h);
    }
  }
  return hess;
}

}  // namespace

Mat assemble_R_numeric(const GeneratingFunction& chi, const Vec& y, const Vec& eta, double h) {
  const int q = chi.q();
  const Mat fine = hessian_fd(chi, y, eta, h);
  const Mat coarse = hessian_fd(chi, y, eta, 2.0 * h);
  const double scale = std::max(1.0, fine.cwiseAbs().maxCoeff());
  if ((fine - coarse).cwiseAbs().maxCoeff() > 1e-4 * scale)
    throw std::runtime_error("finite-difference Hessian of chi fails the Richardson check");
  Mat r = Mat::Zero(3 * q, 3 * q);
  r.topLeftCorner(2 * q, 2 * q) = fine;
  r.block(0, 2 * q, q, q) = -Mat::Identity(q, q);
  r.block(2 * q, 0, q, q) = -Mat::Identity(q, q);
  if ((r - r.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::runtime_error("assembled R is not symmetric");
  return r;
}

SignatureResult signature(const Mat& r, double rel_threshold) {
  const double scale = std::max(r.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if ((r - r.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("signature of a non-symmetric matrix");
  Eigen::SelfAdjointEigenSolver<Mat> eig(r, Eigen::EigenvaluesOnly);
  const Vec& ev = eig.eigenvalues();
  const double threshold = rel_threshold * ev.cwiseAbs().maxCoeff();
  SignatureResult s;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double a = std::abs(ev[i]);
    if (a > 0.1 * threshold && a <= 10.0 * threshold) s.marginal = true;
    if (a <= threshold)
      ++s.zero;
    else if (ev[i] > 0.0)
      ++s.positive;
    else
      ++s.negative;
  }
  s.value = s.positive - s.negative;
  return s;
}

IntersectionResult intersection_number(const FlatFoliatedModel& model,
                                       const RelativePeriodComponent& component, int steps) {
  IntersectionResult res;
  const double t = -component.t;
  if (t == 0.0) return res;
  steps = std::max(steps, 1000);
  const int q = model.q();
  const Vec eta = model.transverse_frequencies(component.direction);
  // Linearized flow: dy' = Hess p(eta) deta, deta' = 0.
  Mat a = Mat::Zero(2 * q, 2 * q);
  a.topRightCorner(q, q) = transverse_hessian(eta);
  Mat vertical = Mat::Zero(2 * q, q);
  vertical.bottomRows(q) = Mat::Identity(q, q);

  Mat phi = Mat::Identity(2 * q, 2 * q);
  const double h = t / steps;
  auto frame_det = [&](const Mat& flow_map) {
    const Mat frame = flow_map.partialPivLu().solve(vertical);
    return frame.bottomRows(q).determinant();
  };
  constexpr double kTouch = 1e-6;
  double prev = frame_det(phi);
  if (std::abs(prev) < kTouch) ++res.endpoint;
  for (int k = 1; k <= steps; ++k) {
    const Mat k1 = a * phi;
    const Mat k2 = a * (phi + 0.5 * h * k1);
    const Mat k3 = a * (phi + 0.5 * h * k2);
    const Mat k4 = a * (phi + h * k3);
    phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double d = frame_det(phi);
    if (std::abs(d) < kTouch) {
      if (k == steps)
        ++res.endpoint;
      else
        res.flagged = true;
    } else if ((d > 0.0) != (prev > 0.0) && std::abs(prev) >= kTouch) {
      res.interior += d > 0.0 ? 1 : -1;
    }
    if (std::abs(d) >= kTouch) prev = d;
  }
  res.kappa = res.interior + res.endpoint / 2;
  return res;
}

MaslovData maslov_index(const FlatFoliatedModel& model, const RelativePeriodComponent& component,
                        int sample_count, std::mt19937_64& rng) {
  MaslovData out;
  if (component.t == 0.0) {
    out.samples = sample_count;
    return out;
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const GeneratingFunction chi = solve_generating_function(model, -component.t);
  const Vec eta = model.transverse_frequencies(component.direction).normalized();
  const IntersectionResult kappa = intersection_number(model, component);
  for (int k = 0; k < std::max(1, sample_count); ++k) {
    Vec x(model.n());
    for (int i = 0; i < model.n(); ++i) x[i] = unif(rng);
    const Vec y = model.transverse_coordinates(x);
    const Mat r = assemble_R(chi, y, eta);
    const SignatureResult sig = signature(r);
    const int sigma = sig.value + 2 * kappa.kappa;
    if (k == 0) {
      out.r = r;
      out.signature = sig.value;
      out.kappa = kappa.kappa;
      out.sigma = sigma;
    } else if (sigma != out.sigma) {
      out.consistent = false;
      std::ostringstream os;
      os << "sample " << k << " gives sigma " << sigma << ", sample 0 gave " << out.sigma;
      out.failure = os.str();
    }
    out.marginal = out.marginal || sig.marginal || kappa.flagged;
    ++out.samples;
  }
  return out;
}

}  // namespace foliatrace
