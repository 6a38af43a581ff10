#pragma once

#include "foliatrace/model.hpp"

#include <map>
#include <vector>

namespace foliatrace {

/// Finite trigonometric polynomial phi(x) = sum_m c_m exp(2 pi i m.x).
class TrigPolynomial {
 public:
  using Frequency = std::vector<int>;

  TrigPolynomial() = default;
  /// Throws std::invalid_argument unless the coefficients are Hermitian
  /// symmetric (c_{-m} = conj(c_m)), so that phi is real valued.
  explicit TrigPolynomial(std::map<Frequency, cplx> coefficients);

  static TrigPolynomial constant(int n, double value);

  const std::map<Frequency, cplx>& coefficients() const { return coefficients_; }
  /// Zero-frequency coefficient, the torus average of phi.
  cplx mean() const;
  double operator()(const Vec& x) const;
  /// Largest |m_i| over all frequencies.
  int max_frequency() const;
  TrigPolynomial scaled(double factor) const;
  /// phi(x - shift).
  TrigPolynomial translated(const Vec& shift) const;

 private:
  std::map<Frequency, cplx> coefficients_;
};

/// Unit-mass radial bump on V = R^p supported in the ball of radius S:
/// psi(s) = exp(1 / (|s/S|^2 - 1)) / mass.
class BumpProfile {
 public:
  BumpProfile(int leaf_dim, double support_radius);

  int leaf_dim() const { return leaf_dim_; }
  double support_radius() const { return radius_; }
  double mass_of_unnormalized() const { return mass_; }

  /// psi at leafwise distance r.
  double value(double r) const;
  /// psi^(kappa) = int psi(s) exp(-i kappa.s) ds at |kappa| = k; real since
  /// psi is radial. Adaptive Gauss-Kronrod on the radial integral.
  double fourier(double k) const;
  /// Same integral by composite Simpson on `points` nodes. Used as an
  /// independent cross-check of fourier().
  double fourier_simpson(double k, int points) const;

 private:
  int leaf_dim_;
  double radius_;
  double mass_;
};

/// One separable term phi(r(gamma)) psi(w).
struct SeparableTerm {
  TrigPolynomial phi;
  BumpProfile psi;
};

/// Finite sum of separable terms. An empty kernel is the zero kernel.
class GroupoidKernel {
 public:
  GroupoidKernel() = default;
  explicit GroupoidKernel(std::vector<SeparableTerm> terms);

  static GroupoidKernel separable(TrigPolynomial phi, BumpProfile psi);

  const std::vector<SeparableTerm>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  /// Largest support radius among the terms (0 for the zero kernel).
  double support_radius() const;

  GroupoidKernel operator+(const GroupoidKernel& other) const;
  GroupoidKernel scaled(double factor) const;

 private:
  std::vector<SeparableTerm> terms_;
};

/// k(gamma) = sum phi(r(gamma)) psi(|shift|_g).
double kernel_eval(const FlatFoliatedModel& model, const GroupoidKernel& kernel,
                   const HolonomyElement& gamma);

/// Leaf frequency K such that every |psi^(kappa)| for |kappa| >= K is below
/// rel_tol * psi^(0) for all terms. Determined by scanning the transform.
double leaf_frequency_cutoff(const GroupoidKernel& kernel, double rel_tol);

}  // namespace foliatrace
