#pragma once

#include "foliatrace/numerics.hpp"

#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace foliatrace {

/// Which model invariant a validation failure refers to.
enum class Invariant {
  Dimension,
  LeafRank,
  MetricSymmetric,
  MetricPositive,
  DriftTransverse,
  DriftNorm,
  ConormalZero,
  ConormalLeafComponent,
  ShiftNotLeafwise,
  BasePointMismatch,
};

const char* to_string(Invariant inv);

class ValidationError : public std::invalid_argument {
 public:
  ValidationError(Invariant inv, const std::string& detail)
      : std::invalid_argument(std::string(to_string(inv)) + ": " + detail), invariant_(inv) {}
  Invariant invariant() const { return invariant_; }

 private:
  Invariant invariant_;
};

/// Linear foliation of the flat torus R^n / Z^n by translates of a
/// p-dimensional subspace V, with a constant metric and the operator
/// A = I + Delta_H + c.D_H.
///
/// Fourier convention: plane waves e_m(x) = exp(2 pi i m.x), m in Z^n, whose
/// covector is xi = 2 pi m. Covectors are stored in coordinate components;
/// "transverse coordinates" of a conormal covector are its components in a
/// g*-orthonormal basis of the annihilator of V, and "leaf coordinates" of
/// a leafwise vector are its components in a g-orthonormal basis of V.
class FlatFoliatedModel {
 public:
  int n() const { return n_; }
  int p() const { return p_; }
  int q() const { return n_ - p_; }

  const Mat& leaf_basis() const { return leaf_basis_; }
  const Mat& metric() const { return metric_; }
  const Vec& drift() const { return drift_; }

  const Mat& dual_metric() const { return dual_metric_; }
  /// n x p, g-orthonormal basis of V.
  const Mat& leaf_frame() const { return leaf_frame_; }
  /// n x q, g-orthonormal basis of H, the g-orthogonal complement of V.
  const Mat& transverse_frame() const { return transverse_frame_; }
  /// g-orthogonal projector onto V (acts on vectors).
  const Mat& leaf_projector() const { return leaf_projector_; }
  /// g-orthogonal projector onto H (acts on vectors).
  const Mat& transverse_projector() const { return transverse_projector_; }
  /// Riemannian volume of the torus, sqrt(det g).
  double volume() const { return volume_; }

  /// Leaf coordinates of a vector's V-component.
  Vec leaf_coordinates(const Vec& v) const { return leaf_frame_.transpose() * (metric_ * v); }
  /// Transverse coordinates of a vector's H-component.
  Vec transverse_coordinates(const Vec& v) const {
    return transverse_frame_.transpose() * (metric_ * v);
  }
  /// Leaf frequencies of a covector (its restriction to V).
  Vec leaf_frequencies(const Vec& xi) const { return leaf_frame_.transpose() * xi; }
  /// Transverse coordinates of a covector (its restriction to H).
  Vec transverse_frequencies(const Vec& xi) const { return transverse_frame_.transpose() * xi; }
  /// Conormal covector with the given transverse coordinates.
  Vec conormal_from_transverse(const Vec& eta) const {
    return metric_ * (transverse_frame_ * eta);
  }

  /// Symbol value lambda^2 of A on e_m, i.e. 1 + |xi_H|^2 + c.xi at xi = 2 pi m.
  double operator_symbol(const Vec& xi) const;

 private:
  friend FlatFoliatedModel build_model(int, int, const Mat&, const Mat&, const Vec&);
  FlatFoliatedModel() = default;

  int n_ = 0;
  int p_ = 0;
  Mat leaf_basis_;
  Mat metric_;
  Vec drift_;
  Mat dual_metric_;
  Mat leaf_frame_;
  Mat transverse_frame_;
  Mat leaf_projector_;
  Mat transverse_projector_;
  double volume_ = 0.0;
};

/// Validates the inputs and precomputes frames and projectors. Throws
/// ValidationError naming the violated invariant.
FlatFoliatedModel build_model(int n, int p, const Mat& leaf_basis, const Mat& metric,
                              const Vec& drift);

/// Point of the conormal bundle minus the zero section.
class ConormalVector {
 public:
  const Vec& x() const { return x_; }
  const Vec& xi() const { return xi_; }

 private:
  friend ConormalVector make_conormal(const FlatFoliatedModel&, const Vec&, const Vec&);
  friend ConormalVector make_conormal_unchecked(const Vec&, const Vec&);
  Vec x_;
  Vec xi_;
};

ConormalVector make_conormal(const FlatFoliatedModel& model, const Vec& x, const Vec& xi);
/// Skips validation. Only for values derived from an already valid
/// conormal vector by exact operations (transport, flow).
ConormalVector make_conormal_unchecked(const Vec& x, const Vec& xi);

/// Element of the holonomy groupoid. Holonomy of a linear foliation is
/// trivial, so an element is determined by its target and its leafwise
/// displacement: s(gamma) = target - shift (mod Z^n).
class HolonomyElement {
 public:
  const Vec& target() const { return target_; }
  const Vec& shift() const { return shift_; }
  Vec source() const { return wrap_torus(target_ - shift_); }

 private:
  friend HolonomyElement make_holonomy(const FlatFoliatedModel&, const Vec&, const Vec&);
  Vec target_;
  Vec shift_;
};

HolonomyElement make_holonomy(const FlatFoliatedModel& model, const Vec& target, const Vec& shift);
HolonomyElement unit_element(const FlatFoliatedModel& model, const Vec& x);
/// first o second: follow `second`, then `first`. Requires r(second) = s(first).
HolonomyElement compose(const FlatFoliatedModel& model, const HolonomyElement& first,
                        const HolonomyElement& second);

/// dh*_gamma: moves nu from r(gamma) to s(gamma). The covector is unchanged
/// because the Bott connection is flat with trivial holonomy.
ConormalVector holonomy_transport(const FlatFoliatedModel& model, const HolonomyElement& gamma,
                                  const ConormalVector& nu);

/// sigma_P(nu) = |xi|_{g*}.
double transverse_symbol(const FlatFoliatedModel& model, const ConormalVector& nu);

/// sigma_sub(P)(nu) = (c.xi) / (2 sigma_P(nu)).
double subprincipal_p(const FlatFoliatedModel& model, const ConormalVector& nu);

/// Symbol p~(x, xi) on T*M; used to inject modified symbols in checks.
using SymbolFunction = std::function<double(const Vec& x, const Vec& xi)>;

SymbolFunction model_symbol(const FlatFoliatedModel& model);

/// Uniform point of the torus and a random unit conormal covector.
ConormalVector sample_conormal(const FlatFoliatedModel& model, std::mt19937_64& rng);

/// Max |d p~(nu)(X)| over sampled nu and leafwise directions X, computed by
/// central differences with step 1e-5.
double verify_holonomy_invariance(const FlatFoliatedModel& model, int sample_count,
                                  std::mt19937_64& rng, const SymbolFunction& symbol = {});

}  // namespace foliatrace
