#pragma once

#include "foliatrace/kernel.hpp"
#include "foliatrace/model.hpp"
#include "foliatrace/spectral.hpp"

#include <functional>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace foliatrace {

class GeometricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Integrator {
  enum class Kind { Exact, Rk4 };
  Kind kind = Kind::Exact;
  double step = 0.0;

  static Integrator exact() { return {}; }
  static Integrator rk4(double h) { return {Kind::Rk4, h}; }
};

/// Transverse bicharacteristic flow of p(x, xi) = |xi|_{g*}:
/// (x + t g* xi / |xi|_{g*} mod Z^n, xi). Throws std::invalid_argument for
/// xi = 0 or a non-positive RK4 step.
ConormalVector flow(const FlatFoliatedModel& model, const ConormalVector& nu, double t,
                    Integrator integrator = Integrator::exact());

struct FlowState {
  ConormalVector nu;
  double t = 0.0;
};

FlowState advance(const FlatFoliatedModel& model, const FlowState& state, double dt,
                  Integrator integrator = Integrator::exact());

/// Hessian of eta -> |eta| in transverse coordinates: (I - eta^ eta^T) / |eta|.
Mat transverse_hessian(const Vec& eta);

/// One connected component Z_j of the relative fixed-point set at time t,
/// indexed by the lattice vector v of the closing translation.
struct RelativePeriodComponent {
  double t = 0.0;
  VecI v;
  /// Unit (in g*) conormal covector sign(t) g v_H / |v_H|_g.
  Vec direction;
  /// w = leafwise part of v.
  Vec shift;
  double shift_length = 0.0;
  int dimension = 0;
  int maslov = 0;
  cplx alpha0;
  double density_mass = 0.0;
};

/// All components with 0 < |t| <= t_max and |w|_g < support radius of the
/// kernel: each lattice v with nonzero transverse part gives one component
/// at t = |v_H|_g and one at t = -|v_H|_g. Sorted by |t|, then positive t
/// first, then v lexicographically. Geometric data only: maslov, alpha0 and
/// density_mass are left at zero.
std::vector<RelativePeriodComponent> find_relative_periods(const FlatFoliatedModel& model,
                                                           const GroupoidKernel& kernel,
                                                           double t_max);

/// The t = 0 component through a given unit conormal direction.
RelativePeriodComponent diagonal_component(const FlatFoliatedModel& model, const Vec& direction);

/// Distance of f_{-t} dh*_gamma(nu) from nu with gamma the leafwise shift w.
double fixed_point_residual(const FlatFoliatedModel& model, const RelativePeriodComponent& c,
                            const ConormalVector& nu);

/// Membership predicate for a set of conormal vectors.
using ConormalSet = std::function<bool(const ConormalVector&)>;

struct SaturationReport {
  bool saturated = true;
  double max_residual = 0.0;
  int samples = 0;
};

/// Samples nu in the set (rejection sampling over the component's
/// points; by default the set is the component itself) and random leafwise
/// translations gamma_1, and checks that dh*_{gamma_1}(nu) is again in the
/// set and satisfies the fixed-point equation with the conjugated witness.
SaturationReport saturation_check(const FlatFoliatedModel& model,
                                  const RelativePeriodComponent& component, int sample_count,
                                  std::mt19937_64& rng, const ConormalSet& membership = {});

struct CleannessReport {
  bool clean = false;
  int dim_found = 0;
  int dim_expected = 0;
  double max_defect = 0.0;
  std::string failure;
};

/// Linearized return map on the transverse symplectic space, coordinates
/// (dy, deta): (dy, deta) -> (dy + t Hess p deta, deta).
Mat linearized_return_map(const FlatFoliatedModel& model, const RelativePeriodComponent& c);

/// Basis of ker(I - M) from singular values below threshold.
Mat fixed_subspace(const Mat& map, double threshold = 1e-8);

CleannessReport cleanness_check(const FlatFoliatedModel& model,
                                const RelativePeriodComponent& component, int sample_count,
                                std::mt19937_64& rng, double threshold = 1e-8);

struct DensityResult {
  /// |det B|^{-1/2} for B the form induced by I - M on a complement of the fixed set.
  double complement_factor = 1.0;
  int fixed_dim = 0;
  /// Integral of the density over the component, volume(torus) * complement_factor.
  double mass = 0.0;
};

/// Throws GeometricError if I - M restricted to the complement is singular.
DensityResult fixed_point_density(const FlatFoliatedModel& model,
                                  const RelativePeriodComponent& component,
                                  double threshold = 1e-8);

/// Phase int_0^t sigma_sub(P)(f_{-tau} nu) dtau along the component.
double subprincipal_phase(const FlatFoliatedModel& model, const RelativePeriodComponent& component);

/// Torus average of phi by tensor trapezoid rules, doubled until two
/// successive levels agree to rel_tol.
double torus_average(const TrigPolynomial& phi, int n, double rel_tol = 1e-6);

/// alpha_{j,0} = (2 pi)^{-1} sum_terms [avg phi] psi(|w|) * density mass * exp(i phase),
/// times chi(direction) when a conic cutoff is given. Throws GeometricError
/// if the component is not clean.
cplx leading_coefficient(const FlatFoliatedModel& model, const GroupoidKernel& kernel,
                         const RelativePeriodComponent& component,
                         const DirectionWeight& direction = {});

/// Columns t,v,|w|,d_j,sigma_j,Re(alpha0),Im(alpha0),density_mass; v is written
/// as space-separated integers.
void write_periods_csv(std::ostream& os, const std::vector<RelativePeriodComponent>& components);

}  // namespace foliatrace
