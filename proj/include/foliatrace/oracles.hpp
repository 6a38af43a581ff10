#pragma once

// Brute-force reference implementations used by tests and the `oracle`
// subcommand. They take raw model data (basis, metric, drift) and share no
// code paths with the library beyond the numerics header.

#include "foliatrace/numerics.hpp"

#include <vector>

namespace foliatrace::oracle {

struct RawModel {
  int n = 2;
  int p = 1;
  Mat leaf_basis;
  Mat metric;
  Vec drift;
};

struct GridPeriod {
  double t = 0.0;
  /// Leaf coordinates of the shift in a g-orthonormal leaf basis.
  Vec w;
  double w_length = 0.0;
  /// +1 or -1: which unit normal the closing direction uses.
  int side = 1;
  double defect = 0.0;
};

/// Solutions of w + t u in Z^n with u a g-unit normal to the leaves,
/// 0 < t <= t_max and |w|_g < support, found by a grid search over (t, w)
/// followed by Gauss-Newton on the wrapped defect. Codimension 1 only;
/// throws std::invalid_argument otherwise. Sorted by t, then side, then w.
std::vector<GridPeriod> grid_periods(const RawModel& model, double support, double t_max,
                                     double grid_step = 5e-3);

/// Unit-mass bump psi(r) = exp(1 / ((r/S)^2 - 1)) / mass on R^p.
double bump_value(int p, double support, double r);
/// Radial Fourier transform of the unit-mass bump by the trapezoid rule with
/// `points` nodes on [0, S] (Hankel form with std::cyl_bessel_j).
double bump_transform(int p, double support, double k, int points = 20001);

/// Eigenvalue of I + Delta_H + c.D_H on e_m: transverse Laplacian taken as
/// the full Laplacian minus the leafwise one, both from the metric directly.
double plane_wave_eigenvalue(const RawModel& model, const VecI& m);

/// One kernel term: phi average and bump support.
struct RawTerm {
  cplx phi_mean;
  double support = 1.0;
};

struct ProbePoint {
  double t0 = 0.0;
  double s = 0.0;
  double width = 1.0;
};

/// For each probe, the sum over |m_i| <= box of w(m) fhat(lambda_m) with the
/// Gaussian probe exp(-(t - t0)^2 / 2 width^2) exp(-i s t). No cutoffs.
std::vector<cplx> brute_force_traces(const RawModel& model, const std::vector<RawTerm>& terms,
                                     int box, const std::vector<ProbePoint>& probes);

/// Poisson-summation value of the same sum for the product torus T^1 x T^1
/// (leaf (1,0), identity metric, no drift, phi = 1), dropping the constant
/// in lambda^2 = 1 + |xi_H|^2:
/// 2 sum_j psi(|j|) sum_k exp(-(k - t0)^2 / 2 width^2) exp(-i s k).
cplx poisson_product_trace(double support, double t0, double s, double width);

}  // namespace foliatrace::oracle
