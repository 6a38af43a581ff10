#pragma once

#include "foliatrace/geometric.hpp"
#include "foliatrace/model.hpp"

#include <random>
#include <string>

namespace foliatrace {

/// chi(t, y, eta) = y.eta + t p(eta), p(eta) = sqrt(eta^T Q eta), on
/// transverse coordinates (y, eta) of a chart in which the dual transverse
/// metric is Q. Solves d_t chi = p(d_y chi) with chi(0, y, eta) = y.eta.
class GeneratingFunction {
 public:
  GeneratingFunction(double t, Mat dual_metric);

  double t() const { return t_; }
  int q() const { return static_cast<int>(q_.rows()); }
  const Mat& dual_metric() const { return q_; }

  double symbol(const Vec& eta) const;
  double value(const Vec& y, const Vec& eta) const;
  Vec grad_y(const Vec& y, const Vec& eta) const;
  Vec grad_eta(const Vec& y, const Vec& eta) const;
  Mat hess_yy(const Vec& y, const Vec& eta) const;
  Mat hess_yeta(const Vec& y, const Vec& eta) const;
  Mat hess_etaeta(const Vec& y, const Vec& eta) const;
  /// Same generating function expressed in the chart y' = A y.
  GeneratingFunction in_chart(const Mat& a) const;

 private:
  double t_;
  Mat q_;
};

/// Exact solution in g-orthonormal transverse coordinates. Throws
/// std::invalid_argument for non-finite t.
GeneratingFunction solve_generating_function(const FlatFoliatedModel& model, double t);

/// chi(t, y, eta) by the method of characteristics: integrates
/// y' = -grad p(eta), eta' = 0 with RK4 and accumulates the action, with
/// grad p taken by central differences. Independent of the closed form.
double characteristics_value(const GeneratingFunction& chi, const Vec& y, const Vec& eta,
                             int steps = 1000);

/// |d_t chi - p(d_y chi)| at (y, eta), d_t by central differences.
double cauchy_residual(const GeneratingFunction& chi, const Vec& y, const Vec& eta);

/// [[chi_yy, chi_yeta, -I], [chi_etay, chi_etaeta, 0], [-I, 0, 0]].
Mat assemble_R(const GeneratingFunction& chi, const Vec& y, const Vec& eta);

/// Same matrix from second central differences of chi (step h), with a
/// Richardson comparison against step 2h. Throws std::runtime_error if the
/// result is asymmetric beyond 1e-8 or the two steps disagree beyond 1e-6.
Mat assemble_R_numeric(const GeneratingFunction& chi, const Vec& y, const Vec& eta,
                       double h = 1e-5);

struct SignatureResult {
  int value = 0;
  int positive = 0;
  int negative = 0;
  int zero = 0;
  /// Some eigenvalue lies within 10x of the zero threshold.
  bool marginal = false;
};

/// Eigenvalue signature, zeros below rel_threshold * ||R||. Throws
/// std::invalid_argument for an asymmetric matrix.
SignatureResult signature(const Mat& r, double rel_threshold = 1e-8);

struct IntersectionResult {
  /// Signed interior crossings plus half the endpoint crossings, rounded
  /// toward zero.
  int kappa = 0;
  int interior = 0;
  int endpoint = 0;
  bool flagged = false;
};

/// Signed crossings of the curve L(tau) = (df_tau)^{-1}(vertical), tau in
/// [0, t], with the horizontal subspace {deta = 0}, detected by sign
/// changes of det of the eta block of a frame of L(tau). df_tau comes from
/// RK4 integration of the linearized flow.
IntersectionResult intersection_number(const FlatFoliatedModel& model,
                                       const RelativePeriodComponent& component,
                                       int steps = 1000);

struct MaslovData {
  Mat r;
  int signature = 0;
  int kappa = 0;
  int sigma = 0;
  int samples = 0;
  bool consistent = true;
  bool marginal = false;
  std::string failure;
};

/// sigma = sgn R + 2 kappa at sample_count points of the component. R is
/// built from the generating function of the return map f_{-t} that appears
/// in the relative fixed-point equation. All samples must agree; a
/// disagreement is reported in `failure`. The t = 0 component has sigma = 0.
MaslovData maslov_index(const FlatFoliatedModel& model, const RelativePeriodComponent& component,
                        int sample_count, std::mt19937_64& rng);

}  // namespace foliatrace
