#include "foliatrace/model.hpp"

#include <sstream>

namespace foliatrace {

const char* to_string(Invariant inv) {
  switch (inv) {
    case Invariant::Dimension: return "dimension";
    case Invariant::LeafRank: return "leaf basis rank";
    case Invariant::MetricSymmetric: return "metric symmetry";
    case Invariant::MetricPositive: return "metric positive definiteness";
    case Invariant::DriftTransverse: return "drift transversality";
    case Invariant::DriftNorm: return "drift norm";
    case Invariant::ConormalZero: return "conormal nonzero";
    case Invariant::ConormalLeafComponent: return "conormal annihilates leaves";
    case Invariant::ShiftNotLeafwise: return "leafwise shift";
    case Invariant::BasePointMismatch: return "base point";
  }
  return "unknown";
}

double FlatFoliatedModel::operator_symbol(const Vec& xi) const {
  return 1.0 + transverse_frequencies(xi).squaredNorm() + drift_.dot(xi);
}

FlatFoliatedModel build_model(int n, int p, const Mat& leaf_basis, const Mat& metric,
                              const Vec& drift) {
  if (n < 2 || p < 1 || p >= n)
    throw ValidationError(Invariant::Dimension, "need n >= 2 and 1 <= p < n");
  if (leaf_basis.rows() != n || leaf_basis.cols() != p || metric.rows() != n ||
      metric.cols() != n || drift.size() != n)
    throw ValidationError(Invariant::Dimension, "input shapes do not match (n, p)");

  Eigen::JacobiSVD<Mat> svd(leaf_basis);
  const Vec sv = svd.singularValues();
  if (sv[p - 1] <= 1e-10 * std::max(1.0, sv[0]))
    throw ValidationError(Invariant::LeafRank, "leaf basis is rank deficient");

  if ((metric - metric.transpose()).cwiseAbs().maxCoeff() > 1e-12 * metric.cwiseAbs().maxCoeff())
    throw ValidationError(Invariant::MetricSymmetric, "metric is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (metric + metric.transpose()));
  if (eig.eigenvalues().minCoeff() <= 0.0)
    throw ValidationError(Invariant::MetricPositive, "metric has a non-positive eigenvalue");

  FlatFoliatedModel m;
  m.n_ = n;
  m.p_ = p;
  m.leaf_basis_ = leaf_basis;
  m.metric_ = 0.5 * (metric + metric.transpose());
  m.drift_ = drift;
  m.dual_metric_ = m.metric_.inverse();
  m.volume_ = std::sqrt(m.metric_.determinant());

  // g-orthonormalize V: B (B^T g B)^{-1/2} via Cholesky.
  const Mat gram = leaf_basis.transpose() * m.metric_ * leaf_basis;
  Eigen::LLT<Mat> llt(gram);
  m.leaf_frame_ = llt.matrixL().solve(leaf_basis.transpose()).transpose();

  // H = kernel of B^T g; take an orthonormal basis of it and g-orthonormalize.
  const Mat constraint = leaf_basis.transpose() * m.metric_;
  Eigen::FullPivLU<Mat> lu(constraint);
  Mat h = lu.kernel();
  const Mat hgram = h.transpose() * m.metric_ * h;
  Eigen::LLT<Mat> hllt(hgram);
  m.transverse_frame_ = hllt.matrixL().solve(h.transpose()).transpose();

  m.leaf_projector_ = m.leaf_frame_ * m.leaf_frame_.transpose() * m.metric_;
  m.transverse_projector_ = m.transverse_frame_ * m.transverse_frame_.transpose() * m.metric_;

  const double gnorm = std::sqrt(drift.dot(m.metric_ * drift));
  const double leaf_part = m.leaf_coordinates(drift).norm();
  if (leaf_part > 1e-12 * std::max(1.0, gnorm)) {
    std::ostringstream os;
    os << "drift has a leafwise component of g-length " << leaf_part;
    throw ValidationError(Invariant::DriftTransverse, os.str());
  }
  if (gnorm >= 1.0) {
    std::ostringstream os;
    os << "|c|_g = " << gnorm << " must be < 1";
    throw ValidationError(Invariant::DriftNorm, os.str());
  }
  return m;
}

ConormalVector make_conormal_unchecked(const Vec& x, const Vec& xi) {
  ConormalVector nu;
  nu.x_ = wrap_torus(x);
  nu.xi_ = xi;
  return nu;
}

ConormalVector make_conormal(const FlatFoliatedModel& model, const Vec& x, const Vec& xi) {
  if (x.size() != model.n() || xi.size() != model.n())
    throw ValidationError(Invariant::Dimension, "conormal vector has wrong dimension");
  const double norm = xi.norm();
  if (!(norm > 0.0)) throw ValidationError(Invariant::ConormalZero, "xi = 0");
  for (int i = 0; i < model.p(); ++i) {
    if (std::abs(xi.dot(model.leaf_basis().col(i))) >= 1e-10 * norm * model.leaf_basis().col(i).norm())
      throw ValidationError(Invariant::ConormalLeafComponent,
                            "xi does not annihilate leaf basis vector " + std::to_string(i));
  }
  return make_conormal_unchecked(x, xi);
}

HolonomyElement make_holonomy(const FlatFoliatedModel& model, const Vec& target, const Vec& shift) {
  if (target.size() != model.n() || shift.size() != model.n())
    throw ValidationError(Invariant::Dimension, "holonomy element has wrong dimension");
  const Vec off_leaf = shift - model.leaf_projector() * shift;
  if (off_leaf.norm() > 1e-10 * std::max(1.0, shift.norm()))
    throw ValidationError(Invariant::ShiftNotLeafwise, "shift is not in span(leaf_basis)");
  HolonomyElement g;
  g.target_ = wrap_torus(target);
  g.shift_ = shift;
  return g;
}

HolonomyElement unit_element(const FlatFoliatedModel& model, const Vec& x) {
  return make_holonomy(model, x, Vec::Zero(model.n()));
}

HolonomyElement compose(const FlatFoliatedModel& model, const HolonomyElement& first,
                        const HolonomyElement& second) {
  if (torus_distance(second.target(), first.source()) > 1e-10)
    throw ValidationError(Invariant::BasePointMismatch, "r(second) != s(first)");
  return make_holonomy(model, first.target(), first.shift() + second.shift());
}

ConormalVector holonomy_transport(const FlatFoliatedModel& model, const HolonomyElement& gamma,
                                  const ConormalVector& nu) {
  if (nu.x().size() != model.n())
    throw ValidationError(Invariant::Dimension, "conormal vector has wrong dimension");
  if (torus_distance(nu.x(), gamma.target()) > 1e-10)
    throw ValidationError(Invariant::BasePointMismatch, "pi(nu) != r(gamma)");
  return make_conormal_unchecked(nu.x() - gamma.shift(), nu.xi());
}

double transverse_symbol(const FlatFoliatedModel& model, const ConormalVector& nu) {
  return std::sqrt(nu.xi().dot(model.dual_metric() * nu.xi()));
}

double subprincipal_p(const FlatFoliatedModel& model, const ConormalVector& nu) {
  return model.drift().dot(nu.xi()) / (2.0 * transverse_symbol(model, nu));
}

SymbolFunction model_symbol(const FlatFoliatedModel& model) {
  const Mat gs = model.dual_metric();
  return [gs](const Vec&, const Vec& xi) { return std::sqrt(xi.dot(gs * xi)); };
}

ConormalVector sample_conormal(const FlatFoliatedModel& model, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec x(model.n());
  for (int i = 0; i < model.n(); ++i) x[i] = unif(rng);
  Vec eta(model.q());
  do {
    for (int i = 0; i < model.q(); ++i) eta[i] = gauss(rng);
  } while (eta.norm() < 1e-3);
  eta.normalize();
  return make_conormal(model, x, model.conormal_from_transverse(eta));
}

double verify_holonomy_invariance(const FlatFoliatedModel& model, int sample_count,
                                  std::mt19937_64& rng, const SymbolFunction& symbol) {
  const SymbolFunction p = symbol ? symbol : model_symbol(model);
  constexpr double h = 1e-5;
  double worst = 0.0;
  for (int k = 0; k < sample_count; ++k) {
    const ConormalVector nu = sample_conormal(model, rng);
    for (int i = 0; i < model.p(); ++i) {
      const Vec dir = model.leaf_frame().col(i);
      const double d = (p(nu.x() + h * dir, nu.xi()) - p(nu.x() - h * dir, nu.xi())) / (2.0 * h);
      worst = std::max(worst, std::abs(d));
    }
  }
  return worst;
}

}  // namespace foliatrace
