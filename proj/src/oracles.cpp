#include "foliatrace/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace foliatrace::oracle {

namespace {

double raw_bump(double support, double r) {
  const double u = r / support;
  if (std::abs(u) >= 1.0) return 0.0;
  return std::exp(1.0 / (u * u - 1.0));
}

// g-orthonormal leaf vectors by modified Gram-Schmidt, columns of the result.
Mat leaf_vectors(const RawModel& m) {
  Mat e = m.leaf_basis;
  for (int j = 0; j < m.p; ++j) {
    for (int i = 0; i < j; ++i) e.col(j) -= e.col(i).dot(m.metric * e.col(j)) * e.col(i);
    e.col(j) /= std::sqrt(e.col(j).dot(m.metric * e.col(j)));
  }
  return e;
}

Vec wrapped(const Vec& x) {
  Vec r(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) r[i] = x[i] - std::round(x[i]);
  return r;
}

// Psi(x) = integral of the bump over the hyperplane {x_1 = x}, on a uniform
// grid over [-S, S]; the trapezoid rule is spectrally accurate for it.
struct AbelTable {
  double h = 0.0;
  std::vector<double> x;
  std::vector<double> values;
  double mass = 0.0;

  AbelTable(int p, double support, int points) {
    if (p != 1 && p != 2) throw std::invalid_argument("bump oracle supports p = 1 and p = 2");
    if (points < 3) throw std::invalid_argument("bump oracle needs at least 3 points");
    h = 2.0 * support / (points - 1);
    for (int j = 0; j < points; ++j) {
      const double xj = -support + j * h;
      double v = 0.0;
      if (p == 1) {
        v = raw_bump(support, xj);
      } else {
        for (int k = 0; k < points; ++k) {
          const double yk = -support + k * h;
          v += raw_bump(support, std::hypot(xj, yk));
        }
        v *= h;
      }
      x.push_back(xj);
      values.push_back(v);
      mass += h * v;
    }
  }

  double transform(double k) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) acc += values[j] * std::cos(k * x[j]);
    return h * acc / mass;
  }
};

}  // namespace

std::vector<GridPeriod> grid_periods(const RawModel& model, double support, double t_max,
                                     double grid_step) {
  if (model.n - model.p != 1) throw std::invalid_argument("grid oracle needs codimension 1");
  if (!(grid_step > 0.0) || !(t_max > 0.0) || !(support > 0.0))
    throw std::invalid_argument("grid oracle needs positive step, t_max and support");
  const int n = model.n, p = model.p;
  const Mat e = leaf_vectors(model);

  // Unit normal: the standard basis vector with the largest g-orthogonal
  // residual against the leaf, normalized.
  Vec u = Vec::Zero(n);
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    Vec c = Vec::Unit(n, i);
    for (int j = 0; j < p; ++j) c -= e.col(j).dot(model.metric * c) * e.col(j);
    const double len = std::sqrt(c.dot(model.metric * c));
    if (len > best) {
      best = len;
      u = c / len;
    }
  }

  const double h = grid_step;
  const int nt = static_cast<int>(std::ceil(t_max / h)) + 1;
  const int nw = static_cast<int>(std::ceil(support / h));
  const int side_w = 2 * nw + 1;
  double scale = u.norm();
  for (int j = 0; j < p; ++j) scale += e.col(j).norm();
  const double threshold = h * scale;

  auto defect = [&](double t, const Vec& a, int side) {
    return wrapped(side * t * u + e * a).norm();
  };
  auto grid_a = [&](long idx) {
    Vec a(p);
    for (int j = 0; j < p; ++j) {
      a[j] = (static_cast<int>(idx % side_w) - nw) * h;
      idx /= side_w;
    }
    return a;
  };
  long wcount = 1;
  for (int j = 0; j < p; ++j) wcount *= side_w;

  std::vector<GridPeriod> found;
  for (int side : {1, -1}) {
    for (int it = 1; it <= nt; ++it) {
      const double t = it * h;
      for (long iw = 0; iw < wcount; ++iw) {
        const Vec a = grid_a(iw);
        if (a.norm() > support + h) continue;
        const double d = defect(t, a, side);
        if (d > threshold) continue;
        // Keep grid-local minima only.
        bool minimal = defect(t - h, a, side) >= d && defect(t + h, a, side) >= d;
        for (int j = 0; j < p && minimal; ++j) {
          Vec da = Vec::Zero(p);
          da[j] = h;
          minimal = defect(t, a - da, side) >= d && defect(t, a + da, side) >= d;
        }
        if (!minimal) continue;

        // Gauss-Newton on r(t, a) = wrap(side t u + E a).
        Mat jac(n, p + 1);
        jac.col(0) = side * u;
        jac.rightCols(p) = e;
        Vec z(p + 1);
        z << t, a;
        for (int iter = 0; iter < 50; ++iter) {
          const Vec r = wrapped(side * z[0] * u + e * z.tail(p));
          const Vec step = jac.colPivHouseholderQr().solve(r);
          z -= step;
          if (step.norm() < 1e-15) break;
        }
        GridPeriod g;
        g.t = z[0];
        g.w = z.tail(p);
        g.w_length = g.w.norm();
        g.side = side;
        g.defect = defect(g.t, g.w, side);
        if (g.defect < 1e-10 && g.t > 1e-9 && g.t <= t_max * (1.0 + 1e-9) && g.w_length < support)
          found.push_back(g);
      }
    }
  }

  std::sort(found.begin(), found.end(), [](const GridPeriod& a, const GridPeriod& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.side != b.side) return a.side > b.side;
    return std::lexicographical_compare(a.w.data(), a.w.data() + a.w.size(), b.w.data(),
                                        b.w.data() + b.w.size());
  });
  std::vector<GridPeriod> unique;
  for (const GridPeriod& g : found) {
    const bool dup = std::any_of(unique.begin(), unique.end(), [&](const GridPeriod& o) {
      return o.side == g.side && std::abs(o.t - g.t) < 1e-8 && (o.w - g.w).norm() < 1e-8;
    });
    if (!dup) unique.push_back(g);
  }
  std::sort(unique.begin(), unique.end(), [](const GridPeriod& a, const GridPeriod& b) {
    if (std::abs(a.t - b.t) > 1e-8) return a.t < b.t;
    if (a.side != b.side) return a.side > b.side;
    return std::lexicographical_compare(a.w.data(), a.w.data() + a.w.size(), b.w.data(),
                                        b.w.data() + b.w.size());
  });
  return unique;
}

double bump_value(int p, double support, double r) {
  const AbelTable table(p, support, p == 1 ? 20001 : 2001);
  return raw_bump(support, r) / table.mass;
}

double bump_transform(int p, double support, double k, int points) {
  return AbelTable(p, support, points).transform(k);
}

namespace {

// Transverse part of the covector: xi minus its restriction to the leaf,
// carried back to a covector by the metric.
double eigenvalue_with(const RawModel& model, const Mat& e, const Mat& ginv, const Vec& xi) {
  Vec xh = xi;
  for (int j = 0; j < model.p; ++j) xh -= xi.dot(e.col(j)) * (model.metric * e.col(j));
  return std::sqrt(1.0 + xh.dot(ginv * xh) + model.drift.dot(xi));
}

}  // namespace

double plane_wave_eigenvalue(const RawModel& model, const VecI& m) {
  return eigenvalue_with(model, leaf_vectors(model), model.metric.inverse(), kTwoPi * m.cast<double>());
}

std::vector<cplx> brute_force_traces(const RawModel& model, const std::vector<RawTerm>& terms,
                                     int box, const std::vector<ProbePoint>& probes) {
  const Mat e = leaf_vectors(model);
  const Mat ginv = model.metric.inverse();
  std::vector<AbelTable> tables;
  for (const RawTerm& term : terms) tables.emplace_back(model.p, term.support, model.p == 1 ? 8001 : 2001);
  std::unordered_map<double, cplx> weights;

  std::vector<long double> re(probes.size(), 0.0L), im(probes.size(), 0.0L);
  VecI m = VecI::Constant(model.n, -box);
  while (true) {
    const Vec xi = kTwoPi * m.cast<double>();
    double leaf2 = 0.0;
    for (int j = 0; j < model.p; ++j) leaf2 += std::pow(xi.dot(e.col(j)), 2);
    auto [it, fresh] = weights.try_emplace(leaf2, 0.0);
    if (fresh)
      for (std::size_t i = 0; i < terms.size(); ++i)
        it->second += terms[i].phi_mean * tables[i].transform(std::sqrt(leaf2));
    const cplx weight = it->second;
    if (weight != 0.0) {
      const double lambda = eigenvalue_with(model, e, ginv, xi);
      for (std::size_t k = 0; k < probes.size(); ++k) {
        const ProbePoint& f = probes[k];
        const double d = lambda - f.s;
        const cplx term = weight * std::sqrt(kTwoPi) * f.width *
                          std::exp(-0.5 * f.width * f.width * d * d) * std::polar(1.0, f.t0 * d);
        re[k] += term.real();
        im[k] += term.imag();
      }
    }

    int i = 0;
    while (i < model.n && m[i] == box) m[i++] = -box;
    if (i == model.n) break;
    ++m[i];
  }
  std::vector<cplx> out;
  for (std::size_t k = 0; k < probes.size(); ++k)
    out.emplace_back(static_cast<double>(re[k]), static_cast<double>(im[k]));
  return out;
}

cplx poisson_product_trace(double support, double t0, double s, double width) {
  double leaf = 0.0;
  for (int j = -static_cast<int>(std::ceil(support)); j <= static_cast<int>(std::ceil(support)); ++j)
    leaf += bump_value(1, support, std::abs(j));
  cplx wave = 0.0;
  const int lo = static_cast<int>(std::floor(t0 - 40.0 * width)) - 1;
  const int hi = static_cast<int>(std::ceil(t0 + 40.0 * width)) + 1;
  for (int k = lo; k <= hi; ++k)
    wave += std::exp(-0.5 * std::pow((k - t0) / width, 2)) * std::polar(1.0, -s * k);
  return 2.0 * leaf * wave;
}

}  // namespace foliatrace::oracle
