#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace foliatrace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecI = Eigen::VectorXi;
using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Neumaier-compensated accumulator. Summation order is the caller's order,
/// so identical input sequences give bit-identical results.
template <typename Scalar>
class CompensatedSum {
 public:
  void add(Scalar x) {
    const Scalar t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  Scalar value() const { return sum_ + comp_; }

 private:
  Scalar sum_{0};
  Scalar comp_{0};
};

template <typename Scalar>
class CompensatedSum<std::complex<Scalar>> {
 public:
  void add(std::complex<Scalar> z) {
    re_.add(z.real());
    im_.add(z.imag());
  }
  std::complex<Scalar> value() const { return {re_.value(), im_.value()}; }

 private:
  CompensatedSum<Scalar> re_;
  CompensatedSum<Scalar> im_;
};

/// Distance between two points of R^n / Z^n in the sup norm of the
/// coordinate lift.
inline double torus_distance(const Vec& a, const Vec& b) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    double r = a[i] - b[i];
    r -= std::round(r);
    d = std::max(d, std::abs(r));
  }
  return d;
}

inline Vec wrap_torus(const Vec& x) {
  Vec y = x;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    y[i] -= std::floor(y[i]);
    if (y[i] >= 1.0) y[i] -= 1.0;
  }
  return y;
}

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int intervals = 0;
};

namespace detail {
// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename F>
std::pair<double, double> gk15(F&& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kron = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double fsum = f(c - dx) + f(c + dx);
    kron += kWgk[j] * fsum;
    if (j % 2 == 1) gauss += kWg[j / 2] * fsum;
  }
  return {kron * h, std::abs((kron - gauss) * h)};
}
}  // namespace detail

/// Adaptive Gauss-Kronrod (7/15) quadrature on [a, b]. The interval is
/// first split into `initial_panels` pieces, which matters for oscillatory
/// integrands. Refinement stops once the error estimate reaches the
/// roundoff level of the panel sums.
template <typename F>
QuadratureResult integrate_adaptive(F&& f, double a, double b, double rel_tol,
                                    double abs_tol, int initial_panels = 1,
                                    int max_intervals = 20000) {
  struct Panel {
    double a, b, value, error;
  };
  auto by_error = [](const Panel& x, const Panel& y) { return x.error < y.error; };
  std::vector<Panel> heap;
  heap.reserve(static_cast<std::size_t>(initial_panels) * 4);
  const double width = (b - a) / initial_panels;
  double value = 0.0, error = 0.0, magnitude = 0.0;
  for (int i = 0; i < initial_panels; ++i) {
    const double lo = a + i * width;
    const double hi = (i + 1 == initial_panels) ? b : lo + width;
    auto [v, e] = detail::gk15(f, lo, hi);
    heap.push_back({lo, hi, v, e});
    value += v;
    error += e;
    magnitude += std::abs(v);
  }
  std::make_heap(heap.begin(), heap.end(), by_error);
  constexpr double kRoundoff = 50.0 * std::numeric_limits<double>::epsilon();
  while (static_cast<int>(heap.size()) < max_intervals) {
    const double target = std::max({abs_tol, rel_tol * std::abs(value), kRoundoff * magnitude});
    if (error <= target) break;
    std::pop_heap(heap.begin(), heap.end(), by_error);
    const Panel p = heap.back();
    heap.pop_back();
    const double mid = 0.5 * (p.a + p.b);
    auto [v1, e1] = detail::gk15(f, p.a, mid);
    auto [v2, e2] = detail::gk15(f, mid, p.b);
    heap.push_back({p.a, mid, v1, e1});
    std::push_heap(heap.begin(), heap.end(), by_error);
    heap.push_back({mid, p.b, v2, e2});
    std::push_heap(heap.begin(), heap.end(), by_error);
    value += v1 + v2 - p.value;
    error += e1 + e2 - p.error;
    magnitude += std::abs(v1) + std::abs(v2) - std::abs(p.value);
  }
  // Final sums in position order with compensation, independent of the
  // refinement history.
  std::sort(heap.begin(), heap.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
  CompensatedSum<double> v, e;
  for (const auto& p : heap) {
    v.add(p.value);
    e.add(p.error);
  }
  return {v.value(), e.value(), static_cast<int>(heap.size())};
}

/// Gauss-Legendre nodes/weights on [-1, 1] (Newton iteration on P_n).
inline std::pair<Vec, Vec> gauss_legendre(int n) {
  Vec x(n), w(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

/// Integer points m with m^T form m <= bound (form SPD), flattened row by
/// row into a vector of length n * count. Fincke-Pohst recursion on the
/// Cholesky factor; the order is deterministic but not lexicographic.
inline std::vector<int> lattice_points_in_ellipsoid(const Mat& form, double bound) {
  const Mat r = Eigen::LLT<Mat>(form).matrixU();
  const int n = static_cast<int>(r.rows());
  std::vector<int> out;
  std::vector<int> m(static_cast<std::size_t>(n), 0);
  auto recurse = [&](auto&& self, int i, double remaining) -> void {
    double c = 0.0;
    for (int j = i + 1; j < n; ++j) c += r(i, j) * m[static_cast<std::size_t>(j)];
    c /= r(i, i);
    const double half = std::sqrt(std::max(0.0, remaining)) / r(i, i);
    const int lo = static_cast<int>(std::ceil(-c - half - 1e-9));
    const int hi = static_cast<int>(std::floor(-c + half + 1e-9));
    for (int k = lo; k <= hi; ++k) {
      m[static_cast<std::size_t>(i)] = k;
      const double term = r(i, i) * (k + c);
      const double rest = remaining - term * term;
      if (rest < -1e-9 * bound) continue;
      if (i == 0)
        out.insert(out.end(), m.begin(), m.end());
      else
        self(self, i - 1, rest);
    }
  };
  recurse(recurse, n - 1, bound);
  return out;
}

}  // namespace foliatrace
