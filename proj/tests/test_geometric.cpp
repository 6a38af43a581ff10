#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "common.hpp"
#include "foliatrace/geometric.hpp"
#include "foliatrace/oracles.hpp"

#include <sstream>

using namespace foliatrace;
using namespace foliatrace::testing;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

GroupoidKernel unit_kernel(int n, double support, double mean = 1.0) {
  return GroupoidKernel::separable(TrigPolynomial::constant(n, mean), BumpProfile(1, support));
}

oracle::RawModel raw(const FlatFoliatedModel& m) {
  return {m.n(), m.p(), m.leaf_basis(), m.metric(), m.drift()};
}

}  // namespace

TEST_CASE("flow examples") {
  const FlatFoliatedModel prod = product_model();
  const ConormalVector nu = make_conormal(prod, v2(0.2, 0.3), v2(0, 2));
  const ConormalVector out = flow(prod, nu, 0.45);
  CHECK(out.x()[0] == doctest::Approx(0.2));
  CHECK(torus_distance(out.x(), v2(0.2, 0.75)) < 1e-15);
  CHECK(out.xi() == nu.xi());
  CHECK(torus_distance(flow(prod, nu, 1.0).x(), nu.x()) < 1e-15);
  CHECK_THROWS_AS(flow(prod, make_conormal_unchecked(v2(0, 0), v2(0, 0)), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(flow(prod, nu, 1.0, Integrator::rk4(0.0)), std::invalid_argument);
}

TEST_CASE("RK4 flow against the exact flow") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const FlatFoliatedModel m = random_model(rng, 2 + trial % 2, 1);
    const ConormalVector nu = sample_conormal(m, rng);
    for (double t : {0.5, 3.0, 10.0}) {
      const ConormalVector a = flow(m, nu, t);
      const ConormalVector b = flow(m, nu, t, Integrator::rk4(1e-2));
      CHECK(torus_distance(a.x(), b.x()) < 1e-8);
      CHECK((a.xi() - b.xi()).norm() < 1e-12);
    }
  }
}

TEST_CASE("flow group law and energy conservation") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const FlatFoliatedModel m = random_model(rng, 3, 1 + trial % 2);
    const ConormalVector nu = sample_conormal(m, rng);
    const double s = u(rng), t = u(rng);
    const ConormalVector two = flow(m, flow(m, nu, s), t);
    const ConormalVector one = flow(m, nu, s + t);
    CHECK(torus_distance(two.x(), one.x()) < 1e-12);
    CHECK(transverse_symbol(m, one) == doctest::Approx(transverse_symbol(m, nu)).epsilon(1e-14));
    const FlowState st = advance(m, {nu, 0.0}, s);
    CHECK(st.t == s);
  }
}

TEST_CASE("relative periods: product model") {
  const FlatFoliatedModel prod = product_model();
  const auto comps = find_relative_periods(prod, unit_kernel(2, 0.5), 3.0);
  // v = (0, +-k) for k = 1..3, each with both signs of t.
  REQUIRE(comps.size() == 12);
  for (int k = 1; k <= 3; ++k) {
    const auto* c = &comps[4 * (k - 1)];
    CHECK(c[0].t == doctest::Approx(k));
    CHECK(c[1].t == doctest::Approx(k));
    CHECK(c[2].t == doctest::Approx(-k));
    CHECK(c[0].v == VecI(Eigen::Vector2i(0, -k)));
    CHECK(c[1].v == VecI(Eigen::Vector2i(0, k)));
    CHECK(c[0].direction.isApprox(v2(0, -1)));
    CHECK(c[1].direction.isApprox(v2(0, 1)));
    CHECK(c[3].direction.isApprox(v2(0, -1)));
    for (int j = 0; j < 4; ++j) {
      CHECK(c[j].shift_length == 0.0);
      CHECK(c[j].dimension == 2);
    }
  }
  // Support radius above 1 adds the horizontal shifts v = (+-1, +-1).
  CHECK(find_relative_periods(prod, unit_kernel(2, 1.5), 1.0).size() == 12);
}

TEST_CASE("relative periods: Kronecker model") {
  const FlatFoliatedModel kron = kronecker_model();
  const double a = kGolden;
  const auto comps = find_relative_periods(kron, unit_kernel(2, 2.0), 1.0);
  const auto it = std::find_if(comps.begin(), comps.end(),
                               [](const auto& c) { return c.v == VecI(Eigen::Vector2i(0, 1)) && c.t > 0; });
  REQUIRE(it != comps.end());
  CHECK(it->t == doctest::Approx(1.0 / std::sqrt(1 + a * a)).epsilon(1e-14));
  CHECK(it->shift_length == doctest::Approx(a / std::sqrt(1 + a * a)).epsilon(1e-14));
  CHECK(it->shift_length == doctest::Approx(0.526).epsilon(1e-3));
  for (const auto& c : comps) {
    ConormalVector nu = make_conormal_unchecked(v2(0.37, 0.11), c.direction);
    CHECK(fixed_point_residual(kron, c, nu) < 1e-12);
  }
}

TEST_CASE("relative periods against the grid oracle") {
  const FlatFoliatedModel kron = kronecker_model();
  const auto lib = find_relative_periods(kron, unit_kernel(2, 2.0), 3.0);
  const auto grid = oracle::grid_periods(raw(kron), 2.0, 3.0);
  std::size_t positive = 0;
  for (const auto& c : lib) {
    if (c.t <= 0) continue;
    ++positive;
    const bool hit = std::any_of(grid.begin(), grid.end(), [&](const oracle::GridPeriod& g) {
      return std::abs(g.t - c.t) < 1e-6 && std::abs(g.w_length - c.shift_length) < 1e-6;
    });
    CHECK_MESSAGE(hit, "t=" << c.t);
  }
  CHECK(positive == grid.size());
}

TEST_CASE("relative periods: empty cases") {
  const FlatFoliatedModel prod = product_model();
  CHECK(find_relative_periods(prod, unit_kernel(2, 0.5), 0.9).empty());
  CHECK(find_relative_periods(prod, GroupoidKernel{}, 3.0).empty());
  CHECK(find_relative_periods(prod, unit_kernel(2, 0.5), 0.0).empty());
}

TEST_CASE("saturation") {
  std::mt19937_64 rng(47);
  const FlatFoliatedModel kron = kronecker_model();
  for (const auto& c : find_relative_periods(kron, unit_kernel(2, 2.0), 2.0)) {
    const SaturationReport r = saturation_check(kron, c, 20, rng);
    CHECK(r.saturated);
    CHECK(r.samples == 20);
    CHECK(r.max_residual < 1e-10);
  }
  // Half of the torus is not invariant under leafwise translation.
  const FlatFoliatedModel prod = product_model();
  const auto c = find_relative_periods(prod, unit_kernel(2, 0.5), 1.0).front();
  const ConormalSet half = [&](const ConormalVector& nu) {
    return nu.x()[0] < 0.5 && fixed_point_residual(prod, c, nu) < 1e-10;
  };
  CHECK_FALSE(saturation_check(prod, c, 50, rng, half).saturated);
}

TEST_CASE("cleanness") {
  std::mt19937_64 rng(53);
  const auto c1 = find_relative_periods(product_model(), unit_kernel(2, 0.5), 1.0).front();
  const CleannessReport r1 = cleanness_check(product_model(), c1, 5, rng);
  CHECK(r1.clean);
  CHECK(r1.dim_found == 2);
  CHECK(r1.max_defect < 1e-12);

  const FlatFoliatedModel t3 = t3_model();
  const auto c2 = find_relative_periods(t3, unit_kernel(3, 2.0), 1.0).front();
  const CleannessReport r2 = cleanness_check(t3, c2, 5, rng);
  CHECK(r2.clean);
  CHECK(r2.dim_found == 3);

  // The linearized return map fixes exactly dy and the radial deta.
  const Mat m = linearized_return_map(t3, c2);
  CHECK(fixed_subspace(m).cols() == 3);
  CHECK_FALSE(cleanness_check(t3, RelativePeriodComponent{}, 1, rng).clean);
}

TEST_CASE("fixed-point density") {
  const FlatFoliatedModel prod = product_model();
  const auto c = find_relative_periods(prod, unit_kernel(2, 0.5), 1.0).front();
  const DensityResult d = fixed_point_density(prod, c);
  CHECK(d.fixed_dim == 2);
  CHECK(d.mass == doctest::Approx(prod.volume()));

  const FlatFoliatedModel t3 = t3_model();
  const auto c3 = find_relative_periods(t3, unit_kernel(3, 2.0), 2.0);
  for (const auto& comp : c3) {
    const DensityResult d3 = fixed_point_density(t3, comp);
    CHECK(d3.fixed_dim == 3);
    // One transverse direction is sheared by t / |eta| with |eta| = 1.
    CHECK(d3.complement_factor == doctest::Approx(1.0 / std::sqrt(std::abs(comp.t))).epsilon(1e-12));
  }
}

TEST_CASE("leading coefficient") {
  const FlatFoliatedModel prod = product_model();
  const GroupoidKernel k = unit_kernel(2, 0.5);
  const double psi0 = oracle::bump_value(1, 0.5, 0.0);
  for (const auto& c : find_relative_periods(prod, k, 3.0)) {
    const cplx a = leading_coefficient(prod, k, c);
    CHECK(a.real() == doctest::Approx(psi0 / kTwoPi).epsilon(1e-10));
    CHECK(a.imag() == 0.0);
  }

  const FlatFoliatedModel drift = product_model(v2(0, 0.1));
  // Upward direction at t = 1.
  const auto dc = find_relative_periods(drift, k, 1.0)[1];
  REQUIRE(dc.direction.isApprox(v2(0, 1)));
  const cplx ad = leading_coefficient(drift, k, dc);
  CHECK(std::arg(ad) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(subprincipal_phase(drift, dc) == doctest::Approx(0.05).epsilon(1e-12));

  const GroupoidKernel doubled = unit_kernel(2, 0.5, 2.0);
  const cplx a1 = leading_coefficient(prod, k, dc), a2 = leading_coefficient(prod, doubled, dc);
  CHECK(std::abs(a2 - 2.0 * a1) < 1e-14);
  CHECK(fixed_point_density(prod, dc).mass == 1.0);

  const DirectionWeight upward = [](const Vec& eta) { return eta[0] > 0 ? 1.0 : 0.0; };
  const auto both = find_relative_periods(prod, k, 1.0);
  CHECK(leading_coefficient(prod, k, both[0], upward) == cplx(0.0));
  CHECK(std::abs(leading_coefficient(prod, k, both[1], upward)) > 0.0);
  CHECK(std::arg(leading_coefficient(drift, k, both[0])) == doctest::Approx(-0.05).epsilon(1e-12));
}

TEST_CASE("torus average") {
  std::map<TrigPolynomial::Frequency, cplx> c;
  c[{0, 0}] = 0.7;
  c[{3, -1}] = cplx(0.2, 0.1);
  c[{-3, 1}] = cplx(0.2, -0.1);
  const TrigPolynomial phi(c);
  CHECK(torus_average(phi, 2) == doctest::Approx(0.7).epsilon(1e-12));
  const TrigPolynomial moved = phi.translated(v2(0.31, 0.77));
  CHECK(torus_average(moved, 2) == doctest::Approx(torus_average(phi, 2)).epsilon(1e-12));
  CHECK(torus_average(TrigPolynomial::constant(2, 0.0), 2) == 0.0);
}

TEST_CASE("periods CSV") {
  const FlatFoliatedModel prod = product_model();
  std::ostringstream os;
  write_periods_csv(os, find_relative_periods(prod, unit_kernel(2, 0.5), 2.0));
  const std::string csv = os.str();
  CHECK(csv.substr(0, csv.find('\n')) == "t,v,|w|,d_j,sigma_j,Re(alpha0),Im(alpha0),density_mass");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
  CHECK(csv.find("\n1,0 1,0,2,") != std::string::npos);
}

TEST_CASE("property suite on random models") {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 2;
    const FlatFoliatedModel m = random_model(rng, n, 1);
    const GroupoidKernel k = unit_kernel(n, 1.0);
    const auto comps = find_relative_periods(m, k, 1.5);
    for (const auto& c : comps) {
      const ConormalVector nu = make_conormal_unchecked(sample_conormal(m, rng).x(), c.direction);
      CHECK(fixed_point_residual(m, c, nu) < 1e-10);
      CHECK(std::abs(c.t) <= 1.5);
      CHECK(c.shift_length < 1.0);
    }
    if (comps.empty()) continue;
    const CleannessReport cr = cleanness_check(m, comps.front(), 3, rng);
    CHECK_MESSAGE(cr.clean, cr.failure);
    CHECK(saturation_check(m, comps.front(), 5, rng).saturated);
  }
}
