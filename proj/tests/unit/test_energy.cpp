#include <cmath>
#include <numbers>

#include "doctest.h"
#include "modlab/energy.hpp"
#include "modlab/quadrature.hpp"

using namespace modlab;
using std::numbers::pi;

namespace {

PotentialSpec spec_of(int d, double s, double a) {
  PotentialSpec p;
  p.d = d;
  p.s = s;
  p.a = a;
  return p;
}

EwaldOptions tight() {
  EwaldOptions o;
  o.tol = 1e-13;
  return o;
}

// Torus Bessel kernel of order 2 on the unit circle.
double bessel2_circle(double x) {
  x -= std::floor(x);
  return std::cosh(x - 0.5) / (2.0 * std::sinh(0.5));
}

}  // namespace

TEST_CASE("modulated energy basics") {
  TorusGeometry g{1, 1.0};
  PeriodizedKernel k(spec_of(1, 0.0, 1.8), g, tight());
  Configuration two{1, {0.0, 0.5}, g};
  auto e = modulated_energy(two, TorusDensity::uniform(g), k);
  CHECK(e.F_N == doctest::Approx(-std::log(2.0) / 4).epsilon(1e-11));
  CHECK(e.F_N == e.pair_term - e.cross_term + e.self_term);
  CHECK(e.lambda == doctest::Approx(0.5));

  PeriodizedKernel k2(spec_of(2, 0.5, 2.5), TorusGeometry{2, 1.0}, tight());
  Philox rng(3, 0);
  auto c = sample_iid(TorusDensity::uniform(TorusGeometry{2, 1.0}), 20, rng);
  auto e2 = modulated_energy(c, TorusDensity::uniform(TorusGeometry{2, 1.0}), k2);
  CHECK(e2.cross_term == 0.0);
  CHECK(e2.self_term == 0.0);

  Configuration same{1, {0.2, 0.2}, g};
  CHECK_THROWS_AS(modulated_energy(same, TorusDensity::uniform(g), k), collision_error);
}

TEST_CASE("translation and relabeling invariance") {
  for (int d : {1, 2}) {
    TorusGeometry g{d, 1.4};
    PeriodizedKernel k(spec_of(d, 0.5, d + 0.8), g, tight());
    Philox rng(11, d);
    auto mu = TorusDensity::random(g, 3, 0.7, rng);
    auto c = sample_iid(mu, 24, rng);
    const double F = modulated_energy(c, mu, k).F_N;
    std::vector<double> shift(d);
    for (auto& v : shift) v = 0.37 * g.L;
    auto cs = c;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      for (int a = 0; a < d; ++a) cs.x[i * d + a] += shift[a];
      g.wrap(cs.point(i));
    }
    auto mus = TorusDensity::from_poly(mu.p.shifted(shift));
    CHECK(std::abs(modulated_energy(cs, mus, k).F_N - F) < 1e-12);
    auto cr = c;
    for (std::size_t i = 0; i < c.size(); ++i)
      for (int a = 0; a < d; ++a) cr.x[i * d + a] = c.x[(c.size() - 1 - i) * d + a];
    CHECK(std::abs(modulated_energy(cr, mu, k).F_N - F) < 1e-12);
  }
}

TEST_CASE("splitting identity") {
  struct Case {
    int d;
    double s, a, eta;
    std::size_t N;
  };
  for (auto cs : {Case{1, 0.5, 1.8, 0.05, 32}, Case{1, 0.0, 1.8, 0.2, 32}, Case{2, 1.0, 2.9, 0.1, 25},
                  Case{2, 0.0, 2.5, 0.03, 36}, Case{1, 0.5, 1.8, 0.002, 16}}) {
    TorusGeometry g{cs.d, 1.0};
    PeriodizedKernel k(spec_of(cs.d, cs.s, cs.a), g, tight());
    Philox rng(21, cs.N);
    auto mu = TorusDensity::random(g, 2, 0.8, rng);
    auto c = sample_iid(mu, cs.N, rng);
    auto t = splitting_identity_check(c, mu, k, cs.eta);
    CHECK(t.residual <= 1e-10);
    CHECK(t.near_pairs >= -1e-10);
    CHECK(t.f_self >= -1e-10);
    CHECK(t.g_quadratic >= -1e-10);
  }
}

TEST_CASE("splitting identity for the bessel profile") {
  TorusGeometry g{1, 1.0};
  EwaldOptions o;
  o.phi = Profile::bessel;
  o.tol = 1e-9;
  o.eta = 0.25;
  PeriodizedKernel k(spec_of(1, 0.5, 2.9), g, o);
  Philox rng(5, 5);
  auto mu = TorusDensity::random(g, 2, 0.5, rng);
  auto c = sample_iid(mu, 12, rng);
  auto t = splitting_identity_check(c, mu, k, 0.2, 1e-9);
  CHECK(t.residual <= 1e-8);
}

TEST_CASE("nearest-neighbor scales") {
  TorusGeometry g{1, 1.0};
  auto r = nearest_neighbor_scales(Configuration{1, {0.0, 0.3}, g}, 0.2);
  CHECK(r[0] == doctest::Approx(0.05));
  CHECK(r[1] == doctest::Approx(0.05));
  r = nearest_neighbor_scales(Configuration{1, {0.0, 0.1}, g}, 0.2);
  CHECK(r[0] == doctest::Approx(0.025));
  r = nearest_neighbor_scales(Configuration{1, {0.0, 0.9}, g}, 0.5);
  CHECK(r[0] == doctest::Approx(0.025));
  CHECK_THROWS(nearest_neighbor_scales(Configuration{1, {0.1}, g}, 0.2));
}

TEST_CASE("small-scale bounds") {
  TorusGeometry g{1, 1.0};
  const std::size_t N = 64;
  PeriodizedKernel k(spec_of(1, 0.5, 1.8), g, tight());
  auto mu = TorusDensity::uniform(g);
  Philox rng(1, 2);
  auto lat = jittered_lattice(g, N, 0.0, rng);
  const double lam = microscale(N, mu.linf, 1);
  // lattice spacing equals lambda; stay just inside so rounding cannot admit a pair
  auto b = small_scale_bound_check(lat, mu, k, lam * (1 - 1e-9));
  CHECK(b.lhs_pairs == 0.0);

  // move point 1 next to point 0 at distance eta / 2
  const double eta = 0.5 * lam;
  auto moved = lat;
  moved.x[1] = moved.x[0] + 0.5 * eta;
  auto b2 = small_scale_bound_check(moved, mu, k, eta);
  const double expected = 2.0 * std::pow(0.5 * eta, -0.5) / (2.0 * N * N);
  CHECK(b2.lhs_pairs == doctest::Approx(expected).epsilon(1e-13));
  const double C = b2.needed_C();
  CHECK(b2.ratio_pairs(C) <= 1.0 + 1e-12);
  CHECK(b2.ratio_neighbors(C) <= 1.0 + 1e-12);
}

TEST_CASE("coercivity norm") {
  TorusGeometry g{1, 1.0};
  auto mu = TorusDensity::uniform(g);
  Configuration one{1, {0.3}, g};
  auto r1 = coercivity_norm(one, mu, 2.0);
  CHECK(std::abs(r1.value - (0.5 / std::tanh(0.5) - 1.0)) < 1e-8);
  CHECK(r1.offdiag_tail_bound == 0.0);
  CHECK(periodic_bessel(std::vector<double>{0.2}, 2.0, g) == doctest::Approx(bessel2_circle(0.2)).epsilon(1e-13));

  // real-space oracle for several points
  Philox rng(8, 1);
  auto c = sample_iid(mu, 16, rng);
  double ref = -1.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) ref += bessel2_circle(c.x[i] - c.x[j]) / (16.0 * 16.0);
  auto rc = coercivity_norm(c, mu, 2.0, 4096);
  CHECK(std::abs(rc.value - ref) < 1e-6);
  CHECK(std::abs(rc.value - ref) <= rc.offdiag_tail_bound);

  CHECK_THROWS(coercivity_norm(one, mu, 1.0));

  // translation of both config and density
  TorusGeometry g2{2, 1.0};
  auto mu2 = TorusDensity::random(g2, 2, 0.6, rng);
  auto c2 = sample_iid(mu2, 9, rng);
  const double v = coercivity_norm(c2, mu2, 3.0).value;
  const double sh[] = {0.21, 0.64};
  auto c3 = c2;
  for (std::size_t i = 0; i < c3.size(); ++i) {
    c3.x[2 * i] += sh[0];
    c3.x[2 * i + 1] += sh[1];
    g2.wrap(c3.point(i));
  }
  CHECK(std::abs(coercivity_norm(c3, TorusDensity::from_poly(mu2.p.shifted(sh)), 3.0).value - v) < 1e-12);
}

TEST_CASE("coercivity norm halves with N for iid samples") {
  TorusGeometry g{1, 1.0};
  Philox rng(17, 3);
  auto mu = TorusDensity::random(g, 3, 0.5, rng);
  auto mean = [&](std::size_t N) {
    double s = 0.0;
    for (int t = 0; t < 60; ++t) s += coercivity_norm(sample_iid(mu, N, rng), mu, 2.0).value;
    return s / 60;
  };
  const double ratio = mean(64) / mean(128);
  CHECK(ratio > 2.0 / 1.5);
  CHECK(ratio < 2.0 * 1.5);
}

TEST_CASE("lower bound diagnostic") {
  TorusGeometry g{1, 1.0};
  PeriodizedKernel k(spec_of(1, 0.0, 1.8), g, tight());
  auto mu = TorusDensity::uniform(g);
  Philox rng(2, 2);
  auto lat = jittered_lattice(g, 64, 0.0, rng);
  auto s = lower_bound_sample(lat, mu, k);
  CHECK(s.log_term == doctest::Approx(std::log(64.0) / 128.0));
  CHECK(std::isfinite(s.needed_C()));
  auto cl = two_cluster(g, 64, 0.05, rng);
  CHECK(modulated_energy(cl, mu, k).F_N > modulated_energy(lat, mu, k).F_N);
  CHECK(lower_bound_diagnostic({lat, cl}, mu, k) == doctest::Approx(s.needed_C()));
}

TEST_CASE("gaussian potential in whole space") {
  for (double s : {0.0, 0.5}) {
    GaussianDensity mu(1, 0.7, s);
    for (double x : {0.0, 0.3, 1.9}) {
      auto f = [&](double t) {
        const double u = std::exp(t);
        return u * riesz_radial(u, s) * (mu.density(std::vector<double>{x + u}) + mu.density(std::vector<double>{x - u}));
      };
      const double br[] = {-60.0, -5.0, 0.0, std::log(14.0)};
      const double ref = integrate_pieces(f, br, 1e-14, 1e-13);
      CHECK(mu.potential(std::vector<double>{x}) == doctest::Approx(ref).epsilon(1e-10));
    }
    auto h = [&](double y) { return mu.potential(std::vector<double>{y}) * mu.density(std::vector<double>{y}); };
    const double br[] = {-12.0, 0.0, 12.0};
    CHECK(mu.self_energy() == doctest::Approx(integrate_pieces(h, br, 1e-14, 1e-12)).epsilon(1e-9));
  }
  for (double s : {0.0, 1.0}) {
    GaussianDensity mu(2, 0.6, s);
    const std::vector<double> x = {0.4, -0.9};
    double gr[2], H[4];
    mu.potential_gradient(x, gr);
    mu.potential_hessian(x, H);
    const double e = 1e-5;
    for (int a = 0; a < 2; ++a) {
      auto xp = x, xm = x;
      xp[a] += e;
      xm[a] -= e;
      CHECK(gr[a] == doctest::Approx((mu.potential(xp) - mu.potential(xm)) / (2 * e)).epsilon(1e-7));
      double gp[2], gm[2];
      mu.potential_gradient(xp, gp);
      mu.potential_gradient(xm, gm);
      for (int b = 0; b < 2; ++b) CHECK(H[b * 2 + a] == doctest::Approx((gp[b] - gm[b]) / (2 * e)).epsilon(1e-6));
    }
  }
  Configuration c{2, {0.1, 0.2, -0.5, 0.3, 0.7, -0.4}, std::nullopt};
  GaussianDensity mu(2, 0.5, 1.0);
  auto e = whole_space_energy(c, mu);
  CHECK(e.F_N == doctest::Approx(e.pair_term - e.cross_term + e.self_term));
}
