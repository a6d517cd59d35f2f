#include <cmath>
#include <numbers>

#include "doctest.h"
#include "modlab/commutator.hpp"

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

TrigPoly single(TorusGeometry g, int K, std::vector<int> k, cplx c) {
  TrigPoly p(g, K);
  std::vector<int> mk(k.size());
  for (std::size_t a = 0; a < k.size(); ++a) mk[a] = -k[a];
  p.at(k) += c;
  p.at(mk) += std::conj(c);
  return p;
}

// F_N along X + t v(X) with mu - t div(v mu).
double energy_along(const Configuration& c, const TorusDensity& mu, const VectorField& v, const PeriodizedKernel& k,
                    double t) {
  auto ct = c;
  const int d = c.d;
  for (int a = 0; a < d; ++a) {
    auto va = v[a].eval_points(c);
    for (std::size_t i = 0; i < c.size(); ++i) ct.x[i * d + a] += t * va[i];
  }
  for (std::size_t i = 0; i < c.size(); ++i) c.torus->wrap(ct.point(i));
  TrigPoly div = (v[0] * mu.p).derivative(0);
  for (int a = 1; a < d; ++a) div = div + (v[a] * mu.p).derivative(a);
  TorusDensity mt = mu;
  mt.p = mu.p.resized(div.K()) - div.scaled(t);
  return modulated_energy(ct, mt, k).F_N;
}

}  // namespace

TEST_CASE("torus transport form vanishes for constant fields and is linear") {
  TorusGeometry g{2, 1.0};
  PeriodizedKernel k(spec_of(2, 0.5, 2.5), g, EwaldOptions{.tol = 1e-12});
  Philox rng(4, 4);
  auto mu = TorusDensity::random(g, 2, 0.5, rng);
  auto c = sample_iid(mu, 30, rng);
  VectorField cst{single(g, 1, {0, 0}, 0.35), single(g, 1, {0, 0}, -1.2)};
  CHECK(std::abs(transport_quadratic_form(c, mu, cst, k).total) < 1e-11);
  auto v1 = random_vector_field(g, 2, rng), v2 = random_vector_field(g, 1, rng);
  VectorField v12{v1[0] + v2[0], v1[1] + v2[1]};
  const double q1 = transport_quadratic_form(c, mu, v1, k).total, q2 = transport_quadratic_form(c, mu, v2, k).total;
  CHECK(transport_quadratic_form(c, mu, v12, k).total == doctest::Approx(q1 + q2).epsilon(1e-10));
}

TEST_CASE("torus transport form is the derivative of the energy along the flow") {
  for (auto sp : {spec_of(1, 0.5, 1.8), spec_of(1, 0.0, 1.8), spec_of(2, 1.0, 2.5)}) {
    TorusGeometry g{sp.d, 1.0};
    PeriodizedKernel k(sp, g, EwaldOptions{.tol = 1e-13});
    Philox rng(6, sp.d);
    auto mu = TorusDensity::random(g, 2, 0.5, rng);
    auto c = sample_iid(mu, 20, rng);
    auto v = random_vector_field(g, 2, rng);
    const double q = transport_quadratic_form(c, mu, v, k).total;
    const double h = 1e-5;
    const double fd = (energy_along(c, mu, v, k, h) - energy_along(c, mu, v, k, -h)) / (2 * h);
    // F_N carries a factor 1/2 in front of the same double integral
    CHECK(q == doctest::Approx(2 * fd).epsilon(1e-6));
  }
}

TEST_CASE("whole-space Euler identities") {
  for (int d : {1, 2}) {
    for (double s : {0.0, 0.5, 1.0}) {
      if (s >= d) continue;
      GaussianDensity mu(d, 0.8, s);
      Philox rng(10 + d, static_cast<std::uint32_t>(10 * s));
      Configuration c{d, std::vector<double>(64 * d), std::nullopt};
      for (auto& x : c.x) x = 0.8 * rng.normal();
      const double q = transport_quadratic_form(c, mu, LinearField::identity(d)).total;
      const double F = whole_space_energy(c, mu).F_N;
      if (s == 0.0) {
        CHECK(std::abs(q - 1.0 / 64) < 1e-10);
      } else {
        CHECK(std::abs(q + 2 * s * F) < 1e-10);
      }
      LinearField tr = LinearField::identity(d);
      std::fill(tr.A.begin(), tr.A.end(), 0.0);
      for (auto& b : tr.b) b = 0.7;
      CHECK(std::abs(transport_quadratic_form(c, mu, tr).total) < 1e-12);
    }
  }
}

TEST_CASE("transport norm") {
  TorusGeometry g1{1, 1.0};
  VectorField cst{single(g1, 1, {0}, 2.0)};
  CHECK(transport_norm(cst, 1.5).total == 0.0);
  VectorField s1{single(g1, 1, {1}, cplx(0.0, -0.5))};  // sin(2 pi x)
  auto n1 = transport_norm(s1, 1.5);
  CHECK(n1.total == doctest::Approx(2 * pi).epsilon(1e-12));
  CHECK(n1.fractional == 0.0);

  TorusGeometry g2{2, 1.0};
  VectorField s2{single(g2, 1, {1, 0}, cplx(0.0, -0.5)), single(g2, 1, {0, 0}, 0.0)};
  auto n2 = transport_norm(s2, 2.5);
  CHECK(n2.lipschitz == doctest::Approx(2 * pi).epsilon(1e-12));
  CHECK(n2.fractional == doctest::Approx(std::pow(2 * pi, 1.25) * std::pow(35.0 / 128.0, 0.125)).epsilon(1e-12));
  Philox rng(2, 2);
  auto v = random_vector_field(g2, 3, rng);
  CHECK(std::abs(transport_norm(v, 2.5, 64).total - transport_norm(v, 2.5, 256).total) < 1e-6);
  CHECK_THROWS(transport_norm(v, 2.0));
}

TEST_CASE("truncated commutator") {
  TorusGeometry g{1, 1.0};
  auto sp = spec_of(1, 0.5, 1.8);
  Truncation tr(sp, Profile::gaussian);
  auto f = single(g, 1, {1}, 0.5);
  VectorField v{single(g, 2, {2}, cplx(0.0, -0.5))};
  auto r = truncated_commutator_check(f, v, 0.1, sp);
  CHECK(r.lhs == doctest::Approx(-pi * tr.fourier_g_eta(1.0, 0.1)).epsilon(1e-12));
  VectorField cst{single(g, 0, {0}, 3.0)};
  CHECK(std::abs(truncated_commutator_check(f, cst, 0.1, sp).lhs) < 1e-14);

  Philox rng(3, 3);
  TrigPoly fr(g, 4);
  for (int k = 1; k <= 4; ++k) {
    const cplx z(rng.normal(), rng.normal());
    fr.at(std::vector<int>{k}) = z;
    fr.at(std::vector<int>{-k}) = std::conj(z);
  }
  auto vr = random_vector_field(g, 3, rng);
  // f(2x), v(2x) with eta / 2
  TrigPoly f2(g, 8);
  VectorField v2{TrigPoly(g, 6)};
  for (int k = -4; k <= 4; ++k) f2.at(std::vector<int>{2 * k}) = fr.at(std::vector<int>{k});
  for (int k = -3; k <= 3; ++k) v2[0].at(std::vector<int>{2 * k}) = vr[0].at(std::vector<int>{k});
  for (double s : {0.0, 0.5}) {
    auto spc = spec_of(1, s, 1.8);
    const double a = truncated_commutator_check(fr, vr, 0.08, spc).ratio;
    const double b = truncated_commutator_check(f2, v2, 0.04, spc).ratio;
    CHECK(b == doctest::Approx(a).epsilon(1e-2));
  }
  TrigPoly mean = fr;
  mean.at(std::vector<int>{0}) = 1.0;
  CHECK_THROWS(truncated_commutator_check(mean, vr, 0.1, spec_of(1, 0.0, 1.8)));
}

TEST_CASE("fi ratio experiment bookkeeping") {
  auto sp = spec_of(1, 0.5, 1.8);
  FIOptions o;
  o.samplers = {Sampler::lattice, Sampler::iid};
  auto a = fi_ratio_experiment(2, {16, 32}, sp, 99, o);
  auto b = fi_ratio_experiment(2, {16, 32}, sp, 99, o);
  REQUIRE(a.sup_ratio.size() == 2);
  CHECK(a.sup_ratio == b.sup_ratio);
  CHECK(a.offset_C >= 1.0);
  for (const auto& r : a.records) CHECK(r.rhs_core > 0);

  TorusGeometry g{1, 1.0};
  PeriodizedKernel k(sp, g);
  Philox rng(1, 1);
  auto lat = jittered_lattice(g, 16, 0.0, rng);
  VectorField cst{single(g, 0, {0}, 0.4)};
  CHECK(std::abs(transport_quadratic_form(lat, TorusDensity::uniform(g), cst, k).total) < 1e-12);
}
