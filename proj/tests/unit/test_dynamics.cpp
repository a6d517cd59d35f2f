#include <cmath>
#include <numbers>
#include <omp.h>
#include <sstream>

#include "doctest.h"
#include "modlab/dynamics.hpp"
#include "modlab/io.hpp"

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

Configuration whole(int d, std::vector<double> x) { return Configuration{d, std::move(x), std::nullopt}; }

FlowSpec rotation_flow(double w) {
  FlowSpec f = FlowSpec::gradient(2);
  f.M = {0.0, w, -w, 0.0};
  return f;
}

}  // namespace

TEST_CASE("check_repulsive") {
  CHECK(check_repulsive(std::vector<double>{-1.0, 0.0, 0.0, -1.0}, 2));
  CHECK(check_repulsive(std::vector<double>{0.0, 1.0, -1.0, 0.0}, 2));
  CHECK_FALSE(check_repulsive(std::vector<double>{1.0, 0.0, 0.0, 1.0}, 2));
  CHECK_FALSE(check_repulsive(std::vector<double>{-1.0, 3.0, 0.0, -1.0}, 2));
  CHECK_THROWS(check_repulsive(std::vector<double>{1.0, 2.0, 3.0}, 2));
}

TEST_CASE("force") {
  Truncation tr(spec_of(1, 0.5, 1.8));
  Interaction g(tr);
  auto F = force(whole(1, {0.0, 1.0}), FlowSpec::gradient(1), g);
  CHECK(F[0] == doctest::Approx(-0.5).epsilon(1e-13));
  CHECK(F[1] == doctest::Approx(0.5).epsilon(1e-13));
  for (double r : {0.3, 1.0, 2.5}) {
    const double h = 1e-6;
    CHECK(tr.g_dr(r) == doctest::Approx((tr.g(r + h) - tr.g(r - h)) / (2 * h)).epsilon(1e-7));
  }

  Truncation tr2(spec_of(2, 1.0, 2.5));
  Interaction g2(tr2);
  auto c = whole(2, {0.1, -0.3, 0.7, 0.5});
  auto R = force(c, rotation_flow(1.3), g2);
  const double dx = c.x[2] - c.x[0], dy = c.x[3] - c.x[1];
  CHECK(std::abs(R[0] * dx + R[1] * dy) < 1e-14);
  CHECK(std::abs(R[2] * dx + R[3] * dy) < 1e-14);

  FlowSpec shifted = FlowSpec::gradient(2);
  shifted.V = ExternalField::constant({0.4, -1.1});
  auto F0 = force(c, FlowSpec::gradient(2), g2), F1 = force(c, shifted, g2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(F1[2 * i] == doctest::Approx(F0[2 * i] - 0.4));
    CHECK(F1[2 * i + 1] == doctest::Approx(F0[2 * i + 1] + 1.1));
  }

  // symmetric pair on the torus feels no force
  TorusGeometry geo{1, 1.0};
  PeriodizedKernel k(spec_of(1, 0.5, 1.8), geo);
  Configuration ct{1, {0.25, 0.75}, geo};
  auto Ft = force(ct, FlowSpec::gradient(1), Interaction(k));
  CHECK(std::abs(Ft[0]) < 1e-10);
  CHECK(std::abs(Ft[1]) < 1e-10);
}

TEST_CASE("flow spec validation and stiffness audit") {
  FlowSpec f = FlowSpec::gradient(2);
  f.M = {1.0, 0.0, 0.0, 1.0};
  CHECK_THROWS(f.validate());
  f = FlowSpec::gradient(2);
  f.integrator = Integrator::euler_maruyama;
  CHECK_THROWS(f.validate());
  f.beta = 2.0;
  CHECK_NOTHROW(f.validate());

  Truncation tr(spec_of(1, 0.5, 1.8));
  FlowSpec g = FlowSpec::gradient(1);
  g.dt = 1e-2;
  auto c = whole(1, {0.0, 1e-2});
  auto a = stiffness_audit(c, g, tr.spec());
  CHECK(a.dt_max == doctest::Approx(0.1 * 2 * std::pow(1e-2, 2.5)));
  CHECK_FALSE(a.ok);
  CHECK_THROWS(simulate(c, g, Interaction(tr), {0.0}, 1));
}

TEST_CASE("gradient flow: separation grows, energy dissipates, center of mass fixed") {
  Truncation tr(spec_of(1, 0.5, 1.8));
  FlowSpec f = FlowSpec::gradient(1);
  f.dt = 1e-3;
  f.t_end = 1.0;
  auto traj = simulate(whole(1, {0.0, 0.3}), f, Interaction(tr), uniform_save_times(1.0, 20), 0);
  REQUIRE(traj.snapshots.size() == 21);
  for (std::size_t k = 1; k < traj.snapshots.size(); ++k) {
    CHECK(traj.snapshots[k].min_dist > traj.snapshots[k - 1].min_dist);
    CHECK(traj.snapshots[k].H < traj.snapshots[k - 1].H);
  }

  Truncation tr2(spec_of(2, 1.0, 2.5));
  Philox rng(7, 0);
  std::vector<double> x(2 * 16);
  for (int i = 0; i < 16; ++i) {
    x[2 * i] = (i % 4) + 0.2 * rng.normal();
    x[2 * i + 1] = (i / 4) + 0.2 * rng.normal();
  }
  FlowSpec f2 = FlowSpec::gradient(2);
  f2.dt = 1e-3;
  f2.t_end = 0.5;
  auto t2 = simulate(whole(2, x), f2, Interaction(tr2), uniform_save_times(0.5, 25), 0);
  for (std::size_t k = 1; k < t2.snapshots.size(); ++k) CHECK(t2.snapshots[k].H <= t2.snapshots[k - 1].H + 1e-8);

  FlowSpec f3 = f2;
  f3.M = {-0.5, 2.0, -2.0, -0.2};
  auto t3 = simulate(whole(2, x), f3, Interaction(tr2), {0.5}, 0);
  for (int a = 0; a < 2; ++a) {
    double m0 = 0, m1 = 0;
    for (int i = 0; i < 16; ++i) {
      m0 += t3.snapshots.front().x.x[2 * i + a];
      m1 += t3.snapshots.back().x.x[2 * i + a];
    }
    CHECK(std::abs(m1 - m0) / 16 < 1e-10 * f3.t_end);
  }
}

TEST_CASE("Hamiltonian pair keeps its distance") {
  Truncation tr(spec_of(2, 1.0, 2.5));
  FlowSpec f = rotation_flow(1.0);
  f.dt = 1e-3;
  f.t_end = 1.0;
  auto c = whole(2, {0.0, 0.0, 0.4, 0.1});
  const double r0 = c.distance(0, 1);
  auto traj = simulate(c, f, Interaction(tr), uniform_save_times(1.0, 10), 0);
  for (const auto& s : traj.snapshots) CHECK(std::abs(s.min_dist - r0) < 1e-8);
}

TEST_CASE("rk4 order") {
  Truncation tr(spec_of(2, 0.5, 2.5));
  FlowSpec f = FlowSpec::gradient(2);
  f.M = {-1.0, 0.8, -0.8, -0.3};
  f.V = ExternalField::sine(2, 0, 0.5, 1.0, 3.0);
  f.t_end = 1.0;
  f.audit_safety = 1.0;
  auto c = whole(2, {0.0, 0.0, 1.0, 0.1, 0.2, 0.9, 1.1, 1.2});
  auto end = [&](double dt) {
    FlowSpec g = f;
    g.dt = dt;
    return simulate(c, g, Interaction(tr), {1.0}, 0).snapshots.back().x.x;
  };
  const auto ref = end(0.1 / 64), a = end(0.1), b = end(0.05);
  double ea = 0, eb = 0;
  for (std::size_t m = 0; m < ref.size(); ++m) {
    ea = std::max(ea, std::abs(a[m] - ref[m]));
    eb = std::max(eb, std::abs(b[m] - ref[m]));
  }
  const double ratio = ea / eb;
  CHECK(ratio >= 12.0);
  CHECK(ratio <= 20.0);
}

TEST_CASE("noise-only variance") {
  FlowSpec f = FlowSpec::gradient(1);
  f.interaction = false;
  f.beta = 2.0;
  f.integrator = Integrator::euler_maruyama;
  f.dt = 0.01;
  f.t_end = 1.0;
  Truncation tr(spec_of(1, 0.5, 1.8));
  const std::size_t P = 10000;
  auto traj = simulate(whole(1, std::vector<double>(P, 0.0)), f, Interaction(tr), {1.0}, 42);
  double m = 0, v = 0;
  for (double x : traj.snapshots.back().x.x) m += x;
  m /= P;
  for (double x : traj.snapshots.back().x.x) v += (x - m) * (x - m);
  v /= P - 1;
  CHECK(v == doctest::Approx(2 * f.t_end / f.beta).epsilon(0.05));
}

TEST_CASE("determinism across thread counts") {
  Truncation tr(spec_of(2, 1.0, 2.5));
  FlowSpec f = FlowSpec::gradient(2);
  f.beta = 50.0;
  f.integrator = Integrator::euler_maruyama;
  f.dt = 1e-3;
  f.t_end = 0.05;
  Philox rng(3, 0);
  std::vector<double> x(2 * 40);
  for (int i = 0; i < 40; ++i) {
    x[2 * i] = 0.5 * (i % 8) + 0.1 * rng.uniform();
    x[2 * i + 1] = 0.5 * (i / 8) + 0.1 * rng.uniform();
  }
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  auto a = simulate(whole(2, x), f, Interaction(tr), {0.05}, 9);
  omp_set_num_threads(4);
  auto b = simulate(whole(2, x), f, Interaction(tr), {0.05}, 9);
  omp_set_num_threads(saved);
  CHECK(a.snapshots.back().x.x == b.snapshots.back().x.x);
  auto c = simulate(whole(2, x), f, Interaction(tr), {0.05}, 10);
  CHECK(a.snapshots.back().x.x != c.snapshots.back().x.x);
}

TEST_CASE("collision aborts with a record") {
  Truncation tr(spec_of(1, 0.5, 1.8));
  FlowSpec f = FlowSpec::gradient(1);
  f.M = {0.0};
  f.V = ExternalField::sine(1, 0, 1.0);
  f.dt = 1e-2;
  f.t_end = 8.0;
  auto traj = simulate(whole(1, {0.1, 0.2}), f, Interaction(tr), {8.0}, 0);
  REQUIRE(traj.aborted());
  CHECK(traj.collision->distance < kCollisionDistance);
  CHECK(traj.collision->t < 8.0);
  CHECK(traj.snapshots.size() == 1);
}

TEST_CASE("snapshot output") {
  Truncation tr(spec_of(1, 0.5, 1.8));
  FlowSpec f = FlowSpec::gradient(1);
  f.dt = 1e-2;
  f.t_end = 0.1;
  auto traj = simulate(whole(1, {0.0, 0.5, 1.5}), f, Interaction(tr), uniform_save_times(0.1, 2), 0);
  std::stringstream bin;
  write_trajectory_binary(bin, traj, 0xabcdefULL);
  CHECK(bin.str().substr(0, 4) == "RMLS");
  auto back = read_snapshots(bin);
  CHECK(back.header.count == 3);
  CHECK(back.header.hash == 0xabcdefULL);
  REQUIRE(back.records.size() == traj.snapshots.size());
  for (std::size_t k = 0; k < back.records.size(); ++k) {
    CHECK(back.records[k].payload == traj.snapshots[k].x.x);
    CHECK(back.records[k].extras[0] == traj.snapshots[k].H);
  }
  std::stringstream csv;
  write_trajectory_csv(csv, traj);
  std::string head;
  std::getline(csv, head);
  CHECK(head == "t,x0_0,x1_0,x2_0,H_N,min_dist");
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}
