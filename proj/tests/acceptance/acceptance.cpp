// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [id ...]   (no ids: run all)

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "modlab/commutator.hpp"
#include "modlab/dynamics.hpp"
#include "modlab/energy.hpp"
#include "modlab/ewald.hpp"
#include "modlab/harness.hpp"
#include "modlab/kernels.hpp"
#include "modlab/meanfield.hpp"
#include "modlab/spectral.hpp"

using namespace modlab;
using std::numbers::pi;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

PotentialSpec spec_of(int d, double s, double a) {
  PotentialSpec p;
  p.d = d;
  p.s = s;
  p.a = a;
  return p;
}

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

// 1 ------------------------------------------------------------------------
void kernel_reconstruction(Outcome& o) {
  double worst = 0;
  for (auto p : {Profile::bessel, Profile::gaussian}) {
    for (auto sp : {spec_of(1, 0, 2), spec_of(1, 0.5, 1.8), spec_of(2, 1, 3), spec_of(3, 1, 4)}) {
      Truncation tr(sp, p);
      for (int i = 0; i < 20; ++i) {
        const double r = 0.01 * std::pow(1000.0, i / 19.0);
        const double g = tr.g(r);
        worst = std::max(worst, std::abs(tr.reconstruct(r) - g) / std::max(1.0, std::abs(g)));
      }
    }
  }
  o.detail << "max rel err " << fmt(worst);
  o.require(worst <= 1e-7, "reconstruction error");
}

// 2 ------------------------------------------------------------------------
void truncation_properties(Outcome& o) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double split = 0, fmin = INFINITY, zero_err = 0, hat_min = INFINITY, quad_min = INFINITY;
  bool monotone = true;
  const std::vector<PotentialSpec> specs = {spec_of(1, 0, 2), spec_of(1, 0.5, 1.8), spec_of(2, 1, 3),
                                            spec_of(2, 0, 2.5), spec_of(3, 1, 4)};
  for (auto p : {Profile::bessel, Profile::gaussian}) {
    for (const auto& sp : specs) {
      Truncation tr(sp, p);
      for (double eta : {0.01, 0.05, 0.2, 0.7, 2.0}) {
        for (int i = 0; i < 20; ++i) {
          const double r = 1e-3 * std::pow(1e4, i / 19.0);
          const double f = tr.f_eta(r, eta), g = tr.g(r);
          fmin = std::min(fmin, f);
          split = std::max(split, std::abs(f + tr.g_eta(r, eta) - g) / std::max(1.0, std::abs(g)));
          if (tr.f_eta(r, 1.3 * eta) < f) monotone = false;
        }
        if (sp.s > 0) {
          const double closed = tr.c() * tr.profile().at_zero() * std::pow(eta, -sp.s) / sp.s;
          zero_err = std::max(zero_err, std::abs(tr.g_eta(0.0, eta) - closed) / closed);
        } else {
          const double ref = tr.g_eta(0.0, 1.0);
          zero_err = std::max(zero_err, std::abs(tr.g_eta(0.0, eta) + std::log(eta) - ref));
        }
      }
      for (int i = 0; i < 1000; ++i) {
        const double xi = std::exp(-4 + 8 * U(rng)), eta = std::exp(-5 + 6 * U(rng));
        hat_min = std::min(hat_min, tr.fourier_g_eta(xi, eta));
      }
      // zero-sum quadratic forms at scattered points
      std::normal_distribution<double> Z;
      for (int trial = 0; trial < 10; ++trial) {
        const int n = 30;
        std::vector<double> x(n * sp.d), w(n);
        for (auto& v : x) v = 1.5 * U(rng);
        double m = 0;
        for (auto& v : w) m += (v = Z(rng));
        for (auto& v : w) v -= m / n;
        const double eta = std::exp(-4 + 4 * U(rng));
        double q = 0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            double r2 = 0;
            for (int a = 0; a < sp.d; ++a) r2 += std::pow(x[i * sp.d + a] - x[j * sp.d + a], 2);
            q += w[i] * w[j] * tr.g_eta(std::sqrt(r2), eta);
          }
        quad_min = std::min(quad_min, q);
      }
    }
  }
  o.detail << "min f_eta " << fmt(fmin) << ", split err " << fmt(split) << ", g_eta(0) err " << fmt(zero_err)
           << ", min ghat_eta " << fmt(hat_min) << ", min quad form " << fmt(quad_min);
  o.require(fmin >= 0, "f_eta >= 0");
  o.require(monotone, "monotone in eta");
  o.require(split <= 1e-10, "g = g_eta + f_eta");
  o.require(zero_err <= 1e-8, "g_eta(0) closed form");
  o.require(hat_min >= 0, "ghat_eta >= 0");
  o.require(quad_min >= -1e-10, "positive definite");
}

// 3 ------------------------------------------------------------------------
void poisson_summation(Outcome& o) {
  double worst = 0;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.02, 0.98);
  for (auto sp : {spec_of(1, 0.0, 1.8), spec_of(1, 0.5, 1.8), spec_of(2, 1.0, 2.9), spec_of(3, 1.0, 3.9)}) {
    TorusGeometry g{sp.d, 1.3};
    EwaldOptions a, b;
    a.eta = 0.1 * g.L;
    b.eta = 0.2 * g.L;
    if (sp.d < 3) {
      a.K = 64;
      b.K = 128;
    }
    a.tol = b.tol = 1e-13;
    PeriodizedKernel ka(sp, g, a), kb(sp, g, b);
    for (int t = 0; t < 10; ++t) {
      double x[3];
      for (int i = 0; i < sp.d; ++i) x[i] = U(rng) * g.L;
      std::span<const double> xs(x, sp.d);
      worst = std::max(worst, std::abs(ka.eval(xs) - kb.eval(xs)));
    }
  }
  // profile change; the Bessel far field decays like |k|^{-a}, so a sits near d + 2
  for (double s : {0.0, 0.5}) {
    TorusGeometry g{1, 1.0};
    EwaldOptions gb, gg;
    gb.phi = Profile::bessel;
    gb.eta = 0.25;
    gb.tol = 1e-9;
    gg.tol = 1e-13;
    PeriodizedKernel kb(spec_of(1, s, 2.9), g, gb), kg(spec_of(1, s, 2.9), g, gg);
    for (int t = 0; t < 10; ++t) {
      const double x[] = {U(rng)};
      worst = std::max(worst, std::abs(kb.eval(x) - kg.eval(x)));
    }
  }
  EwaldOptions t;
  t.tol = 1e-13;
  PeriodizedKernel k(spec_of(1, 0.0, 1.8), TorusGeometry{1, 1.0}, t);
  const double half[] = {0.5}, quarter[] = {0.25};
  const double e1 = std::abs(k.eval(half) + std::log(2.0)), e2 = std::abs(k.eval(quarter) + 0.5 * std::log(2.0));
  o.detail << "max change " << fmt(worst) << ", log values err " << fmt(std::max(e1, e2));
  o.require(worst <= 1e-8, "invariance");
  o.require(e1 <= 1e-8 && e2 <= 1e-8, "log kernel values");
}

// 4 ------------------------------------------------------------------------
void splitting_identity(Outcome& o) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::map<std::pair<int, double>, std::unique_ptr<PeriodizedKernel>> kernels;
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    const int d = 1 + t % 2;
    const std::vector<double> s_choices = d == 1 ? std::vector<double>{0.0, 0.5} : std::vector<double>{0.0, 1.0};
    const double s = s_choices[(t / 2) % 2];
    auto& k = kernels[{d, s}];
    if (!k) {
      EwaldOptions e;
      e.tol = 1e-13;
      k = std::make_unique<PeriodizedKernel>(spec_of(d, s, d + 0.8), TorusGeometry{d, 1.0}, e);
    }
    Philox prng(40, static_cast<std::uint32_t>(t));
    auto mu = TorusDensity::random(TorusGeometry{d, 1.0}, 2, 0.8, prng);
    const std::size_t N = 2 + static_cast<std::size_t>(U(rng) * 63);
    auto c = sample_iid(mu, N, prng);
    const double eta = std::exp(std::log(0.005) + U(rng) * std::log(60.0));
    worst = std::max(worst, splitting_identity_check(c, mu, *k, eta).residual);
  }
  o.detail << "max residual " << fmt(worst) << " over 50 triples";
  o.require(worst <= 1e-10, "residual");
}

// 5 ------------------------------------------------------------------------
void coercivity(Outcome& o) {
  TorusGeometry g{1, 1.0};
  Configuration one{1, {0.3}, g};
  const double v = coercivity_norm(one, TorusDensity::uniform(g), 2.0).value;
  const double err = std::abs(v - (1.0 / std::tanh(0.5) / 2 - 1.0));
  o.detail << "N=1 err " << fmt(err);
  o.require(err <= 1e-8, "N = 1 value");
  for (double s : {0.5, 0.0}) {
    auto sp = spec_of(1, s, 1.8);
    Philox rng(5, 0);
    auto mu = TorusDensity::random(g, 2, 0.6, rng);
    auto sw = coercivity_sweep(sp, mu, {64, 256, 1024}, 10, {Sampler::iid, Sampler::lattice, Sampler::cluster}, 55, sp.a);
    o.detail << "; s=" << s << " C(N) =";
    for (double c : sw.C) o.detail << " " << fmt(c);
    o.detail << " growth " << fmt(sw.growth) << " spread " << fmt(sw.spread);
    o.require(sw.growth <= 1.5, "calibrated C grows past x1.5");
  }
}

// 6 ------------------------------------------------------------------------
void sharp_rate(Outcome& o) {
  struct Case {
    int d;
    double s;
  };
  for (auto cs : {Case{1, 0.5}, Case{2, 1.0}, Case{2, 0.0}}) {
    auto sw = energy_sweep(spec_of(cs.d, cs.s, cs.d + 0.8), TorusGeometry{cs.d, 1.0}, {64, 256, 1024, 4096}, 4, 0.25, 6);
    const double expected = cs.s / cs.d - 1;
    o.detail << (o.detail.tellp() > 0 ? "; " : "") << "d=" << cs.d << " s=" << cs.s << " slope " << fmt(sw.fit.slope)
             << " (expect " << expected << ")";
    o.require(std::abs(sw.fit.slope - expected) <= 0.1, "slope");
  }
}

// 7 ------------------------------------------------------------------------
void kato_ponce(Outcome& o) {
  GridField v(TorusGeometry{1, 1.0}, 16), f(TorusGeometry{1, 1.0}, 16);
  for (int j = 0; j < 16; ++j) {
    v.values[j] = std::sin(4 * pi * j / 16.0);
    f.values[j] = std::cos(2 * pi * j / 16.0);
  }
  const double err = std::abs(kato_ponce_lhs({v}, f, 2.0) + pi * (1 + 4 * pi * pi) / 2);
  o.detail << "hand value err " << fmt(err);
  o.require(err <= 1e-9, "hand value");
  for (int d : {1, 2})
    for (double a : {1.0, 2.0, 3.5}) {
      const double r8 = kp_ratio_experiment(200, a, 8, 7, d).max_ratio;
      const double r16 = kp_ratio_experiment(200, a, 16, 7, d).max_ratio;
      o.detail << "; d=" << d << " a=" << a << " " << fmt(r8) << "->" << fmt(r16);
      o.require(r16 < 1.1 * r8, "sup ratio grows under band doubling");
    }
}

// 8 ------------------------------------------------------------------------
void extension(Outcome& o) {
  Philox rng(8, 0);
  auto f = random_band_limited(TorusGeometry{1, 1.0}, 5, 32, rng, false);
  for (double s : {0.5, 1.0, 1.5}) {
    auto lim = cs_dirichlet_to_neumann(f, s);
    auto ref = apply_multiplier(f, bracket(s));
    double num = 0, den = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      num += lim.values[i] * ref.values[i];
      den += ref.values[i] * ref.values[i];
    }
    const double e1 = std::abs(num / den / d2n_constant(s) - 1);
    const double Ee = cs_energy_constant(s) * std::pow(sobolev_norm(f, 0.5 * s), 2);
    const double e2 = std::abs(cs_energy(f, s) / Ee - 1);
    o.detail << (s > 0.5 ? "; " : "") << "s=" << s << " d2n " << fmt(e1) << " energy " << fmt(e2);
    o.require(e1 <= 1e-3, "D2N constant");
    o.require(e2 <= 1e-4, "energy identity");
  }
}

// 9 ------------------------------------------------------------------------
void commutator(Outcome& o) {
  for (double s : {0.0, 0.5}) {
    auto r = fi_ratio_experiment(10, {128, 256, 512, 1024}, spec_of(1, s, 1.8), 2024);
    o.detail << (s > 0 ? "; " : "") << "s=" << s << " sup";
    for (double x : r.sup_ratio) o.detail << " " << fmt(x);
    for (std::size_t i = 1; i < r.sup_ratio.size(); ++i)
      o.require(r.sup_ratio[i] <= 1.15 * r.sup_ratio[i - 1], "growth under doubling");
  }
  double worst = 0;
  for (int d : {1, 2})
    for (double s : {0.0, 0.5, 1.0}) {
      if (s >= d) continue;
      for (std::size_t N : {8, 64}) {
        GaussianDensity mu(d, 0.8, s);
        Philox rng(90 + d, static_cast<std::uint32_t>(10 * s), static_cast<std::uint32_t>(N));
        Configuration c{d, std::vector<double>(N * d), std::nullopt};
        for (auto& x : c.x) x = 0.8 * rng.normal();
        const double q = transport_quadratic_form(c, mu, LinearField::identity(d)).total;
        const double ref = s == 0 ? 1.0 / N : -2 * s * whole_space_energy(c, mu).F_N;
        worst = std::max(worst, std::abs(q - ref));
      }
    }
  o.detail << "; Euler identities err " << fmt(worst);
  o.require(worst <= 1e-10, "Euler homogeneity");
}

// 10 -----------------------------------------------------------------------
void dynamics(Outcome& o) {
  // gradient flow dissipation: whole space d = 2 and torus d = 1
  Truncation tr2(spec_of(2, 1.0, 2.5));
  Philox rng(10, 0);
  std::vector<double> x(2 * 16);
  for (int i = 0; i < 16; ++i) {
    x[2 * i] = (i % 4) + 0.2 * rng.normal();
    x[2 * i + 1] = (i / 4) + 0.2 * rng.normal();
  }
  FlowSpec f = FlowSpec::gradient(2);
  f.dt = 1e-3;
  f.t_end = 0.5;
  auto t1 = simulate(Configuration{2, x, std::nullopt}, f, Interaction(tr2), uniform_save_times(0.5, 25), 0);
  bool mono = !t1.aborted();
  for (std::size_t k = 1; k < t1.snapshots.size(); ++k) mono = mono && t1.snapshots[k].H <= t1.snapshots[k - 1].H;
  TorusGeometry g{1, 1.0};
  PeriodizedKernel kt(spec_of(1, 0.5, 1.8), g);
  Philox r2(10, 1);
  auto lat = jittered_lattice(g, 32, 0.3, r2);
  FlowSpec f1 = FlowSpec::gradient(1);
  f1.t_end = 0.002;
  f1.dt = std::min(1e-4, stiffness_audit(lat, f1, kt.spec()).dt_max);
  f1.dt = 0.002 / std::ceil(0.002 / f1.dt);
  auto t2 = simulate(lat, f1, Interaction(kt), uniform_save_times(0.002, 20), 0);
  mono = mono && !t2.aborted();
  for (std::size_t k = 1; k < t2.snapshots.size(); ++k) mono = mono && t2.snapshots[k].H <= t2.snapshots[k - 1].H;
  o.detail << "dissipation monotone " << (mono ? "yes" : "no");
  o.require(mono, "energy dissipation");

  // RK4 order
  Truncation tr(spec_of(2, 0.5, 2.5));
  FlowSpec fr = FlowSpec::gradient(2);
  fr.M = {-1.0, 0.8, -0.8, -0.3};
  fr.V = ExternalField::sine(2, 0, 0.5, 1.0, 3.0);
  fr.t_end = 1.0;
  fr.audit_safety = 1.0;
  Configuration c4{2, {0.0, 0.0, 1.0, 0.1, 0.2, 0.9, 1.1, 1.2}, std::nullopt};
  auto end = [&](double dt) {
    FlowSpec gg = fr;
    gg.dt = dt;
    return simulate(c4, gg, Interaction(tr), {1.0}, 0).snapshots.back().x.x;
  };
  const auto ref = end(0.1 / 64), a = end(0.1), b = end(0.05);
  double ea = 0, eb = 0;
  for (std::size_t m = 0; m < ref.size(); ++m) {
    ea = std::max(ea, std::abs(a[m] - ref[m]));
    eb = std::max(eb, std::abs(b[m] - ref[m]));
  }
  o.detail << "; rk4 ratio " << fmt(ea / eb);
  o.require(ea / eb >= 12 && ea / eb <= 20, "rk4 order");

  // Hamiltonian pair
  FlowSpec fh = FlowSpec::gradient(2);
  fh.M = {0.0, 1.0, -1.0, 0.0};
  fh.dt = 1e-3;
  fh.t_end = 1.0;
  Truncation tr3(spec_of(2, 1.0, 2.5));
  Configuration pair{2, {0.0, 0.0, 0.4, 0.1}, std::nullopt};
  const double r0 = pair.distance(0, 1);
  double drift = 0;
  for (const auto& s : simulate(pair, fh, Interaction(tr3), uniform_save_times(1.0, 10), 0).snapshots)
    drift = std::max(drift, std::abs(s.min_dist - r0));
  o.detail << "; pair drift " << fmt(drift);
  o.require(drift <= 1e-8, "Hamiltonian distance");

  // noise only
  FlowSpec fn = FlowSpec::gradient(1);
  fn.interaction = false;
  fn.beta = 2.0;
  fn.integrator = Integrator::euler_maruyama;
  fn.dt = 0.01;
  fn.t_end = 1.0;
  const std::size_t P = 10000;
  auto tn = simulate(Configuration{1, std::vector<double>(P, 0.0), std::nullopt}, fn, Interaction(tr), {1.0}, 42);
  double m = 0, var = 0;
  for (double v : tn.snapshots.back().x.x) m += v / P;
  for (double v : tn.snapshots.back().x.x) var += (v - m) * (v - m) / (P - 1);
  const double rel = std::abs(var / (2 * fn.t_end / fn.beta) - 1);
  o.detail << "; variance rel err " << fmt(rel);
  o.require(rel <= 0.05, "SDE variance");
}

// 11 -----------------------------------------------------------------------
void report_sweep(Outcome& o, const std::string& label, const GronwallExperiment& ex) {
  o.detail << (o.detail.tellp() > 0 ? "; " : "") << label << " C(N) =";
  for (std::size_t i = 0; i < ex.sweep.N.size(); ++i) o.detail << " " << ex.sweep.N[i] << ":" << fmt(ex.sweep.C[i]);
  o.detail << " spread " << fmt(ex.sweep.spread);
}

void gronwall(Outcome& o) {
  const TorusGeometry g1{1, 1.0};
  {
    GronwallSetup st;
    st.spec = spec_of(1, 0.5, 1.8);
    st.flow = FlowSpec::gradient(1);
    st.mu0 = axis_mode_density(g1, 1, 0.0);
    st.jitter = 0.1;
    st.t_end = 1e-3;
    st.saves = 4;
    auto ex = gronwall_experiment(st, {64, 256, 1024});
    report_sweep(o, "stationary", ex);
    o.require(ex.sweep.stable, "stationary run N-stable C");
  }
  {
    GronwallSetup st;
    st.spec = spec_of(1, 0.5, 1.8);
    st.flow = FlowSpec::gradient(1);
    st.flow.V = ExternalField::sine(1, 0, 10.0);
    st.mu0 = axis_mode_density(g1, 1, 0.3);
    st.t_end = 1e-3;
    st.saves = 4;
    auto ex = gronwall_experiment(st, {128, 512, 2048});
    report_sweep(o, "perturbed", ex);
    o.detail << " N_u(T) " << fmt(ex.reports.front().samples.back().N_u);
    o.require(ex.sweep.stable, "single C within x1.5");
  }
  {
    const TorusGeometry g3{3, 1.0};
    GronwallSetup st;
    st.spec = spec_of(3, 0.0, 4.0);
    st.flow = FlowSpec::gradient(3);
    st.flow.beta = 10.0;
    st.flow.integrator = Integrator::euler_maruyama;
    st.flow.dt = 1e-3;
    st.mu0 = axis_mode_density(g3, 1, 0.3);
    st.grid = 32;
    st.t_end = 0.02;
    st.saves = 4;
    st.seeds = {1, 2, 3, 4};
    auto ex = gronwall_experiment(st, {64, 512});
    report_sweep(o, "stochastic d=3", ex);
    double C = 0;
    for (double c : ex.sweep.C) C = std::max(C, c);
    bool holds = std::isfinite(C);
    double ito = INFINITY;
    for (const auto& r : ex.reports) {
      holds = holds && r.holds(C, r.samples.size());
      for (const auto& s : r.samples) ito = std::min(ito, s.ito);
    }
    o.detail << " min Ito term " << fmt(ito);
    o.require(ito > 0, "Ito term present");
    o.require(holds, "fitted bound with Ito term");
  }
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    double budget;
    void (*fn)(Outcome&);
  };
  const Criterion all[] = {
      {1, "kernel reconstruction", 10, kernel_reconstruction},
      {2, "truncation properties", 30, truncation_properties},
      {3, "poisson summation consistency", 5, poisson_summation},
      {4, "exact splitting identity", 60, splitting_identity},
      {5, "coercivity", 120, coercivity},
      {6, "sharp rate", 600, sharp_rate},
      {7, "kato-ponce", 300, kato_ponce},
      {8, "extension", 120, extension},
      {9, "commutator functional inequality", 600, commutator},
      {10, "dynamics", 300, dynamics},
      {11, "mean-field gronwall", 1200, gronwall},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (sec > c.budget) {
      o.pass = false;
      o.detail << " [over budget]";
    }
    std::printf("%s %d %s (%.1f s, budget %.0f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, sec, c.budget,
                o.detail.str().c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
