#include "modlab/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/tools/roots.hpp>

#include "modlab/commutator.hpp"

namespace modlab {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

std::size_t grid_size(int d, int n) {
  std::size_t s = 1;
  for (int a = 0; a < d; ++a) s *= static_cast<std::size_t>(n);
  return s;
}

// Integer wavenumbers of every FFT index, per axis.
std::vector<std::vector<int>> wavenumbers(int d, int n) {
  const std::size_t size = grid_size(d, n);
  std::vector<std::vector<int>> k(d, std::vector<int>(size));
  for (std::size_t i = 0; i < size; ++i) {
    std::size_t r = i;
    for (int a = d - 1; a >= 0; --a) {
      k[a][i] = wavenumber(static_cast<int>(r % n), n);
      r /= n;
    }
  }
  return k;
}

void axpy(std::vector<cplx>& y, const std::vector<cplx>& x, double a) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace

DensityState DensityState::from_density(const TorusDensity& mu, int n) {
  const auto& p = mu.p;
  if (3 * p.K() > n) throw aliasing_error("grid: density band must not exceed n/3");
  DensityState s;
  s.geo = p.geometry();
  s.n = n;
  s.c = forward(GridField::from_poly(p, n));
  s.c[0] = 1.0 / s.geo.volume();
  s.refresh();
  return s;
}

DensityState DensityState::from_grid(const GridField& f) {
  DensityState s;
  s.geo = f.geo;
  s.n = f.n;
  s.c = forward(f);
  s.refresh();
  return s;
}

GridField DensityState::grid() const { return inverse(c, geo, n); }

TorusDensity DensityState::density() const {
  const int K = n / 3;
  const int d = geo.d;
  TrigPoly p(geo, K);
  const auto k = wavenumbers(d, n);
  std::vector<int> m(d);
  for (std::size_t i = 0; i < c.size(); ++i) {
    bool in = true;
    for (int a = 0; a < d; ++a) {
      m[a] = k[a][i];
      in = in && std::abs(m[a]) <= K;
    }
    if (in) p.at(m) = c[i];
  }
  // symmetrize against rounding
  TrigPoly q = p;
  for (std::size_t i = 0; i < p.coeffs().size(); ++i) {
    std::vector<int> kk(d), mk(d);
    p.box().mode(i, kk);
    for (int a = 0; a < d; ++a) mk[a] = -kk[a];
    q.coeffs()[i] = 0.5 * (p.at(kk) + std::conj(p.at(mk)));
  }
  return TorusDensity::from_poly(std::move(q), std::max(n, 2 * K + 2));
}

void DensityState::refresh() {
  const auto g = grid();
  linf = *std::max_element(g.values.begin(), g.values.end());
  min = *std::min_element(g.values.begin(), g.values.end());
  l1 = lp_norm(g, 1.0);
  mass = c[0].real() * geo.volume();
}

MeanFieldSolver::MeanFieldSolver(const PotentialSpec& spec, const FlowSpec& flow, TorusGeometry geo, int n)
    : spec_(spec), flow_(flow), geo_(geo), n_(n) {
  spec_.validate();
  flow_.validate();
  if (spec_.d != geo.d || flow_.d != geo.d) throw std::invalid_argument("d: spec, flow and geometry disagree");
  if (n < 4) throw std::invalid_argument("n: grid too small");
  const int d = geo.d;
  size_ = grid_size(d, n);
  k_ = wavenumbers(d, n);
  ghat_.assign(size_, 0.0);
  k2_.assign(size_, 0.0);
  keep_.assign(size_, 1);
  Truncation tr(spec_);
  for (std::size_t i = 0; i < size_; ++i) {
    double q = 0;
    for (int a = 0; a < d; ++a) {
      q += static_cast<double>(k_[a][i]) * k_[a][i];
      if (3 * std::abs(k_[a][i]) > n) keep_[i] = 0;
    }
    k2_[i] = q / (geo.L * geo.L);
    if (q > 0 && keep_[i]) ghat_[i] = tr.fourier_g(std::sqrt(q) / geo.L);
  }
}

std::vector<cplx> MeanFieldSolver::velocity_coeffs(const std::vector<cplx>& c, int axis) const {
  const int d = geo_.d;
  std::vector<cplx> u(size_, 0.0);
  if (!flow_.interaction) return u;
  const double w = 2.0 * kPi / geo_.L;
  for (std::size_t i = 0; i < size_; ++i) {
    if (ghat_[i] == 0.0) continue;
    double mk = 0;
    for (int b = 0; b < d; ++b) mk += flow_.M[axis * d + b] * k_[b][i];
    u[i] = -cplx(0.0, w * mk) * ghat_[i] * c[i];
  }
  return u;
}

GridVector MeanFieldSolver::velocity_grid(const std::vector<cplx>& c, double t) const {
  const int d = geo_.d;
  GridVector u;
  for (int a = 0; a < d; ++a) u.push_back(inverse(velocity_coeffs(c, a), geo_, n_));
  if (!flow_.V.zero()) {
    std::vector<double> x(d), v(d);
    for (std::size_t i = 0; i < size_; ++i) {
      std::size_t r = i;
      for (int a = d - 1; a >= 0; --a) {
        x[a] = geo_.L * static_cast<double>(r % n_) / n_;
        r /= n_;
      }
      flow_.V.eval(t, x, v);
      for (int a = 0; a < d; ++a) u[a].values[i] += v[a];
    }
  }
  return u;
}

GridVector MeanFieldSolver::velocity(const DensityState& s) const {
  if (s.n != n_ || s.geo.d != geo_.d) throw std::invalid_argument("state: grid does not match the solver");
  return velocity_grid(s.c, s.t);
}

// div(u mu), dealiased
std::vector<cplx> MeanFieldSolver::rhs(const std::vector<cplx>& c, double t) const {
  const int d = geo_.d;
  std::vector<cplx> out(size_, 0.0);
  if (!flow_.interaction && flow_.V.zero()) return out;
  const auto u = velocity_grid(c, t);
  const auto mu = inverse(c, geo_, n_);
  const double w = 2.0 * kPi / geo_.L;
  GridField flux(geo_, n_);
  for (int a = 0; a < d; ++a) {
    for (std::size_t i = 0; i < size_; ++i) flux.values[i] = u[a].values[i] * mu.values[i];
    const auto f = forward(flux);
    for (std::size_t i = 0; i < size_; ++i)
      if (keep_[i]) out[i] += cplx(0.0, w * k_[a][i]) * f[i];
  }
  out[0] = 0.0;
  return out;
}

DensityState MeanFieldSolver::step(const DensityState& s, double h) const {
  if (s.n != n_ || s.geo.d != geo_.d) throw std::invalid_argument("state: grid does not match the solver");
  {
    const auto u = velocity_grid(s.c, s.t);
    double umax = 0;
    for (std::size_t i = 0; i < size_; ++i) {
      double q = 0;
      for (const auto& ua : u) q += ua.values[i] * ua.values[i];
      umax = std::max(umax, q);
    }
    const double cfl = h * std::sqrt(umax) * n_ / geo_.L;
    if (cfl > 0.5) throw cfl_error("cfl: dt * |u|_inf * n / L = " + std::to_string(cfl) + " exceeds 0.5");
  }
  std::vector<double> E1(size_, 1.0), E2(size_, 1.0);
  if (!flow_.deterministic())
    for (std::size_t i = 0; i < size_; ++i) {
      const double r = 4.0 * kPi * kPi * k2_[i] / flow_.beta;
      E1[i] = std::exp(-r * h);
      E2[i] = std::exp(-r * 0.5 * h);
    }
  auto scale = [&](std::vector<cplx> v, const std::vector<double>& e) {
    for (std::size_t i = 0; i < size_; ++i) v[i] *= e[i];
    return v;
  };
  const auto& c = s.c;
  const auto k1 = rhs(c, s.t);
  auto y = c;
  axpy(y, k1, 0.5 * h);
  const auto k2 = rhs(scale(y, E2), s.t + 0.5 * h);
  y = scale(c, E2);
  axpy(y, k2, 0.5 * h);
  const auto k3 = rhs(y, s.t + 0.5 * h);
  y = scale(c, E2);
  axpy(y, k3, h);
  const auto k4 = rhs(scale(y, E2), s.t + h);

  DensityState out = s;
  out.t = s.t + h;
  const auto ek1 = scale(k1, E1), ek23 = scale(k2, E2), ek3 = scale(k3, E2);
  for (std::size_t i = 0; i < size_; ++i)
    out.c[i] = E1[i] * c[i] + h / 6.0 * (ek1[i] + 2.0 * ek23[i] + 2.0 * ek3[i] + k4[i]);
  // project onto real fields; mode 0 untouched
  const cplx c0 = s.c[0];
  out.c = forward(inverse(out.c, geo_, n_));
  out.c[0] = c0;
  out.refresh();
  if (out.min < -1e-6)
    throw numerical_abort("negativity: density min " + std::to_string(out.min) + " below -1e-6 at t = " +
                          std::to_string(out.t));
  return out;
}

double MeanFieldSolver::stable_dt(const DensityState& s) const {
  double norm = 0;
  for (double m : flow_.M) norm += m * m;
  double rate = 0;
  if (flow_.interaction)
    for (std::size_t i = 0; i < size_; ++i) rate = std::max(rate, 4.0 * kPi * kPi * k2_[i] * ghat_[i]);
  rate *= std::sqrt(norm) * s.linf;
  return rate > 0 ? 2.5 / rate : INFINITY;
}

std::vector<DensityState> MeanFieldSolver::solve(const DensityState& s0, double dt,
                                                 const std::vector<double>& save_times) const {
  std::vector<std::size_t> marks;
  for (double t : save_times) {
    const double q = (t - s0.t) / dt;
    const auto k = static_cast<std::size_t>(std::llround(q));
    if (q < -1e-9 || std::abs(q - static_cast<double>(k)) > 1e-6)
      throw std::invalid_argument("save_times: must lie on the dt grid");
    if (marks.empty() || k > marks.back()) marks.push_back(k);
  }
  std::vector<DensityState> out;
  DensityState s = s0;
  std::size_t n = 0;
  for (std::size_t m : marks) {
    for (; n < m; ++n) {
      s = step(s, dt);
      s.t = s0.t + static_cast<double>(n + 1) * dt;
    }
    out.push_back(s);
  }
  return out;
}

DensityState pde_step(const DensityState& s, const PotentialSpec& spec, const FlowSpec& flow, double dt) {
  return MeanFieldSolver(spec, flow, s.geo, s.n).step(s, dt);
}

GridVector velocity_field(const DensityState& s, const PotentialSpec& spec, const FlowSpec& flow) {
  return MeanFieldSolver(spec, flow, s.geo, s.n).velocity(s);
}

VectorField to_vector_field(const GridVector& u) {
  VectorField v;
  for (const auto& f : u) {
    const int d = f.geo.d;
    const int K = std::min(f.band(1e-14), f.n / 2 - 1);
    TrigPoly p(f.geo, K);
    const auto c = forward(f);
    const auto k = wavenumbers(d, f.n);
    std::vector<int> m(d);
    for (std::size_t i = 0; i < c.size(); ++i) {
      bool in = true;
      for (int a = 0; a < d; ++a) {
        m[a] = k[a][i];
        in = in && std::abs(m[a]) <= K;
      }
      if (in) p.at(m) = c[i];
    }
    v.push_back(std::move(p));
  }
  return v;
}

std::vector<double> cumulative_regularity(const std::vector<double>& t, const std::vector<double>& norms) {
  if (t.size() != norms.size()) throw std::invalid_argument("norms: size must match save times");
  std::vector<double> out(t.size(), 0.0);
  for (std::size_t i = 1; i < t.size(); ++i) out[i] = out[i - 1] + 0.5 * (t[i] - t[i - 1]) * (norms[i] + norms[i - 1]);
  return out;
}

std::vector<double> transport_norms(const std::vector<DensityState>& states, double a, const MeanFieldSolver& solver) {
  std::vector<double> out;
  for (const auto& s : states) {
    const auto u = solver.velocity(s);
    bool zero = true;
    for (const auto& f : u)
      for (double v : f.values) zero = zero && v == 0.0;
    out.push_back(zero ? 0.0 : transport_norm(to_vector_field(u), a).total);
  }
  return out;
}

double regularity_functional(const std::vector<DensityState>& states, double a, const MeanFieldSolver& solver) {
  if (states.size() < 2) return 0.0;
  std::vector<double> t;
  for (const auto& s : states) t.push_back(s.t);
  const double h = t[1] - t[0];
  for (std::size_t i = 1; i < t.size(); ++i)
    if (std::abs(t[i] - t[i - 1] - h) > 1e-9 * std::max(1.0, std::abs(h)))
      throw std::invalid_argument("states: save grid must be uniform in t");
  return cumulative_regularity(t, transport_norms(states, a, solver)).back();
}

bool linfty_monotonicity_check(const std::vector<DensityState>& states, double tol) {
  for (std::size_t i = 1; i < states.size(); ++i)
    if (states[i].linf > states[i - 1].linf + tol) return false;
  return true;
}

TorusDensity axis_mode_density(TorusGeometry g, int k, double eps) {
  if (!(std::abs(eps) < 1.0)) throw std::invalid_argument("eps: must satisfy |eps| < 1");
  TrigPoly p(g, std::abs(k));
  std::vector<int> m(g.d, 0);
  p.at(m) = 1.0 / g.volume();
  m[0] = k;
  p.at(m) += 0.5 * eps / g.volume();
  m[0] = -k;
  p.at(m) += 0.5 * eps / g.volume();
  return TorusDensity::from_poly(std::move(p));
}

Configuration quantile_lattice(const TorusDensity& mu, std::size_t N, double jitter, Philox& rng) {
  const auto& g = mu.geometry();
  const int d = g.d;
  const double L = g.L;
  const auto& p = mu.p;
  std::vector<int> k(d);
  std::vector<cplx> b(2 * p.K() + 1);
  for (std::size_t i = 0; i < p.coeffs().size(); ++i) {
    p.box().mode(i, k);
    bool axis0 = true;
    for (int a = 1; a < d; ++a) axis0 = axis0 && k[a] == 0;
    if (!axis0) {
      if (std::abs(p.coeffs()[i]) > 1e-14) throw std::invalid_argument("mu: must depend on x_0 only");
      continue;
    }
    b[k[0] + p.K()] = std::pow(L, d - 1) * p.coeffs()[i];
  }
  const int K = p.K();
  auto cdf = [&](double x) {
    double F = b[K].real() * x;
    for (int m = 1; m <= K; ++m) {
      const cplx e = std::polar(1.0, 2.0 * kPi * m * x / L) - 1.0;
      F += 2.0 * (b[K + m] * L / cplx(0.0, 2.0 * kPi * m) * e).real();
    }
    return F;
  };
  Configuration c = jittered_lattice(g, N, jitter, rng);
  for (std::size_t i = 0; i < N; ++i) {
    const double u = c.x[i * d] / L;
    std::uintmax_t it = 200;
    auto r = boost::math::tools::toms748_solve([&](double x) { return cdf(x) - u; }, 0.0, L, -u, 1.0 - u,
                                               boost::math::tools::eps_tolerance<double>(52), it);
    c.x[i * d] = 0.5 * (r.first + r.second);
  }
  return c;
}

CoupledRun run_coupled(const Configuration& x0, const DensityState& mu0, const FlowSpec& flow,
                       const PeriodizedKernel& kernel, double pde_dt, const std::vector<double>& save_times,
                       const std::vector<std::uint64_t>& seeds) {
  if (!x0.torus) throw std::invalid_argument("geometry: coupled runs live on the torus");
  MeanFieldSolver solver(kernel.spec(), flow, mu0.geo, mu0.n);
  CoupledRun run;
  std::vector<double> times{0.0};
  for (double t : save_times)
    if (t > times.back()) times.push_back(t);
  run.states = solver.solve(mu0, pde_dt, times);
  std::vector<TorusDensity> dens;
  for (const auto& s : run.states) dens.push_back(s.density());
  for (auto seed : seeds) {
    auto tr = simulate(x0, flow, Interaction(kernel), times, seed);
    if (tr.aborted())
      throw numerical_abort("collision: particles " + std::to_string(tr.collision->i) + " and " +
                            std::to_string(tr.collision->j) + " at t = " + std::to_string(tr.collision->t));
    if (tr.snapshots.size() != times.size()) throw std::logic_error("coupled run: snapshot count mismatch");
    for (std::size_t k = 0; k < times.size(); ++k)
      tr.snapshots[k].F_N = modulated_energy(tr.snapshots[k].x, dens[k], kernel).F_N;
    run.particles.push_back(std::move(tr));
  }
  return run;
}

double GronwallReport::lhs(std::size_t i, double C) const {
  const auto& s = samples[i];
  return s.F_N + s.log_term + C * (s.additive + s.ito);
}

double GronwallReport::rhs(std::size_t i, double C) const {
  double sup = -INFINITY;
  for (std::size_t j = 0; j <= i; ++j) sup = std::max(sup, samples[j].log_term + C * (samples[j].additive + samples[j].ito));
  return C * std::exp(C * samples[i].N_u) * (samples[0].F_N + sup);
}

bool GronwallReport::holds(double C, std::size_t upto) const {
  for (std::size_t i = 0; i < upto; ++i)
    if (lhs(i, C) > rhs(i, C)) return false;
  return true;
}

namespace {

double fit_C(const GronwallReport& r, std::size_t upto) {
  if (r.holds(1.0, upto)) return 1.0;
  double lo = 1.0, hi = 0.0;
  for (double C = std::pow(2.0, 0.25); C < 1e12; C *= std::pow(2.0, 0.25)) {
    if (r.holds(C, upto)) {
      hi = C;
      break;
    }
    lo = C;
  }
  if (hi == 0.0) return INFINITY;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (r.holds(mid, upto) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

GronwallReport gronwall_check(const CoupledRun& run, const PeriodizedKernel& kernel, const FlowSpec& flow, double a) {
  if (run.particles.empty()) throw std::invalid_argument("run: no particle trajectories");
  const std::size_t T = run.states.size();
  for (const auto& tr : run.particles) {
    if (tr.snapshots.size() != T) throw std::invalid_argument("run: particle and density save grids differ");
    for (std::size_t k = 0; k < T; ++k)
      if (std::abs(tr.snapshots[k].t - run.states[k].t) > 1e-9)
        throw std::invalid_argument("run: particle and density save times differ");
  }
  const auto& spec = kernel.spec();
  const int d = spec.d;
  const double s = spec.s;
  MeanFieldSolver solver(spec, flow, run.states.front().geo, run.states.front().n);
  std::vector<double> t;
  for (const auto& st : run.states) t.push_back(st.t);
  const auto Nu = cumulative_regularity(t, transport_norms(run.states, a, solver));

  GronwallReport r;
  r.N = run.particles.front().snapshots.front().x.size();
  const double N = static_cast<double>(r.N);
  for (std::size_t k = 0; k < T; ++k) {
    GronwallSample g;
    g.t = t[k];
    for (const auto& tr : run.particles) g.F_N += tr.snapshots[k].F_N;
    g.F_N /= static_cast<double>(run.particles.size());
    const double m = run.states[k].linf;
    if (s == 0.0) g.log_term = std::log(N * m) / (2.0 * N * d);
    g.additive = std::pow(m, s / d) * std::pow(N, s / d - 1.0);
    if (!flow.deterministic()) g.ito = std::pow(m, (s + 2) / d) * std::pow(N, (s + 2) / d - 1.0) / flow.beta;
    g.N_u = Nu[k];
    r.samples.push_back(g);
  }
  r.C = fit_C(r, T);
  return r;
}

double gronwall_fit(const GronwallReport& r, double T) {
  std::size_t upto = 0;
  while (upto < r.samples.size() && r.samples[upto].t <= T + 1e-12) ++upto;
  return fit_C(r, upto);
}

GronwallSweep gronwall_sweep(const std::vector<GronwallReport>& reports, double factor) {
  GronwallSweep s;
  for (const auto& r : reports) {
    s.N.push_back(r.N);
    s.C.push_back(r.C);
  }
  if (s.C.empty()) return s;
  const auto [lo, hi] = std::minmax_element(s.C.begin(), s.C.end());
  s.spread = *hi / *lo;
  s.stable = std::isfinite(s.spread) && s.spread <= factor;
  return s;
}

VFieldLemma vfield_norm_lemma_check(const GridField& f, const PotentialSpec& spec, double a, double p, double alpha) {
  const int d = spec.d;
  const double s = spec.s;
  if (f.geo.d != d) throw std::invalid_argument("f: dimension does not match spec");
  if (!(s < d - 2.0)) throw std::invalid_argument("s: lemma requires s < d - 2");
  if (!(p > d / (d - s - 2.0))) throw std::invalid_argument("p: must exceed d / (d - s - 2)");
  if (!(a > d && a < d + 2)) throw std::invalid_argument("a: must lie in (d, d+2)");
  const bool smoothing = s <= d - 1.0 - 0.5 * a;
  if (!smoothing && !(alpha >= 0.5 * a + 1.0 + s - d && alpha < s + 2.0))
    throw std::invalid_argument("alpha: must lie in [a/2 + 1 + s - d, s + 2)");

  VFieldLemma out;
  const int n = f.n;
  const auto c = forward(f);
  const auto k = wavenumbers(d, n);
  Truncation tr(spec);
  const double w = 2.0 * kPi / f.geo.L;
  // v = -grad g * f (M = -I)
  GridVector v, dv;
  std::vector<std::vector<cplx>> vc(d, std::vector<cplx>(c.size(), 0.0));
  for (std::size_t i = 0; i < c.size(); ++i) {
    double q = 0;
    for (int b = 0; b < d; ++b) q += static_cast<double>(k[b][i]) * k[b][i];
    if (q == 0) continue;
    const double gh = tr.fourier_g(std::sqrt(q) / f.geo.L);
    for (int b = 0; b < d; ++b) vc[b][i] = -cplx(0.0, w * k[b][i]) * gh * c[i];
  }
  for (int b = 0; b < d; ++b) {
    v.push_back(inverse(vc[b], f.geo, n));
    for (int e = 0; e < d; ++e) {
      std::vector<cplx> q(c.size());
      for (std::size_t i = 0; i < c.size(); ++i) q[i] = cplx(0.0, w * k[e][i]) * vc[b][i];
      dv.push_back(inverse(q, f.geo, n));
    }
  }
  out.lhs_grad = lp_norm(dv, INFINITY);
  const double th1 = (p * (d - s - 2.0) - d) / (d * (p - 1.0)), th2 = p * (s + 2.0) / (d * (p - 1.0));
  out.rhs_grad = std::pow(lp_norm(f, 1.0), th1) * std::pow(lp_norm(f, p), th2);
  GridVector fv;
  for (const auto& vb : v) fv.push_back(apply_multiplier(vb, frac_laplacian(0.5 * a)));
  out.lhs_frac = lp_norm(fv, 2.0 * d / (a - 2.0));
  out.rhs_frac = smoothing ? lp_norm(f, d / (d - 2.0 - s))
                           : lp_norm(apply_multiplier(f, frac_laplacian(alpha)), d / (alpha + d - 2.0 - s));
  return out;
}

}  // namespace modlab
