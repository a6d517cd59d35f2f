#include "modlab/commutator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace modlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_zero(std::span<const int> k) {
  return std::all_of(k.begin(), k.end(), [](int v) { return v == 0; });
}

// Fourier multiplier of d_c g_T: V * L^{-d} ghat(|k|/L) * (2 pi i k_c / L).
TrigPoly grad_conv(const TrigPoly& p, const PeriodizedKernel& g, int c) {
  const double V = g.geometry().volume(), L = g.geometry().L;
  return p.multiplier([&](std::span<const int> k) {
    if (is_zero(k)) return cplx(0.0);
    return cplx(0.0, V * g.fourier(k) * kTwoPi * k[c] / L);
  });
}

double sq_frobenius(const std::vector<TrigPoly>& dv, std::span<const double> x) {
  double s = 0.0;
  for (const auto& p : dv) {
    const double v = p.eval(x);
    s += v * v;
  }
  return s;
}

}  // namespace

TransportTerms transport_quadratic_form(const Configuration& c, const TorusDensity& mu, const VectorField& v,
                                        const PeriodizedKernel& g) {
  const int d = c.d;
  if (static_cast<int>(v.size()) != d) throw std::invalid_argument("v: needs d components");
  c.check_distinct();
  const std::size_t N = c.size();
  const double Nd = static_cast<double>(N);
  TransportTerms t;

  const auto E = g.pair_gradients(c);
  std::vector<std::vector<double>> vx(d);
  for (int a = 0; a < d; ++a) vx[a] = v[a].eval_points(c);
  double pair = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    for (int a = 0; a < d; ++a) pair += vx[a][i] * E[i * d + a];
  t.pair = 2.0 * pair / (Nd * Nd);

  double cross = 0.0, self = 0.0;
  for (int a = 0; a < d; ++a) {
    const TrigPoly gm = grad_conv(mu.p, g, a);
    const TrigPoly gv = grad_conv(v[a] * mu.p, g, a);
    const auto gm_x = gm.eval_points(c), gv_x = gv.eval_points(c);
    for (std::size_t i = 0; i < N; ++i) cross += vx[a][i] * gm_x[i] - gv_x[i];
    self += (v[a] * gm * mu.p).integral();
  }
  t.cross = -2.0 * cross / Nd;
  t.self = 2.0 * self;
  t.total = t.pair + t.cross + t.self;
  return t;
}

LinearField LinearField::identity(int d) {
  LinearField f;
  f.d = d;
  f.A.assign(d * d, 0.0);
  for (int a = 0; a < d; ++a) f.A[a * d + a] = 1.0;
  f.b.assign(d, 0.0);
  return f;
}

void LinearField::apply(std::span<const double> x, std::span<double> out) const {
  for (int a = 0; a < d; ++a) {
    double s = b[a];
    for (int c = 0; c < d; ++c) s += A[a * d + c] * x[c];
    out[a] = s;
  }
}

TransportTerms transport_quadratic_form(const Configuration& c, const GaussianDensity& mu, const LinearField& v) {
  const int d = c.d;
  if (c.torus) throw std::invalid_argument("config: whole-space configuration required");
  c.check_distinct();
  const std::size_t N = c.size();
  const double Nd = static_cast<double>(N), s = mu.s(), s2 = mu.sigma() * mu.sigma();
  TransportTerms t;

  std::vector<double> row(N, 0.0);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t i = 0; i < N; ++i) {
    double acc = 0.0, z[3], Az[3];
    for (std::size_t j = i + 1; j < N; ++j) {
      double r2 = 0.0;
      for (int a = 0; a < d; ++a) {
        z[a] = c.x[i * d + a] - c.x[j * d + a];
        r2 += z[a] * z[a];
      }
      for (int a = 0; a < d; ++a) {
        Az[a] = 0.0;
        for (int b = 0; b < d; ++b) Az[a] += v.A[a * d + b] * z[b];
      }
      double dot = 0.0;
      for (int a = 0; a < d; ++a) dot += Az[a] * z[a];
      acc -= dot * std::pow(r2, -0.5 * s - 1.0);
    }
    row[i] = acc;
  }
  double pair = 0.0;
  for (double x : row) pair += x;
  t.pair = 2.0 * pair / (Nd * Nd);

  std::vector<double> gr(d), H(d * d);
  double cross = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const auto x = c.point(i);
    mu.potential_gradient(x, gr);
    mu.potential_hessian(x, H);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) cross += v.A[a * d + b] * (x[b] * gr[a] + s2 * H[a * d + b]);
  }
  t.cross = -2.0 * cross / Nd;
  double tr = 0.0;
  for (int a = 0; a < d; ++a) tr += v.A[a * d + a];
  t.self = tr * mu.self_profile_slope();
  t.total = t.pair + t.cross + t.self;
  return t;
}

TransportNorm transport_norm(const VectorField& v, double a, int grid) {
  if (v.empty()) throw std::invalid_argument("v: empty field");
  const auto& geo = v.front().geometry();
  const int d = geo.d;
  if (!(a > d && a < d + 2)) throw std::invalid_argument("a: must lie in (d, d+2)");
  int band = 0;
  for (const auto& p : v) band = std::max(band, p.K());
  if (grid <= 0) {
    grid = 1;
    while (grid < std::max(64, 16 * band + 1)) grid *= 2;
    if (d == 3) grid = std::max(32, grid / 4);
  }
  std::vector<TrigPoly> dv;
  for (const auto& p : v)
    for (int b = 0; b < d; ++b) dv.push_back(p.derivative(b));

  // grid max of |grad v|, then coordinate-wise golden refinement around it
  std::vector<GridField> dvg;
  for (const auto& p : dv) dvg.push_back(GridField::from_poly(p, grid));
  std::size_t best = 0;
  double bv = -1.0;
  for (std::size_t i = 0; i < dvg.front().size(); ++i) {
    double s = 0.0;
    for (const auto& f : dvg) s += f.values[i] * f.values[i];
    if (s > bv) {
      bv = s;
      best = i;
    }
  }
  std::vector<double> x(d);
  {
    std::size_t r = best;
    for (int ax = d - 1; ax >= 0; --ax) {
      x[ax] = geo.L * static_cast<double>(r % grid) / grid;
      r /= grid;
    }
  }
  const double h = geo.L / grid;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int sweep = 0; sweep < 4; ++sweep)
    for (int ax = 0; ax < d; ++ax) {
      double lo = x[ax] - h, hi = x[ax] + h;
      auto f = [&](double t) {
        auto y = x;
        y[ax] = t;
        return sq_frobenius(dv, y);
      };
      double c1 = hi - gr * (hi - lo), c2 = lo + gr * (hi - lo);
      double f1 = f(c1), f2 = f(c2);
      for (int it = 0; it < 60; ++it) {
        if (f1 > f2) {
          hi = c2;
          c2 = c1;
          f2 = f1;
          c1 = hi - gr * (hi - lo);
          f1 = f(c1);
        } else {
          lo = c1;
          c1 = c2;
          f1 = f2;
          c2 = lo + gr * (hi - lo);
          f2 = f(c2);
        }
      }
      const double t = 0.5 * (lo + hi);
      if (f(t) > sq_frobenius(dv, x)) x[ax] = t;
    }
  TransportNorm out;
  out.lipschitz = std::sqrt(std::max(bv, sq_frobenius(dv, x)));
  if (a > 2.0) {
    const double L = geo.L;
    std::vector<GridField> w;
    for (const auto& p : v) {
      const TrigPoly q = p.multiplier([&](std::span<const int> k) {
        double k2 = 0.0;
        for (int c : k) k2 += static_cast<double>(c) * c;
        return std::pow(kTwoPi * std::sqrt(k2) / L, 0.5 * a);
      });
      w.push_back(GridField::from_poly(q, grid));
    }
    out.fractional = lp_norm(w, 2.0 * d / (a - 2.0));
  }
  out.total = out.lipschitz + out.fractional;
  return out;
}

VectorField random_vector_field(TorusGeometry g, int band, Philox& rng) {
  VectorField v;
  ModeBox box{g.d, band};
  std::vector<int> k(g.d), mk(g.d);
  for (int a = 0; a < g.d; ++a) {
    TrigPoly p(g, band);
    for (std::size_t i = box.size() / 2 + 1; i < box.size(); ++i) {
      box.mode(i, k);
      for (int b = 0; b < g.d; ++b) mk[b] = -k[b];
      const cplx z(rng.normal() / std::sqrt(2.0), rng.normal() / std::sqrt(2.0));
      p.at(k) = z;
      p.at(mk) = std::conj(z);
    }
    v.push_back(std::move(p));
  }
  return v;
}

std::string to_string(Sampler s) {
  switch (s) {
    case Sampler::iid:
      return "iid";
    case Sampler::lattice:
      return "lattice";
    case Sampler::cluster:
      return "cluster";
  }
  return "?";
}

Configuration sample(Sampler s, const TorusDensity& mu, std::size_t N, Philox& rng) {
  switch (s) {
    case Sampler::iid:
      return sample_iid(mu, N, rng);
    case Sampler::lattice:
      return jittered_lattice(mu.geometry(), N, 0.3, rng);
    case Sampler::cluster:
      return two_cluster(mu.geometry(), N, 0.25, rng);
  }
  throw std::invalid_argument("sampler");
}

FIResult fi_ratio_experiment(int trials, const std::vector<std::size_t>& N_list, const PotentialSpec& spec,
                             std::uint64_t seed, const FIOptions& opt) {
  if (N_list.empty() || trials < 1) throw std::invalid_argument("fi_ratio_experiment: empty sweep");
  const TorusGeometry g{spec.d, 1.0};
  Philox setup(seed, 0xF1u);
  const TorusDensity mu = TorusDensity::random(g, opt.mu_band, opt.mu_amplitude, setup);
  const VectorField v = random_vector_field(g, opt.v_band, setup);
  const double norm = transport_norm(v, spec.a).total;
  const double s = spec.s;

  FIResult res;
  for (std::size_t n_idx = 0; n_idx < N_list.size(); ++n_idx) {
    const std::size_t N = N_list[n_idx];
    const double lam = microscale(N, mu.linf, g.d);
    EwaldOptions eo;
    eo.eta = std::min(lam, 0.4 * g.L);
    eo.tol = opt.ewald_tol;
    const PeriodizedKernel kern(spec, g, eo);
    struct Raw {
      Sampler smp;
      int trial;
      double lhs, F, logt, scale;
    };
    std::vector<Raw> raw;
    for (Sampler smp : opt.samplers)
      for (int t = 0; t < trials; ++t) {
        Philox rng(seed, static_cast<std::uint32_t>(N), static_cast<std::uint32_t>(smp),
                   static_cast<std::uint32_t>(t));
        const Configuration c = sample(smp, mu, N, rng);
        const auto lb = lower_bound_sample(c, mu, kern);
        const double q = transport_quadratic_form(c, mu, v, kern).total;
        raw.push_back({smp, t, q, lb.F_N, lb.log_term, lb.scale});
      }
    if (n_idx == 0) {
      double C = 0.0;
      for (const auto& r : raw) C = std::max(C, std::max(0.0, -(r.F + r.logt)) / r.scale);
      res.offset_C = std::max(1.0, 2.0 * C);
    }
    double sup = 0.0;
    for (const auto& r : raw) {
      const double core = r.F + r.logt + res.offset_C * r.scale;
      const double ratio = std::abs(r.lhs) / (norm * core);
      sup = std::max(sup, ratio);
      res.records.push_back({seed, N, g.d, s, spec.a, r.smp, r.trial, r.lhs, norm, core, ratio});
    }
    res.N.push_back(N);
    res.sup_ratio.push_back(sup);
  }
  return res;
}

TruncatedCommutator truncated_commutator_check(const TrigPoly& f, const VectorField& v, double eta,
                                               const PotentialSpec& spec, Profile phi) {
  const auto& geo = f.geometry();
  const int d = geo.d;
  if (static_cast<int>(v.size()) != d) throw std::invalid_argument("v: needs d components");
  std::vector<int> zero(d, 0);
  double cmax = 0.0;
  for (const auto& c : f.coeffs()) cmax = std::max(cmax, std::abs(c));
  if (spec.s == 0.0 && std::abs(f.at(zero)) > 1e-13 * cmax)
    throw std::invalid_argument("f: must have zero mean for s = 0");
  const Truncation tr(spec, phi);
  const double L = geo.L;
  const TrigPoly conv = f.multiplier([&](std::span<const int> k) {
    if (is_zero(k)) return 0.0;
    double k2 = 0.0;
    for (int c : k) k2 += static_cast<double>(c) * c;
    return tr.fourier_g_eta(std::sqrt(k2) / L, eta);
  });
  TruncatedCommutator out;
  double lhs = 0.0;
  for (int a = 0; a < d; ++a) lhs += (f * v[a] * conv.derivative(a)).integral();
  out.lhs = 2.0 * lhs;
  out.quadratic = (f * conv).integral();
  out.norm = transport_norm(v, spec.a).total;
  out.ratio = std::abs(out.lhs) / (out.norm * out.quadratic);
  return out;
}

}  // namespace modlab
