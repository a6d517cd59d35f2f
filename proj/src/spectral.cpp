#include "modlab/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <tuple>

#include "modlab/quadrature.hpp"

namespace modlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

fftw_plan get_plan(int d, int n, int sign) {
  static std::map<std::tuple<int, int, int>, fftw_plan> plans;
  std::lock_guard<std::mutex> lock(plan_mutex());
  auto key = std::make_tuple(d, n, sign);
  auto it = plans.find(key);
  if (it != plans.end()) return it->second;
  int dims[3] = {n, n, n};
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(n);
  fftw_complex* buf = fftw_alloc_complex(total);
  fftw_plan p = fftw_plan_dft(d, dims, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(buf);
  plans.emplace(key, p);
  return p;
}

void transform(std::vector<cplx>& data, int d, int n, int sign) {
  fftw_plan p = get_plan(d, n, sign);
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(p, ptr, ptr);
}

// Calls f(idx, k) for every FFT index with its integer wavenumber vector.
template <class F>
void for_modes(int d, int n, F&& f) {
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(n);
  int k[3] = {0, 0, 0};
  for (std::size_t g = 0; g < total; ++g) {
    std::size_t r = g;
    for (int a = d - 1; a >= 0; --a) {
      k[a] = wavenumber(static_cast<int>(r % n), n);
      r /= n;
    }
    f(g, k);
  }
}

double k_norm(const int* k, int d, double L) {
  double s = 0.0;
  for (int a = 0; a < d; ++a) s += static_cast<double>(k[a]) * k[a];
  return kTwoPi * std::sqrt(s) / L;
}

bool is_nyquist(const int* k, int d, int n) {
  if (n % 2) return false;
  for (int a = 0; a < d; ++a)
    if (k[a] == n / 2) return true;
  return false;
}

double lebesgue_exponent(double order, int d, double eps_plus) {
  if (std::abs(2.0 * order - d) < 1e-12) return 2.0 + eps_plus;
  if (order == 0.0) return std::numeric_limits<double>::infinity();
  return std::max(d / order, 2.0);
}

std::vector<GridField> gradient_matrix(const GridVector& v) {
  const int d = v.front().geo.d;
  std::vector<GridField> out;
  for (int a = 0; a < static_cast<int>(v.size()); ++a)
    for (int b = 0; b < d; ++b) out.push_back(apply_multiplier(v[a], partial(b)));
  return out;
}

int pow2_at_least(int m) {
  int n = 1;
  while (n < m) n *= 2;
  return n;
}

}  // namespace

GridField::GridField(TorusGeometry g, int n_) : geo(g), n(n_) {
  if (n < 1) throw std::invalid_argument("n: grid size must be >= 1");
  std::size_t total = 1;
  for (int a = 0; a < g.d; ++a) total *= static_cast<std::size_t>(n);
  values.assign(total, 0.0);
}

GridField GridField::from_poly(const TrigPoly& p, int n) {
  if (2 * p.K() >= n) throw aliasing_error("grid: n must exceed twice the polynomial band");
  const int d = p.geometry().d;
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(n);
  std::vector<cplx> c(total);
  for_modes(d, n, [&](std::size_t g, const int* k) {
    for (int a = 0; a < d; ++a)
      if (std::abs(k[a]) > p.K()) return;
    c[g] = p.at(std::span<const int>(k, d));
  });
  return inverse(c, p.geometry(), n);
}

double GridField::cell_volume() const { return geo.volume() / static_cast<double>(values.size()); }

int GridField::band(double tol) const {
  const auto c = forward(*this);
  double mx = 0.0;
  for (const auto& v : c) mx = std::max(mx, std::abs(v));
  int b = 0;
  for_modes(geo.d, n, [&](std::size_t g, const int* k) {
    if (std::abs(c[g]) > tol * mx)
      for (int a = 0; a < geo.d; ++a) b = std::max(b, std::abs(k[a]));
  });
  return b;
}

std::vector<cplx> forward(const GridField& f) {
  std::vector<cplx> c(f.values.begin(), f.values.end());
  transform(c, f.geo.d, f.n, FFTW_FORWARD);
  const double inv = 1.0 / static_cast<double>(c.size());
  for (auto& v : c) v *= inv;
  return c;
}

GridField inverse(const std::vector<cplx>& c, TorusGeometry g, int n) {
  std::vector<cplx> w = c;
  transform(w, g.d, n, FFTW_BACKWARD);
  GridField f(g, n);
  for (std::size_t i = 0; i < w.size(); ++i) f.values[i] = w[i].real();
  return f;
}

MultiplierSpec bracket(double alpha) { return {MultiplierSpec::Kind::inhomogeneous, alpha, 0}; }
MultiplierSpec frac_laplacian(double alpha) { return {MultiplierSpec::Kind::homogeneous, alpha, 0}; }
MultiplierSpec partial(int axis) { return {MultiplierSpec::Kind::gradient, 1.0, axis}; }
MultiplierSpec riesz_transform(int axis) { return {MultiplierSpec::Kind::riesz, 0.0, axis}; }

GridField apply_multiplier(const GridField& f, const MultiplierSpec& m) {
  const int d = f.geo.d;
  const double L = f.geo.L;
  auto c = forward(f);
  double cmax = 0.0;
  for (const auto& v : c) cmax = std::max(cmax, std::abs(v));
  for_modes(d, f.n, [&](std::size_t g, const int* k) {
    const double w = k_norm(k, d, L);
    switch (m.kind) {
      case MultiplierSpec::Kind::inhomogeneous:
        c[g] *= std::pow(1.0 + w * w, 0.5 * m.alpha);
        break;
      case MultiplierSpec::Kind::homogeneous:
        if (w == 0.0) {
          if (m.alpha < 0.0 && std::abs(c[g]) > 1e-12 * std::max(cmax, 1.0))
            throw std::invalid_argument("f: negative homogeneous power needs zero-mean input");
          if (m.alpha != 0.0) c[g] = 0.0;
        } else {
          c[g] *= std::pow(w, m.alpha);
        }
        break;
      case MultiplierSpec::Kind::gradient:
        c[g] *= is_nyquist(k, d, f.n) ? cplx(0.0) : cplx(0.0, kTwoPi * k[m.axis] / L);
        break;
      case MultiplierSpec::Kind::riesz:
        c[g] *= (w == 0.0 || is_nyquist(k, d, f.n)) ? cplx(0.0) : cplx(0.0, kTwoPi * k[m.axis] / L / w);
        break;
    }
  });
  return inverse(c, f.geo, f.n);
}

double sobolev_norm(const GridField& f, double alpha, bool homogeneous) {
  const int d = f.geo.d;
  const double L = f.geo.L;
  const auto c = forward(f);
  double s = 0.0;
  for_modes(d, f.n, [&](std::size_t g, const int* k) {
    const double w = k_norm(k, d, L);
    double sym;
    if (homogeneous) {
      if (w == 0.0) {
        if (alpha < 0.0 && std::abs(c[g]) > 1e-12) throw std::invalid_argument("f: needs zero mean");
        sym = alpha == 0.0 ? 1.0 : 0.0;
      } else {
        sym = std::pow(w, 2.0 * alpha);
      }
    } else {
      sym = std::pow(1.0 + w * w, alpha);
    }
    s += sym * std::norm(c[g]);
  });
  return std::sqrt(f.geo.volume() * s);
}

double lp_norm(const GridField& f, double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (double v : f.values) m = std::max(m, std::abs(v));
    return m;
  }
  if (!(p >= 1.0)) throw std::invalid_argument("p: must be >= 1");
  double s = 0.0;
  for (double v : f.values) s += std::pow(std::abs(v), p);
  return std::pow(s * f.cell_volume(), 1.0 / p);
}

double lp_norm(const std::vector<GridField>& fs, double p) {
  GridField mag(fs.front().geo, fs.front().n);
  for (const auto& f : fs)
    for (std::size_t i = 0; i < mag.size(); ++i) mag.values[i] += f.values[i] * f.values[i];
  for (auto& v : mag.values) v = std::sqrt(v);
  return lp_norm(mag, p);
}

namespace {

void check_cubic_alias(const GridVector& v, const GridField& f) {
  int kv = 0;
  for (const auto& c : v) kv = std::max(kv, c.band());
  const int kf = f.band();
  if (f.n < kv + 2 * kf + 1)
    throw aliasing_error("grid: n = " + std::to_string(f.n) + " too small for a cubic integrand of band " +
                         std::to_string(kv + 2 * kf));
}

double dot_integral(const GridVector& v, const GridVector& grad, const GridField& h) {
  double s = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    double vg = 0.0;
    for (std::size_t a = 0; a < v.size(); ++a) vg += v[a].values[i] * grad[a].values[i];
    s += vg * h.values[i];
  }
  return s * h.cell_volume();
}

}  // namespace

double kato_ponce_lhs(const GridVector& v, const GridField& f, double alpha) {
  check_cubic_alias(v, f);
  GridVector grad;
  for (int a = 0; a < f.geo.d; ++a) grad.push_back(apply_multiplier(f, partial(a)));
  return dot_integral(v, grad, apply_multiplier(f, bracket(alpha)));
}

double kato_ponce_symmetric_part(const GridVector& v, const GridField& f, double alpha) {
  check_cubic_alias(v, f);
  const GridField h = apply_multiplier(f, bracket(0.5 * alpha));
  GridVector grad;
  for (int a = 0; a < f.geo.d; ++a) grad.push_back(apply_multiplier(h, partial(a)));
  return dot_integral(v, grad, h);
}

double kato_ponce_by_parts(const GridVector& v, const GridField& f, double alpha) {
  check_cubic_alias(v, f);
  const GridField h = apply_multiplier(f, bracket(0.5 * alpha));
  GridField div(f.geo, f.n);
  for (int a = 0; a < f.geo.d; ++a) {
    const auto da = apply_multiplier(v[a], partial(a));
    for (std::size_t i = 0; i < div.size(); ++i) div.values[i] += da.values[i];
  }
  double s = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) s += div.values[i] * h.values[i] * h.values[i];
  return -0.5 * s * h.cell_volume();
}

Avals avals_constant(const GridVector& v, double alpha, double eps_plus) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha: must be >= 0");
  const int d = v.front().geo.d;
  const int m = alpha == 0.0 ? 0 : static_cast<int>(std::ceil(0.5 * alpha)) - 1;
  const double r = alpha - 2.0 * m;
  const auto Dv = gradient_matrix(v);
  Avals out;
  auto add = [&](const std::string& label, double order, double p, double value) {
    out.terms.push_back({label, order + 1.0, p, value});
    out.total += value;
  };
  add("grad v", 0.0, std::numeric_limits<double>::infinity(), lp_norm(Dv, std::numeric_limits<double>::infinity()));
  for (int j = 0; j < m; ++j) {
    std::vector<GridField> a, b;
    for (const auto& f : Dv) {
      a.push_back(apply_multiplier(f, frac_laplacian(j)));
      b.push_back(apply_multiplier(f, frac_laplacian(0.5 * r + j)));
    }
    const double pa = lebesgue_exponent(j, d, eps_plus);
    const double pb = lebesgue_exponent(0.5 * r + j, d, eps_plus);
    add("|grad|^" + std::to_string(j) + " grad v", j, pa, lp_norm(a, pa));
    add("|grad|^" + std::to_string(0.5 * r + j) + " grad v", 0.5 * r + j, pb, lp_norm(b, pb));
  }
  return out;
}

GridField random_band_limited(TorusGeometry g, int band, int n, Philox& rng, bool zero_mean) {
  if (2 * band >= n) throw aliasing_error("grid: n must exceed twice the band");
  const int d = g.d;
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(n);
  std::vector<cplx> c(total);
  auto index = [&](const int* k) {
    std::size_t idx = 0;
    for (int a = 0; a < d; ++a) idx = idx * n + static_cast<std::size_t>((k[a] + n) % n);
    return idx;
  };
  ModeBox box{d, band};
  std::vector<int> k(d), mk(d);
  for (std::size_t i = box.size() / 2; i < box.size(); ++i) {
    box.mode(i, k);
    for (int a = 0; a < d; ++a) mk[a] = -k[a];
    const double re = rng.normal(), im = rng.normal();
    if (i == box.size() / 2) {
      c[index(k.data())] = zero_mean ? 0.0 : re;
      continue;
    }
    const cplx z(re / std::sqrt(2.0), im / std::sqrt(2.0));
    c[index(k.data())] = z;
    c[index(mk.data())] = std::conj(z);
  }
  return inverse(c, g, n);
}

KPResult kp_ratio_experiment(int trials, double alpha, int band, std::uint64_t seed, int d, double eps_plus) {
  if (trials < 1) throw std::invalid_argument("trials: must be >= 1");
  TorusGeometry g{d, 1.0};
  const int n = pow2_at_least(3 * band + 1);
  KPResult res;
  res.records.resize(trials);
  std::vector<char> skip(trials, 0);
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < trials; ++t) {
    Philox rng(seed, static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(band), 7u);
    GridVector v;
    for (int a = 0; a < d; ++a) v.push_back(random_band_limited(g, band, n, rng));
    const GridField f = random_band_limited(g, band, n, rng, false);
    const double norm = sobolev_norm(f, 0.5 * alpha);
    KPRecord rec{seed, band, t, 0, 0, norm * norm, 0};
    if (norm == 0.0) {
      skip[t] = 1;
      res.records[t] = rec;
      continue;
    }
    rec.lhs = kato_ponce_lhs(v, f, alpha);
    rec.A = avals_constant(v, alpha, eps_plus).total;
    rec.ratio = std::abs(rec.lhs) / (rec.A * rec.norm2);
    res.records[t] = rec;
  }
  for (int t = 0; t < trials; ++t) {
    if (skip[t]) {
      ++res.skipped;
      continue;
    }
    res.max_ratio = std::max(res.max_ratio, res.records[t].ratio);
  }
  return res;
}

LeibnizResult leibniz_check(const GridField& f, const GridField& g, double r, const std::vector<int>& multi_index,
                            double eps_plus) {
  if (!(r > 0.0 && r <= 2.0)) throw std::invalid_argument("r: must lie in (0, 2]");
  const int d = f.geo.d;
  if (static_cast<int>(multi_index.size()) != d) throw std::invalid_argument("multi_index: length must equal d");
  if (f.n < 2 * (f.band() + g.band()) + 1) throw aliasing_error("grid: too small for the product f g");
  GridField fg(f.geo, f.n);
  for (std::size_t i = 0; i < fg.size(); ++i) fg.values[i] = f.values[i] * g.values[i];
  int order = 0;
  for (int a = 0; a < d; ++a) {
    order += multi_index[a];
    for (int t = 0; t < multi_index[a]; ++t) fg = apply_multiplier(fg, partial(a));
  }
  LeibnizResult out;
  out.lhs = sobolev_norm(apply_multiplier(fg, bracket(0.5 * r)), 0.0);
  double A = 0.0;
  for (int j = 0; j <= order; ++j) {
    const double pa = lebesgue_exponent(j, d, eps_plus);
    const double pb = lebesgue_exponent(0.5 * r + j, d, eps_plus);
    A += lp_norm(j == 0 ? f : apply_multiplier(f, frac_laplacian(j)), pa);
    A += lp_norm(apply_multiplier(f, frac_laplacian(0.5 * r + j)), pb);
  }
  out.rhs_factor = sobolev_norm(g, order + 0.5 * r) * A;
  out.ratio = out.lhs / out.rhs_factor;
  return out;
}

// ---------------------------------------------------------------------------
// Extension problem

double d2n_constant(double s) { return std::tgamma(-0.5 * s) / (std::pow(2.0, s) * std::tgamma(0.5 * s)); }

double cs_energy_constant(double s) {
  return 4.0 * std::tgamma(1.0 - 0.5 * s) / (std::pow(2.0, s) * std::tgamma(0.5 * s));
}

static void check_s(double s) {
  if (!(s > 0.0 && s < 2.0)) throw std::invalid_argument("s: extension order must lie in (0, 2)");
}

double cs_profile_minus_one(double m, double s, double z) {
  check_s(s);
  if (z == 0.0) return 0.0;
  const double nu = 0.5 * s;
  const double a = 0.25 * z * z * m * m;
  auto f = [&](double u) {
    const double t = std::exp(u);
    return std::exp(-t) * std::pow(t, nu) * std::expm1(-a / t);
  };
  const double lo = std::log(std::min(a, 1.0)) + std::log(1e-17) / nu;
  const double hi = std::log(60.0 + a);
  std::vector<double> br = {lo};
  for (double c : {std::log(a) - 4.0, std::log(a), std::log(a) + 4.0, 0.0})
    if (c > lo && c < hi) br.push_back(c);
  br.push_back(hi);
  std::sort(br.begin(), br.end());
  // below t_lo: expm1 = -1 up to exp(-a/t), so the piece is -t_lo^nu / nu
  const double head = -std::exp(nu * lo) / nu;
  return (integrate_pieces(f, br, 1e-18, 1e-12) + head) / std::tgamma(nu);
}

double cs_profile(double m, double s, double z) { return 1.0 + cs_profile_minus_one(m, s, z); }

double cs_profile_closed(double m, double s, double z) {
  check_s(s);
  const double x = m * z, nu = 0.5 * s;
  if (x == 0.0) return 1.0;
  if (x > 700.0) return 0.0;
  return 2.0 / std::tgamma(nu) * std::pow(0.5 * x, nu) * std::cyl_bessel_k(nu, x);
}

double cs_profile_dz_closed(double m, double s, double z) {
  check_s(s);
  const double x = m * z, nu = 0.5 * s;
  if (x > 700.0) return 0.0;
  return -m * std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(x, nu) * std::cyl_bessel_k(1.0 - nu, x);
}

namespace {

// <2 pi k / L> for each FFT index.
std::vector<double> bracket_symbols(const GridField& f) {
  std::vector<double> m(f.size());
  for_modes(f.geo.d, f.n, [&](std::size_t g, const int* k) {
    const double w = k_norm(k, f.geo.d, f.geo.L);
    m[g] = std::sqrt(1.0 + w * w);
  });
  return m;
}

// Evaluates fn(m) once per distinct symbol value among the nonzero coefficients.
template <class F>
std::vector<double> per_symbol(const std::vector<double>& m, const std::vector<cplx>& c, F&& fn) {
  std::map<double, double> cache;
  std::vector<double> out(m.size(), 0.0);
  for (std::size_t g = 0; g < m.size(); ++g) {
    if (c[g] == cplx(0.0)) continue;
    auto it = cache.find(m[g]);
    if (it == cache.end()) it = cache.emplace(m[g], fn(m[g])).first;
    out[g] = it->second;
  }
  return out;
}

}  // namespace

std::vector<GridField> cs_extension(const GridField& f, double s, const std::vector<double>& z) {
  check_s(s);
  const auto c = forward(f);
  const auto m = bracket_symbols(f);
  std::vector<GridField> out;
  for (double zz : z) {
    const auto phi = per_symbol(m, c, [&](double mm) { return cs_profile(mm, s, zz); });
    std::vector<cplx> cz(c.size());
    for (std::size_t g = 0; g < c.size(); ++g) cz[g] = c[g] * phi[g];
    out.push_back(inverse(cz, f.geo, f.n));
  }
  return out;
}

GridField cs_dirichlet_to_neumann(const GridField& f, double s, double h) {
  check_s(s);
  const auto c = forward(f);
  const auto m = bracket_symbols(f);
  const double p1 = 2.0 - s, p2 = 2.0;
  const auto lim = per_symbol(m, c, [&](double mm) {
    const double z = h / mm;
    double D[3];
    for (int i = 0; i < 3; ++i) {
      const double zi = z / std::pow(2.0, i);
      D[i] = cs_profile_minus_one(mm, s, zi) / std::pow(zi, s);
    }
    const double r1a = (std::pow(2.0, p1) * D[1] - D[0]) / (std::pow(2.0, p1) - 1.0);
    const double r1b = (std::pow(2.0, p1) * D[2] - D[1]) / (std::pow(2.0, p1) - 1.0);
    return (std::pow(2.0, p2) * r1b - r1a) / (std::pow(2.0, p2) - 1.0);
  });
  std::vector<cplx> cz(c.size());
  for (std::size_t g = 0; g < c.size(); ++g) cz[g] = c[g] * lim[g];
  return inverse(cz, f.geo, f.n);
}

double cs_energy(const GridField& f, double s, double z_min, double rho) {
  check_s(s);
  const auto c = forward(f);
  const auto m = bracket_symbols(f);
  const auto E = per_symbol(m, c, [&](double mm) {
    auto integrand = [&](double z) {
      const double p = cs_profile_closed(mm, s, z), dp = cs_profile_dz_closed(mm, s, z);
      return std::pow(z, 1.0 - s) * (mm * mm * p * p + dp * dp);
    };
    const double z_max = 25.0 / mm;
    std::vector<double> br = {z_min};
    while (br.back() < z_max) br.push_back(br.back() * rho);
    const double body = integrate_pieces(integrand, br, 1e-13, 1e-10);
    // [0, z_min]: phi ~ 1 and phi' ~ s D m^s z^{s-1}
    const double D = d2n_constant(s) * std::pow(mm, s);
    const double head = mm * mm * std::pow(z_min, 2.0 - s) / (2.0 - s) + s * D * D * std::pow(z_min, s);
    return 2.0 * (body + head);
  });
  double total = 0.0;
  for (std::size_t g = 0; g < c.size(); ++g) total += E[g] * std::norm(c[g]);
  return f.geo.volume() * total;
}

}  // namespace modlab
