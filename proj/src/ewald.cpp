#include "modlab/ewald.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace modlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// e^{i k th} for k = 0..K by recurrence, re-anchored every 32 steps.
void phase_row(double th, int K, cplx* row) {
  row[0] = 1.0;
  const cplx step = std::polar(1.0, th);
  for (int k = 1; k <= K; ++k) row[k] = (k % 32 == 0) ? std::polar(1.0, k * th) : row[k - 1] * step;
}

double shell_count(int m, int d) {
  return std::pow(2.0 * m + 1.0, d) - std::pow(2.0 * m - 1.0, d);
}

}  // namespace

// ---------------------------------------------------------------------------
// ChebTable

ChebTable::ChebTable(const std::function<double(double)>& f, double a, double b, double tol, int degree)
    : a_(a), b_(b), deg_(degree) {
  const int m = degree + 1;
  std::vector<double> nodes(m);
  for (int j = 0; j < m; ++j) nodes[j] = std::cos(std::numbers::pi * (j + 0.5) / m);
  double prev_err = std::numeric_limits<double>::infinity();
  for (std::size_t n = 4;; n *= 2) {
    n_ = n;
    const double h = (b - a) / static_cast<double>(n);
    inv_h_ = 1.0 / h;
    c_.assign(n * m, 0.0);
    std::vector<double> fv(m);
    double fmax = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const double lo = a + h * static_cast<double>(p);
      for (int j = 0; j < m; ++j) {
        fv[j] = f(lo + 0.5 * h * (nodes[j] + 1.0));
        fmax = std::max(fmax, std::abs(fv[j]));
      }
      for (int k = 0; k < m; ++k) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += fv[j] * std::cos(std::numbers::pi * k * (j + 0.5) / m);
        c_[p * m + k] = (k == 0 ? 1.0 : 2.0) * s / m;
      }
    }
    double err = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (double u : {0.137, 0.5, 0.911}) {
        const double x = a + h * (static_cast<double>(p) + u);
        err = std::max(err, std::abs((*this)(x) - f(x)));
      }
    }
    // stop at the tolerance or once refinement no longer helps (roundoff floor)
    if (err <= tol * std::max(fmax, 1e-300) || n >= 4096 || (n > 4 && err > 0.5 * prev_err)) return;
    prev_err = err;
  }
}

double ChebTable::operator()(double x) const {
  double u = (x - a_) * inv_h_;
  std::size_t p = u <= 0.0 ? 0 : static_cast<std::size_t>(u);
  if (p >= n_) p = n_ - 1;
  const double t = 2.0 * (u - static_cast<double>(p)) - 1.0;
  const double* c = c_.data() + p * (deg_ + 1);
  double b1 = 0.0, b2 = 0.0;
  for (int k = deg_; k >= 1; --k) {
    const double b0 = 2.0 * t * b1 - b2 + c[k];
    b2 = b1;
    b1 = b0;
  }
  return t * b1 - b2 + c[0];
}

// ---------------------------------------------------------------------------
// PeriodizedKernel

PeriodizedKernel::PeriodizedKernel(const PotentialSpec& spec, TorusGeometry geo, EwaldOptions opt)
    : tr_(spec, opt.phi), geo_(geo), opt_(opt) {
  if (geo.d != spec.d) throw std::invalid_argument("geometry: dimension differs from spec.d");
  if (!(geo.L > 0.0)) throw std::invalid_argument("L: box length must be > 0");
  if (geo.d > 3) throw std::invalid_argument("d: torus kernels support d <= 3");
  eta_ = opt.eta > 0.0 ? opt.eta : geo.L / 8.0;
  opt_.eta = eta_;
  if (!(eta_ < geo.L / 2.0)) throw std::invalid_argument("eta: must lie in (0, L/2)");
  tol_ = opt.tol;
  M_ = tr_.f_eta_mass(eta_) / geo.volume();

  // near-field cutoff: f_eta(rc) <= tol / 100
  const double target = 1e-2 * tol_;
  double hi = eta_;
  while (tr_.f_eta(hi, eta_) > target) hi *= 2.0;
  double lo = hi / 2.0;
  for (int it = 0; it < 60 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (tr_.f_eta(mid, eta_) > target ? lo : hi) = mid;
  }
  rc_ = hi;
  images_ = static_cast<int>(std::ceil(rc_ / geo.L));

  choose_K(opt.K, opt.K_cap, tol_);
  build_modes();

  tab_ = opt.tabulate && opt.phi == Profile::gaussian && spec.zeta.kind == Weight::Kind::exact;
  if (tab_) {
    const double w_hi = rc_ * rc_;
    G_ = ChebTable([&](double w) { return tr_.g_eta(std::sqrt(w), eta_); }, 0.0, w_hi, 1e-15);
    H_ = ChebTable(
        [&](double w) {
          if (w == 0.0) {
            const double r = 1e-6 * eta_;
            return tr_.g_eta_dr(r, eta_) / r;
          }
          const double r = std::sqrt(w);
          return tr_.g_eta_dr(r, eta_) / r;
        },
        0.0, w_hi, 1e-15);
  }
}

void PeriodizedKernel::choose_K(int requested, int cap, double tol) {
  const int d = geo_.d;
  const double L = geo_.L;
  if (requested > 0) {
    K_ = requested;
    return;
  }
  if (tr_.profile().kind() == Profile::bessel) {
    const auto& sp = tr_.spec();
    const double a = sp.a;
    double lead = 1.0;
    if (sp.zeta.kind == Weight::Kind::scaled) lead = sp.zeta.scale;
    if (sp.zeta.kind == Weight::Kind::tabulated) lead = sp.C_zeta() + (sp.s == 0.0 ? 1.0 : 0.0);
    const double b0 = tr_.c() * lead * std::pow(2.0 * std::numbers::pi, -a) * std::pow(eta_, d - sp.s - a) /
                      (a + sp.s - d);
    const double pref = std::pow(L, a - d) * b0 * 2.0 * d * std::pow(3.0, d - 1) / (a - d);
    const double K = std::pow(pref / tol, 1.0 / (a - d));
    if (K > cap) throw under_resolved("K: Fourier cutoff " + std::to_string(K) + " exceeds cap; increase eta");
    K_ = std::max(1, static_cast<int>(std::ceil(K)));
    return;
  }
  std::vector<double> term;
  for (int m = 1;; ++m) {
    const double t = shell_count(m, d) * tr_.fourier_g_eta(m / L, eta_) / geo_.volume();
    term.push_back(t);
    if (t < 1e-6 * tol && m > 2) break;
    if (m > cap) throw under_resolved("K: Fourier tail does not fall below tolerance within cap");
  }
  double tail = 0.0;
  int K = static_cast<int>(term.size());
  for (int m = static_cast<int>(term.size()); m >= 1; --m) {
    tail += term[m - 1];
    if (tail > tol) break;
    K = m - 1;
  }
  K_ = std::max(1, K);
}

void PeriodizedKernel::build_modes() {
  const int d = geo_.d;
  const double L = geo_.L;
  ModeBox box{d, K_};
  std::vector<int> k(d);
  modes_.clear();
  const long K2 = static_cast<long>(K_) * K_;
  std::unordered_map<long, double> radial;
  for (std::size_t i = box.size() / 2 + 1; i < box.size(); ++i) {
    box.mode(i, k);
    long k2 = 0;
    for (int a = 0; a < d; ++a) k2 += static_cast<long>(k[a]) * k[a];
    if (k2 > K2) continue;
    auto [it, fresh] = radial.try_emplace(k2, 0.0);
    double& coef = it->second;
    if (fresh) coef = tr_.fourier_g_eta(std::sqrt(static_cast<double>(k2)) / L, eta_) / geo_.volume();
    HalfMode hm{{0, 0, 0}, coef};
    for (int a = 0; a < d; ++a) hm.k[a] = k[a];
    if (hm.coef > 0.0) modes_.push_back(hm);
  }
}

double PeriodizedKernel::f_r(double r) const {
  if (r >= rc_) return 0.0;
  if (!tab_) return tr_.f_eta(r, eta_);
  const double s = tr_.spec().s;
  double g;
  if (s == 0.0) g = -std::log(r);
  else if (s == 0.5) g = 2.0 / std::sqrt(r);
  else if (s == 1.0) g = 1.0 / r;
  else g = std::pow(r, -s) / s;
  return g - G_(r * r);
}

double PeriodizedKernel::f_dr(double r) const {
  if (r >= rc_) return 0.0;
  if (!tab_) return tr_.f_eta_dr(r, eta_);
  const double s = tr_.spec().s;
  double gd;
  if (s == 0.0) gd = -1.0 / r;
  else if (s == 0.5) gd = -1.0 / (r * std::sqrt(r));
  else if (s == 1.0) gd = -1.0 / (r * r);
  else gd = -std::pow(r, -s - 1.0);
  return gd - r * H_(r * r);
}

double PeriodizedKernel::near_field(std::span<const double> x) const {
  const int d = geo_.d;
  const double L = geo_.L;
  const int m = images_;
  double total = 0.0;
  int n[3] = {-m, -m, -m};
  for (;;) {
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) {
      const double v = x[a] + n[a] * L;
      r2 += v * v;
    }
    if (r2 < rc_ * rc_) {
      if (r2 == 0.0) throw singular_evaluation("g_T: x = 0 mod L");
      total += f_r(std::sqrt(r2));
    }
    int a = 0;
    while (a < d && ++n[a] > m) n[a++] = -m;
    if (a == d) break;
  }
  return total;
}

double PeriodizedKernel::far_field(std::span<const double> x) const {
  const int d = geo_.d;
  const double L = geo_.L;
  std::vector<cplx> ph((K_ + 1) * d);
  for (int a = 0; a < d; ++a) phase_row(kTwoPi * x[a] / L, K_, ph.data() + a * (K_ + 1));
  auto e = [&](int a, int k) { return k >= 0 ? ph[a * (K_ + 1) + k] : std::conj(ph[a * (K_ + 1) - k]); };
  double s = 0.0;
  for (const auto& hm : modes_) {
    cplx v = e(0, hm.k[0]);
    for (int a = 1; a < d; ++a) v *= e(a, hm.k[a]);
    s += hm.coef * v.real();
  }
  return 2.0 * s;
}

double PeriodizedKernel::eval(std::span<const double> x) const {
  std::vector<double> y(x.begin(), x.end());
  geo_.min_image(y);
  return near_field(y) - M_ + far_field(y);
}

void PeriodizedKernel::gradient(std::span<const double> x, std::span<double> out) const {
  const int d = geo_.d;
  const double L = geo_.L;
  std::vector<double> y(x.begin(), x.end());
  geo_.min_image(y);
  std::fill(out.begin(), out.end(), 0.0);
  const int m = images_;
  int n[3] = {-m, -m, -m};
  for (;;) {
    double v[3], r2 = 0.0;
    for (int a = 0; a < d; ++a) {
      v[a] = y[a] + n[a] * L;
      r2 += v[a] * v[a];
    }
    if (r2 < rc_ * rc_) {
      if (r2 == 0.0) throw singular_evaluation("grad g_T: x = 0 mod L");
      const double r = std::sqrt(r2);
      const double fr = f_dr(r) / r;
      for (int a = 0; a < d; ++a) out[a] += fr * v[a];
    }
    int a = 0;
    while (a < d && ++n[a] > m) n[a++] = -m;
    if (a == d) break;
  }
  std::vector<cplx> ph((K_ + 1) * d);
  for (int a = 0; a < d; ++a) phase_row(kTwoPi * y[a] / L, K_, ph.data() + a * (K_ + 1));
  auto e = [&](int a, int k) { return k >= 0 ? ph[a * (K_ + 1) + k] : std::conj(ph[a * (K_ + 1) - k]); };
  for (const auto& hm : modes_) {
    cplx v = e(0, hm.k[0]);
    for (int a = 1; a < d; ++a) v *= e(a, hm.k[a]);
    for (int a = 0; a < d; ++a) out[a] -= 2.0 * hm.coef * (kTwoPi * hm.k[a] / L) * v.imag();
  }
}

double PeriodizedKernel::fourier(std::span<const int> k) const {
  double k2 = 0.0;
  for (int a = 0; a < geo_.d; ++a) k2 += static_cast<double>(k[a]) * k[a];
  if (k2 == 0.0) throw std::invalid_argument("k = 0: the periodic kernel has zero mean");
  return tr_.fourier_g(std::sqrt(k2) / geo_.L) / geo_.volume();
}

void PeriodizedKernel::near_sums(const Configuration& c, std::vector<double>* energy,
                                 std::vector<double>* grad) const {
  const int d = geo_.d;
  const double L = geo_.L;
  const std::size_t N = c.size();
  if (energy) energy->assign(N, 0.0);
  if (grad) grad->assign(N * d, 0.0);
  const double rc2 = rc_ * rc_;

  auto accumulate = [&](std::size_t i, const double* v, double r2) {
    if (r2 >= rc2) return;
    if (r2 == 0.0) throw collision_error("coincident points in pair sum");
    const double r = std::sqrt(r2);
    if (energy) (*energy)[i] += f_r(r);
    if (grad) {
      const double fr = f_dr(r) / r;
      for (int a = 0; a < d; ++a) (*grad)[i * d + a] += fr * v[a];
    }
  };

  const int ncell = static_cast<int>(std::floor(L / rc_));
  if (rc_ < 0.5 * L && ncell >= 3) {
    std::size_t total = 1;
    for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(ncell);
    std::vector<std::size_t> cell_of(N), start(total + 1, 0), order(N);
    for (std::size_t i = 0; i < N; ++i) {
      std::size_t idx = 0;
      for (int a = 0; a < d; ++a) {
        double u = c.x[i * d + a] / L;
        u -= std::floor(u);
        int ci = static_cast<int>(u * ncell);
        if (ci >= ncell) ci = ncell - 1;
        idx = idx * ncell + static_cast<std::size_t>(ci);
      }
      cell_of[i] = idx;
      ++start[idx + 1];
    }
    for (std::size_t q = 0; q < total; ++q) start[q + 1] += start[q];
    {
      std::vector<std::size_t> fill(start.begin(), start.end() - 1);
      for (std::size_t i = 0; i < N; ++i) order[fill[cell_of[i]]++] = i;
    }
    int nb = 1;
    for (int a = 0; a < d; ++a) nb *= 3;
#pragma omp parallel for schedule(dynamic, 64)
    for (std::size_t i = 0; i < N; ++i) {
      int ci[3];
      std::size_t r = cell_of[i];
      for (int a = d - 1; a >= 0; --a) {
        ci[a] = static_cast<int>(r % ncell);
        r /= ncell;
      }
      for (int q = 0; q < nb; ++q) {
        int qq = q;
        std::size_t idx = 0;
        for (int a = 0; a < d; ++a) {
          int o = qq % 3 - 1;
          qq /= 3;
          int cj = (ci[a] + o + ncell) % ncell;
          idx = idx * ncell + static_cast<std::size_t>(cj);
        }
        for (std::size_t p = start[idx]; p < start[idx + 1]; ++p) {
          const std::size_t j = order[p];
          if (j == i) continue;
          double v[3], r2 = 0.0;
          for (int a = 0; a < d; ++a) {
            v[a] = c.x[i * d + a] - c.x[j * d + a];
            v[a] -= L * std::floor(v[a] / L + 0.5);
            r2 += v[a] * v[a];
          }
          accumulate(i, v, r2);
        }
      }
    }
    return;
  }
  const int m = images_;
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      if (j == i) continue;
      double base[3];
      for (int a = 0; a < d; ++a) {
        base[a] = c.x[i * d + a] - c.x[j * d + a];
        base[a] -= L * std::floor(base[a] / L + 0.5);
      }
      int n[3] = {-m, -m, -m};
      for (;;) {
        double v[3], r2 = 0.0;
        for (int a = 0; a < d; ++a) {
          v[a] = base[a] + n[a] * L;
          r2 += v[a] * v[a];
        }
        accumulate(i, v, r2);
        int a = 0;
        while (a < d && ++n[a] > m) n[a++] = -m;
        if (a == d) break;
      }
    }
  }
}

void PeriodizedKernel::far_sums(const Configuration& c, double* energy, std::vector<double>* grad) const {
  const int d = geo_.d;
  const double L = geo_.L;
  const std::size_t N = c.size();
  const int W = K_ + 1;
  std::vector<cplx> ph(N * d * W);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < N; ++i)
    for (int a = 0; a < d; ++a) phase_row(kTwoPi * c.x[i * d + a] / L, K_, ph.data() + (i * d + a) * W);
  auto e = [&](std::size_t i, int a, int k) {
    const cplx* row = ph.data() + (i * d + a) * W;
    return k >= 0 ? row[k] : std::conj(row[-k]);
  };
  const std::size_t nm = modes_.size();
  std::vector<cplx> S(nm);  // sum_j e(-k.x_j/L)
#pragma omp parallel for schedule(static)
  for (std::size_t m = 0; m < nm; ++m) {
    const auto& hm = modes_[m];
    cplx acc = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      cplx v = e(j, 0, hm.k[0]);
      for (int a = 1; a < d; ++a) v *= e(j, a, hm.k[a]);
      acc += std::conj(v);
    }
    S[m] = acc;
  }
  if (energy) {
    double s = 0.0;
    for (std::size_t m = 0; m < nm; ++m) s += 2.0 * modes_[m].coef * (std::norm(S[m]) - static_cast<double>(N));
    *energy = s;
  }
  if (grad) {
    grad->assign(N * d, 0.0);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < N; ++i) {
      double gi[3] = {0, 0, 0};
      for (std::size_t m = 0; m < nm; ++m) {
        const auto& hm = modes_[m];
        cplx v = e(i, 0, hm.k[0]);
        for (int a = 1; a < d; ++a) v *= e(i, a, hm.k[a]);
        const double im = (v * S[m]).imag();
        for (int a = 0; a < d; ++a) gi[a] -= 2.0 * hm.coef * (kTwoPi * hm.k[a] / L) * im;
      }
      for (int a = 0; a < d; ++a) (*grad)[i * d + a] = gi[a];
    }
  }
}

double PeriodizedKernel::pair_energy(const Configuration& c) const {
  const std::size_t N = c.size();
  if (N < 2) return 0.0;
  std::vector<double> near;
  near_sums(c, &near, nullptr);
  double s = 0.0;
  for (double v : near) s += v;
  double far = 0.0;
  far_sums(c, &far, nullptr);
  const double n = static_cast<double>(N);
  return (s - n * (n - 1.0) * M_ + far) / (2.0 * n * n);
}

double PeriodizedKernel::pair_energy_direct(const Configuration& c) const {
  const std::size_t N = c.size();
  const int d = geo_.d;
  double s = 0.0;
  std::vector<double> v(d);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      if (i == j) continue;
      for (int a = 0; a < d; ++a) v[a] = c.x[i * d + a] - c.x[j * d + a];
      s += eval(v);
    }
  const double n = static_cast<double>(N);
  return s / (2.0 * n * n);
}

std::vector<double> PeriodizedKernel::pair_gradients(const Configuration& c) const {
  std::vector<double> near, far;
  near_sums(c, nullptr, &near);
  far_sums(c, nullptr, &far);
  for (std::size_t i = 0; i < near.size(); ++i) near[i] += far[i];
  return near;
}

}  // namespace modlab
