#include "modlab/energy.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/hypergeometric_1F1.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace modlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_torus(const Configuration& c, const TorusGeometry& g) {
  if (!c.torus) throw std::invalid_argument("config: torus geometry required");
  if (c.d != g.d || c.torus->L != g.L) throw std::invalid_argument("config: geometry differs from the kernel's");
  if (c.size() < 1) throw std::invalid_argument("config: N >= 1 required");
}

double norm_k(std::span<const int> k) {
  double k2 = 0.0;
  for (int v : k) k2 += static_cast<double>(v) * v;
  return std::sqrt(k2);
}

// (1/N) sum_i e^{-2 pi i k.x_i / L} for each listed mode (|k|_inf <= K).
std::vector<cplx> empirical_modes(const Configuration& c, const std::vector<std::array<int, 3>>& ks, int K) {
  const int d = c.d, side = 2 * K + 1;
  const double L = c.torus->L;
  std::vector<cplx> out(ks.size());
  std::vector<cplx> ph;
  for (std::size_t i = 0; i < c.size(); ++i) {
    axis_phases(c.point(i), L, K, ph);
#pragma omp parallel for schedule(static)
    for (std::size_t m = 0; m < ks.size(); ++m) {
      cplx v = ph[ks[m][0] + K];
      for (int a = 1; a < d; ++a) v *= ph[a * side + ks[m][a] + K];
      out[m] += std::conj(v);
    }
  }
  const double inv = 1.0 / static_cast<double>(c.size());
  for (auto& v : out) v *= inv;
  return out;
}

// Ordered-pair sum (1/N^2) sum_{i != j} f(i, j) for symmetric f, reduced per row.
template <class F>
double pair_sum(std::size_t N, F&& f) {
  std::vector<double> row(N, 0.0);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t i = 0; i < N; ++i) {
    double s = 0.0;
    for (std::size_t j = i + 1; j < N; ++j) s += f(i, j);
    row[i] = s;
  }
  double t = 0.0;
  for (double v : row) t += v;
  return 2.0 * t / (static_cast<double>(N) * static_cast<double>(N));
}

}  // namespace

double microscale(std::size_t N, double linf, int d) {
  if (N < 1 || !(linf > 0.0)) throw std::invalid_argument("microscale: N >= 1 and ||mu||_inf > 0 required");
  return std::pow(static_cast<double>(N) * linf, -1.0 / d);
}

double riesz_radial(double r, double s) {
  if (r == 0.0) throw singular_evaluation("riesz: r = 0");
  return s == 0.0 ? -std::log(r) : std::pow(r, -s) / s;
}

EnergyBreakdown modulated_energy(const Configuration& c, const TorusDensity& mu, const PeriodizedKernel& g) {
  const auto& geo = g.geometry();
  require_torus(c, geo);
  if (mu.geometry().d != geo.d || mu.geometry().L != geo.L) throw std::invalid_argument("mu: geometry differs");
  c.check_distinct();
  const double V = geo.volume();
  EnergyBreakdown e;
  e.pair_term = g.pair_energy(c);
  const TrigPoly conv = mu.p.multiplier([&](std::span<const int> k) { return norm_k(k) == 0.0 ? 0.0 : V * g.fourier(k); });
  const auto vals = conv.eval_points(c);
  double cross = 0.0;
  for (double v : vals) cross += v;
  e.cross_term = cross / static_cast<double>(c.size());
  double self = 0.0;
  for (std::size_t i = 0; i < conv.coeffs().size(); ++i) self += (conv.coeffs()[i] * std::conj(mu.p.coeffs()[i])).real();
  e.self_term = 0.5 * V * self;
  e.F_N = e.pair_term - e.cross_term + e.self_term;
  e.lambda = microscale(c.size(), mu.linf, geo.d);
  return e;
}

SplittingTerms splitting_identity_check(const Configuration& c, const TorusDensity& mu, const PeriodizedKernel& g,
                                        double eta, double tol) {
  const auto& geo = g.geometry();
  require_torus(c, geo);
  EwaldOptions o = g.options();
  o.eta = eta;
  o.tol = tol;
  o.K = 0;
  const PeriodizedKernel kp(g.spec(), geo, o);
  const Truncation& tr = kp.truncation();
  const int d = geo.d;
  const double L = geo.L, V = geo.volume();
  const std::size_t N = c.size();
  const double Nd = static_cast<double>(N);

  SplittingTerms t;
  t.eta = eta;
  t.lhs = modulated_energy(c, mu, g).F_N;

  t.near_pairs = 0.5 * pair_sum(N, [&](std::size_t i, std::size_t j) {
                   double v[3];
                   for (int a = 0; a < d; ++a) v[a] = c.x[i * d + a] - c.x[j * d + a];
                   std::span<double> vs(v, d);
                   geo.min_image(vs);
                   return kp.near_field(vs);
                 });

  auto fhat = [&](std::span<const int> k) {
    const double r = norm_k(k);
    return r == 0.0 ? tr.f_eta_mass(eta) : tr.fourier_f_eta(r / L, eta);
  };
  const TrigPoly fconv = mu.p.multiplier(fhat);
  double fs = 0.0;
  for (std::size_t i = 0; i < fconv.coeffs().size(); ++i) fs += (fconv.coeffs()[i] * std::conj(mu.p.coeffs()[i])).real();
  t.f_self = 0.5 * V * fs;
  double fc = 0.0;
  for (double v : fconv.eval_points(c)) fc += v;
  t.f_cross = -fc / Nd;

  const auto& hm = kp.half_modes();
  std::vector<std::array<int, 3>> ks(hm.size());
  for (std::size_t m = 0; m < hm.size(); ++m) ks[m] = hm[m].k;
  const auto cn = empirical_modes(c, ks, kp.K());
  double q = 0.0;
  for (std::size_t m = 0; m < hm.size(); ++m) {
    const cplx diff = cn[m] - V * mu.p.at(std::span<const int>(hm[m].k.data(), d));
    q += hm[m].coef * std::norm(diff);
  }
  // each half mode stands for +-k
  t.g_quadratic = 0.5 * V * 2.0 * q;
  const std::vector<double> zero(d, 0.0);
  t.g_diag = -(kp.far_field(zero) - kp.mean_f()) / (2.0 * Nd);

  t.rhs = t.near_pairs + t.f_self + t.g_quadratic + t.g_diag + t.f_cross;
  t.residual = std::abs(t.lhs - t.rhs);
  return t;
}

std::vector<double> nearest_neighbor_scales(const Configuration& c, double lambda) {
  const std::size_t N = c.size();
  if (N < 2) throw std::invalid_argument("nearest_neighbor_scales: N >= 2 required");
  std::vector<double> r(N);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < N; ++i) {
    double m = lambda;
    for (std::size_t j = 0; j < N; ++j)
      if (j != i) m = std::min(m, c.distance(i, j));
    r[i] = 0.25 * m;
  }
  return r;
}

double SmallScaleBound::needed_C() const {
  double C = 0.0;
  if (lhs_neighbors > rhs_base) C = (lhs_neighbors - rhs_base) / rhs_slope;
  if (lhs_pairs > 0.0) {
    const double Cp = (-rhs_base + std::sqrt(rhs_base * rhs_base + 4.0 * rhs_slope * lhs_pairs)) / (2.0 * rhs_slope);
    C = std::max(C, Cp);
  }
  return C;
}

double SmallScaleBound::ratio_pairs(double C) const { return lhs_pairs / (C * rhs(C)); }
double SmallScaleBound::ratio_neighbors(double C) const { return lhs_neighbors / rhs(C); }

SmallScaleBound small_scale_bound_check(const Configuration& c, const TorusDensity& mu, const PeriodizedKernel& g,
                                        double eta) {
  const double s = g.spec().s;
  const int d = c.d;
  const std::size_t N = c.size();
  const double Nd = static_cast<double>(N);
  SmallScaleBound b;
  const auto e = modulated_energy(c, mu, g);
  b.F_N = e.F_N;
  b.lambda = e.lambda;
  b.eta = eta;
  if (!(eta > 0.0 && eta <= e.lambda * (1.0 + 1e-12))) throw std::invalid_argument("eta: must satisfy 0 < eta <= lambda");

  b.lhs_pairs = 0.5 * pair_sum(N, [&](std::size_t i, std::size_t j) {
                  const double r = c.distance(i, j);
                  if (r > eta) return 0.0;
                  return s == 0.0 ? -std::log(r / eta) : std::pow(r, -s);
                });
  const auto ri = nearest_neighbor_scales(c, e.lambda);
  double nb = 0.0;
  for (double r : ri) nb += s == 0.0 ? riesz_radial(4.0 * r / eta, 0.0) : riesz_radial(4.0 * r, s);
  b.lhs_neighbors = nb / (2.0 * Nd * Nd);

  const double geta = riesz_radial(eta, s);
  b.rhs_base = e.F_N + (s == 0.0 ? geta / (2.0 * Nd) : 0.0);
  b.rhs_slope = (s == 0.0 ? 1.0 / (2.0 * Nd) : geta / (2.0 * Nd)) + mu.linf * std::pow(eta, d - s);
  return b;
}

double periodic_bessel(std::span<const double> x, double r, const TorusGeometry& g) {
  const int d = g.d;
  const double L = g.L;
  // G_r(R) < 1e-17 G_r(0) scale beyond R = 45
  const double R = 45.0;
  std::vector<double> y(x.begin(), x.end());
  g.min_image(y);
  const int m = static_cast<int>(std::ceil(R / L)) + 1;
  int n[3] = {-m, -m, -m};
  double total = 0.0;
  for (;;) {
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) {
      const double v = y[a] + n[a] * L;
      r2 += v * v;
    }
    if (r2 <= R * R) total += bessel_potential(std::sqrt(r2), r, d);
    int a = 0;
    while (a < d && ++n[a] > m) n[a++] = -m;
    if (a == d) break;
  }
  return total;
}

CoercivityResult coercivity_norm(const Configuration& c, const TorusDensity& mu, double r, int K) {
  const auto& geo = mu.geometry();
  require_torus(c, geo);
  const int d = geo.d;
  if (!(r > d)) throw std::invalid_argument("r: must exceed d (the norm diverges otherwise)");
  const std::size_t N = c.size();
  if (K <= 0) K = static_cast<int>(std::ceil(4.0 * std::pow(static_cast<double>(N), 1.0 / d)));
  K = std::max(K, mu.p.K());
  const double L = geo.L, V = geo.volume();

  ModeBox box{d, K};
  std::vector<std::array<int, 3>> ks(box.size());
  std::vector<int> k(d);
  for (std::size_t m = 0; m < box.size(); ++m) {
    box.mode(m, k);
    ks[m] = {0, 0, 0};
    for (int a = 0; a < d; ++a) ks[m][a] = k[a];
  }
  const auto cn = empirical_modes(c, ks, K);
  double sum = 0.0, wsum = 0.0;
  for (std::size_t m = 0; m < ks.size(); ++m) {
    const std::span<const int> km(ks[m].data(), d);
    const double xi = kTwoPi * norm_k(km) / L;
    const double w = std::pow(1.0 + xi * xi, -0.5 * r) / V;
    sum += w * std::norm(cn[m] - V * mu.p.at(km));
    wsum += w;
  }
  const std::vector<double> zero(d, 0.0);
  const double tail = std::max(0.0, periodic_bessel(zero, r, geo) - wsum);
  CoercivityResult out;
  out.K = K;
  out.diag_tail = tail / static_cast<double>(N);
  out.offdiag_tail_bound = tail * (1.0 - 1.0 / static_cast<double>(N));
  out.value = sum + out.diag_tail;
  return out;
}

double CoercivityBound::needed_C() const {
  if (norm <= 0.0) return 0.0;
  return (-base + std::sqrt(base * base + 4.0 * slope * norm)) / (2.0 * slope);
}

CoercivityBound coercivity_bound(const Configuration& c, const TorusDensity& mu, const PeriodizedKernel& g, double r) {
  const double s = g.spec().s;
  const int d = c.d;
  const double Nd = static_cast<double>(c.size());
  const auto e = modulated_energy(c, mu, g);
  const double glam = riesz_radial(e.lambda, s);
  CoercivityBound b;
  b.norm = coercivity_norm(c, mu, r).value;
  b.base = e.F_N + (s == 0.0 ? glam / (2.0 * Nd) : 0.0);
  b.slope = (s == 0.0 ? 1.0 / (2.0 * Nd) : glam / (2.0 * Nd)) + mu.linf * std::pow(e.lambda, d - s);
  return b;
}

double LowerBoundSample::needed_C() const { return std::max(0.0, -(F_N + log_term)) / scale; }

LowerBoundSample lower_bound_sample(const Configuration& c, const TorusDensity& mu, const PeriodizedKernel& g,
                                    bool with_log_term) {
  const double s = g.spec().s;
  const auto e = modulated_energy(c, mu, g);
  LowerBoundSample out;
  out.F_N = e.F_N;
  out.lambda = e.lambda;
  out.log_term = (s == 0.0 && with_log_term) ? -std::log(e.lambda) / (2.0 * static_cast<double>(c.size())) : 0.0;
  out.scale = mu.linf * std::pow(e.lambda, c.d - s);
  return out;
}

double lower_bound_diagnostic(const std::vector<Configuration>& batch, const TorusDensity& mu,
                              const PeriodizedKernel& g, bool with_log_term) {
  double C = 0.0;
  for (const auto& c : batch) C = std::max(C, lower_bound_sample(c, mu, g, with_log_term).needed_C());
  return C;
}

// ---------------------------------------------------------------------------
// Gaussian density in whole space

GaussianDensity::GaussianDensity(int d, double sigma, double s) : d_(d), sigma_(sigma), s_(s) {
  if (d < 1) throw std::invalid_argument("d: dimension must be >= 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma: must be > 0");
  if (!(s >= 0.0 && s < d)) throw std::invalid_argument("s: exponent must satisfy 0 <= s < d");
  B_ = std::tgamma(0.5 * (d - s)) / std::tgamma(0.5 * d) * std::pow(2.0 * sigma * sigma, -0.5 * s);
}

double GaussianDensity::density(std::span<const double> x) const {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return std::exp(-0.5 * r2 / (sigma_ * sigma_)) / std::pow(kTwoPi * sigma_ * sigma_, 0.5 * d_);
}

double GaussianDensity::H(double q) const {
  namespace bm = boost::math;
  if (s_ > 0.0) return B_ / s_ * bm::hypergeometric_1F1(0.5 * s_, 0.5 * d_, -q);
  // E log of a noncentral chi-square: Poisson mixture of digammas
  double acc = 0.0;
  const int jmax = static_cast<int>(q + 40.0 * std::sqrt(q + 1.0) + 60.0);
  for (int j = 0; j <= jmax; ++j) {
    const double lw = (j == 0 ? 0.0 : j * std::log(q)) - q - std::lgamma(j + 1.0);
    if (q == 0.0 && j > 0) break;
    acc += std::exp(lw) * bm::digamma(0.5 * d_ + j);
  }
  return -0.5 * (std::log(2.0 * sigma_ * sigma_) + acc);
}

double GaussianDensity::dH(double q) const {
  const double B = s_ > 0.0 ? B_ : 1.0;
  return -B / d_ * boost::math::hypergeometric_1F1(0.5 * s_ + 1.0, 0.5 * d_ + 1.0, -q);
}

double GaussianDensity::d2H(double q) const {
  const double B = s_ > 0.0 ? B_ : 1.0;
  return B / d_ * (0.5 * s_ + 1.0) / (0.5 * d_ + 1.0) *
         boost::math::hypergeometric_1F1(0.5 * s_ + 2.0, 0.5 * d_ + 2.0, -q);
}

double GaussianDensity::potential(std::span<const double> x) const {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return H(0.5 * r2 / (sigma_ * sigma_));
}

void GaussianDensity::potential_gradient(std::span<const double> x, std::span<double> out) const {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  const double s2 = sigma_ * sigma_;
  const double h1 = dH(0.5 * r2 / s2);
  for (int a = 0; a < d_; ++a) out[a] = h1 * x[a] / s2;
}

void GaussianDensity::potential_hessian(std::span<const double> x, std::span<double> out) const {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  const double s2 = sigma_ * sigma_;
  const double q = 0.5 * r2 / s2;
  const double h1 = dH(q), h2 = d2H(q);
  for (int a = 0; a < d_; ++a)
    for (int b = 0; b < d_; ++b) out[a * d_ + b] = h2 * x[a] * x[b] / (s2 * s2) + (a == b ? h1 / s2 : 0.0);
}

double GaussianDensity::self_energy() const {
  const double v = 4.0 * sigma_ * sigma_;
  if (s_ == 0.0) return -0.5 * (std::log(v) + boost::math::digamma(0.5 * d_));
  return std::tgamma(0.5 * (d_ - s_)) / std::tgamma(0.5 * d_) * std::pow(v, -0.5 * s_) / s_;
}

double GaussianDensity::self_profile_slope() const {
  if (s_ == 0.0) return -1.0 / d_;
  return -std::tgamma(0.5 * (d_ - s_)) / std::tgamma(0.5 * d_) * std::pow(4.0 * sigma_ * sigma_, -0.5 * s_) / d_;
}

EnergyBreakdown whole_space_energy(const Configuration& c, const GaussianDensity& mu) {
  if (c.torus) throw std::invalid_argument("config: whole-space configuration required");
  if (c.d != mu.d()) throw std::invalid_argument("config: dimension differs from mu");
  c.check_distinct();
  const int d = c.d;
  const double s = mu.s();
  const std::size_t N = c.size();
  EnergyBreakdown e;
  e.pair_term = 0.5 * pair_sum(N, [&](std::size_t i, std::size_t j) {
                  double r2 = 0.0;
                  for (int a = 0; a < d; ++a) {
                    const double v = c.x[i * d + a] - c.x[j * d + a];
                    r2 += v * v;
                  }
                  return riesz_radial(std::sqrt(r2), s);
                });
  double cross = 0.0;
  for (std::size_t i = 0; i < N; ++i) cross += mu.potential(c.point(i));
  e.cross_term = cross / static_cast<double>(N);
  e.self_term = 0.5 * mu.self_energy();
  e.F_N = e.pair_term - e.cross_term + e.self_term;
  double peak = 1.0 / std::pow(kTwoPi * mu.sigma() * mu.sigma(), 0.5 * d);
  e.lambda = microscale(N, peak, d);
  return e;
}

}  // namespace modlab
