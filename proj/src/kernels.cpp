#include "modlab/kernels.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace modlab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Ein(x) = int_0^x (1 - e^{-t})/t dt.
double ein(double x) {
  if (x < 2.0) {
    double term = x, sum = x;
    for (int n = 2; n < 200; ++n) {
      term *= -x / n;
      const double add = term / n;
      sum += add;
      if (std::abs(add) < 1e-17 * std::abs(sum)) break;
    }
    return sum;
  }
  return boost::math::expint(1, x) + std::numbers::egamma + std::log(x);
}

// log-linear interpolation on (log t_i, v_i).
double interp_log(const std::vector<double>& t, const std::vector<double>& v, double x) {
  if (x <= t.front()) return v.front();
  if (x >= t.back()) return v.back();
  const auto it = std::upper_bound(t.begin(), t.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - t.begin());
  const double u = (std::log(x) - std::log(t[j - 1])) / (std::log(t[j]) - std::log(t[j - 1]));
  return v[j - 1] + u * (v[j] - v[j - 1]);
}

}  // namespace

std::string to_string(Profile p) { return p == Profile::bessel ? "bessel" : "gaussian"; }

Profile profile_from_string(const std::string& name) {
  if (name == "bessel") return Profile::bessel;
  if (name == "gaussian") return Profile::gaussian;
  throw std::invalid_argument("phi_choice: expected \"bessel\" or \"gaussian\", got \"" + name + "\"");
}

// ---------------------------------------------------------------------------
// PotentialSpec

void PotentialSpec::validate() const {
  if (d < 1) throw std::invalid_argument("d: dimension must be >= 1");
  if (!(s >= 0.0 && s < d)) throw std::invalid_argument("s: exponent must satisfy 0 <= s < d");
  if (!(a > d && a < d + 2)) throw std::invalid_argument("a: Bessel order must satisfy d < a < d + 2");
  switch (zeta.kind) {
    case Weight::Kind::exact:
      break;
    case Weight::Kind::scaled:
      if (!(zeta.scale > 0.0)) throw std::invalid_argument("zeta.scale: must be > 0");
      if (s == 0.0 && zeta.scale != 1.0)
        throw std::invalid_argument("zeta.scale: s = 0 requires zeta - t^d integrable against t^{-d-1}");
      break;
    case Weight::Kind::tabulated: {
      const auto& t = zeta.knots;
      const auto& v = zeta.values;
      if (t.size() < 2 || t.size() != v.size())
        throw std::invalid_argument("zeta.knots: need >= 2 knots matching zeta.values");
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(t[i] > 0.0) || (i > 0 && !(t[i] > t[i - 1])))
          throw std::invalid_argument("zeta.knots: must be positive and increasing");
      }
      if (!(zeta.C_zeta >= 1.0)) throw std::invalid_argument("zeta.C_zeta: must be >= 1");
      for (double w : v) {
        if (s > 0.0 && !(w >= 1.0 / zeta.C_zeta && w <= zeta.C_zeta))
          throw std::invalid_argument("zeta.values: ratio zeta/t^{d-s} outside [1/C_zeta, C_zeta]");
        if (s == 0.0 && !(w >= 0.0)) throw std::invalid_argument("zeta.values: rho must be >= 0");
      }
      if (s == 0.0) {
        // rho(t) <= (C_zeta - 1) t^d keeps zeta within the declared band.
        for (std::size_t i = 0; i < t.size(); ++i)
          if (v[i] > (zeta.C_zeta - 1.0) * std::pow(t[i], d) * (1 + 1e-12))
            throw std::invalid_argument("zeta.values: rho exceeds (C_zeta - 1) t^d");
      }
      break;
    }
  }
}

double PotentialSpec::C_zeta() const {
  switch (zeta.kind) {
    case Weight::Kind::exact:
      return 1.0;
    case Weight::Kind::scaled:
      return std::max(zeta.scale, 1.0 / zeta.scale);
    case Weight::Kind::tabulated:
      return zeta.C_zeta;
  }
  return 1.0;
}

// ---------------------------------------------------------------------------
// Bessel potential

double bessel_potential(double r, double a, int d) {
  if (!(a > d)) throw std::domain_error("bessel_potential: order a must exceed d");
  if (r < 0.0) throw std::domain_error("bessel_potential: negative radius");
  const double nu = 0.5 * (a - d);
  const double norm = 1.0 / (std::pow(2.0 * std::sqrt(kPi), d) * std::tgamma(0.5 * a));
  if (r == 0.0) return norm * std::tgamma(nu);
  if (r > 700.0) return 0.0;
  return norm * std::pow(2.0, 1.0 - nu) * std::pow(r, nu) * std::cyl_bessel_k(nu, r);
}

double bessel_potential_derivative(double r, double a, int d) {
  const double nu = 0.5 * (a - d);
  const double norm = 1.0 / (std::pow(2.0 * std::sqrt(kPi), d) * std::tgamma(0.5 * a));
  if (r <= 0.0) throw std::domain_error("bessel_potential_derivative: r must be > 0");
  if (r > 700.0) return 0.0;
  return -norm * std::pow(2.0, 1.0 - nu) * std::pow(r, nu) * std::cyl_bessel_k(1.0 - nu, r);
}

double bessel_potential_quadrature(double r, double a, int d) {
  if (!(a > d)) throw std::domain_error("bessel_potential: order a must exceed d");
  const double nu = 0.5 * (a - d);
  const double norm = 1.0 / (std::pow(2.0 * std::sqrt(kPi), d) * std::tgamma(0.5 * a));
  const double q = 0.25 * r * r;
  // int_0^inf exp(-t - q/t) t^nu dt/t, in u = log t.
  auto f = [&](double u) {
    const double t = std::exp(u);
    return std::exp(-t - q / t + nu * u);
  };
  const double t_peak = 0.5 * (nu + std::sqrt(nu * nu + r * r));
  const double u_peak = std::log(t_peak);
  const double u_hi = std::log(750.0 + t_peak);
  const double u_lo = r > 0.0 ? std::min(u_peak, std::log(q / 750.0)) : -45.0 / nu;
  const double breaks[] = {u_lo, u_peak, u_hi};
  return norm * integrate_pieces(f, breaks, 1e-300, 1e-13);
}

// ---------------------------------------------------------------------------
// RadialProfile

RadialProfile::RadialProfile(Profile kind, int d, double a) : kind_(kind), d_(d), a_(a) {
  nu_ = 0.5 * (a - d);
  if (kind_ == Profile::bessel) {
    norm_ = 1.0 / (std::pow(2.0 * std::sqrt(kPi), d) * std::tgamma(0.5 * a));
    phi0_ = norm_ * std::tgamma(nu_);
  } else {
    norm_ = 1.0;
    phi0_ = 1.0;
  }
}

double RadialProfile::value(double r) const {
  if (kind_ == Profile::gaussian) return std::exp(-kPi * r * r);
  if (r < 0.5) return phi0_ - drop(r);
  return bessel_potential(r, a_, d_);
}

double RadialProfile::deriv(double r) const {
  if (kind_ == Profile::gaussian) return -2.0 * kPi * r * std::exp(-kPi * r * r);
  return bessel_potential_derivative(r, a_, d_);
}

double RadialProfile::drop(double r) const {
  if (kind_ == Profile::gaussian) return -std::expm1(-kPi * r * r);
  if (r >= 0.5) return phi0_ - bessel_potential(r, a_, d_);
  // Power series of r^nu K_nu(r) about 0.
  const double q = 0.25 * r * r;
  double reg = 0.0, term = 1.0;
  for (int k = 1; k < 60; ++k) {
    term *= q / k;
    const double add = term / std::tgamma(k - nu_ + 1.0);
    reg += add;
    if (add < 1e-18 * reg) break;
  }
  double sing = 0.0;
  term = 1.0;
  for (int k = 0; k < 60; ++k) {
    if (k > 0) term *= q / k;
    const double add = term / std::tgamma(k + nu_ + 1.0);
    sing += add;
    if (add < 1e-18 * sing) break;
  }
  const double pre = norm_ * std::pow(2.0, 1.0 - nu_) * kPi / (2.0 * std::sin(nu_ * kPi));
  return pre * (-std::pow(2.0, nu_) * reg + std::pow(r, 2.0 * nu_) * std::pow(2.0, -nu_) * sing);
}

double RadialProfile::hat(double rho) const {
  if (kind_ == Profile::gaussian) return std::exp(-kPi * rho * rho);
  return std::pow(1.0 + 4.0 * kPi * kPi * rho * rho, -0.5 * a_);
}

double RadialProfile::support_radius() const { return kind_ == Profile::gaussian ? 6.5 : 60.0; }

double RadialProfile::cusp_exponent() const { return kind_ == Profile::gaussian ? 2.0 : 2.0 * nu_; }

double RadialProfile::mellin(double z) const {
  if (kind_ == Profile::gaussian) return 0.5 * std::pow(kPi, -0.5 * z) * std::tgamma(0.5 * z);
  return norm_ * std::tgamma(0.5 * z) * std::pow(2.0, z - 1.0) * std::tgamma(nu_ + 0.5 * z);
}

double RadialProfile::lower_mellin_reg(double z, double R) const {
  if (R <= 0.0) return 0.0;
  if (kind_ == Profile::gaussian) {
    const double x = kPi * R * R;
    if (z == 0.0) return -0.5 * ein(x);
    if (x < 2.0) {
      double sum = 0.0, term = 1.0;
      for (int n = 1; n < 200; ++n) {
        term *= -x / n;
        const double add = term / (0.5 * z + n);
        sum += add;
        if (std::abs(add) < 1e-18 * std::abs(sum)) break;
      }
      return 0.5 * std::pow(R, z) * sum;
    }
    return 0.5 * std::pow(kPi, -0.5 * z) * boost::math::tgamma_lower(0.5 * z, x) - std::pow(R, z) / z;
  }
  const double p = z + cusp_exponent();
  auto f = [&](double u) { return -std::exp(z * u) * drop(std::exp(u)); };
  const double hi = std::log(R);
  const double lo = hi - 50.0 / p;
  if (hi <= 0.0) return integrate(f, lo, hi, 1e-300, 1e-13);
  const double breaks[] = {lo, 0.0, hi};
  return integrate_pieces(f, breaks, 1e-300, 1e-13);
}

double RadialProfile::lower_mellin(double z, double R) const {
  if (R <= 0.0) return 0.0;
  if (kind_ == Profile::gaussian && kPi * R * R >= 2.0)
    return 0.5 * std::pow(kPi, -0.5 * z) * boost::math::tgamma_lower(0.5 * z, kPi * R * R);
  return phi0_ * std::pow(R, z) / z + lower_mellin_reg(z, R);
}

double RadialProfile::upper_mellin(double z, double R) const {
  if (kind_ == Profile::gaussian) {
    const double x = kPi * R * R;
    if (x > 745.0) return 0.0;
    if (z == 0.0) {
      if (R == 0.0) return kInf;
      return 0.5 * boost::math::expint(1, x);
    }
    return 0.5 * std::pow(kPi, -0.5 * z) * boost::math::tgamma(0.5 * z, x);
  }
  if (R < 1.0) {
    if (z == 0.0) {
      if (R == 0.0) return kInf;
      return -phi0_ * std::log(R) - log_moment() - lower_mellin_reg(0.0, R);
    }
    return mellin(z) - phi0_ * std::pow(R, z) / z - lower_mellin_reg(z, R);
  }
  if (R > 700.0) return 0.0;
  auto f = [&](double r) { return std::pow(r, z - 1.0) * bessel_potential(r, a_, d_); };
  const double breaks[] = {R, R + 5.0, R + 60.0};
  return integrate_pieces(f, breaks, 1e-300, 1e-13);
}

double RadialProfile::hat_mellin(double z) const {
  if (kind_ == Profile::gaussian) return mellin(z);
  return std::pow(2.0 * kPi, -z) * 0.5 * boost::math::beta(0.5 * z, 0.5 * (a_ - z));
}

double RadialProfile::hat_upper_mellin(double z, double T) const {
  if (kind_ == Profile::gaussian) return upper_mellin(z, T);
  const double sig = 2.0 * kPi * T;
  const double p = 0.5 * z, q = 0.5 * (a_ - z);
  return std::pow(2.0 * kPi, -z) * 0.5 * boost::math::beta(p, q, 1.0) *
         boost::math::ibeta(q, p, 1.0 / (1.0 + sig * sig));
}

double RadialProfile::hat_lower_mellin(double z, double T) const {
  if (kind_ == Profile::gaussian) return lower_mellin(z, T);
  const double sig = 2.0 * kPi * T;
  const double p = 0.5 * z, q = 0.5 * (a_ - z);
  return std::pow(2.0 * kPi, -z) * 0.5 * boost::math::beta(p, q) *
         boost::math::ibeta(p, q, sig * sig / (1.0 + sig * sig));
}

double RadialProfile::log_moment() const {
  if (kind_ == Profile::gaussian) return 0.5 * (std::numbers::egamma + std::log(kPi));
  return -phi0_ * (std::log(2.0) + 0.5 * (boost::math::digamma(1.0) + boost::math::digamma(nu_)));
}

// ---------------------------------------------------------------------------
// Riesz potential

double riesz_potential(double r, const PotentialSpec& spec) {
  if (!(spec.s >= 0.0 && spec.s < spec.d)) throw std::invalid_argument("s: exponent must satisfy 0 <= s < d");
  if (r == 0.0) throw singular_evaluation("riesz_potential: x = 0");
  if (spec.s == 0.0) return -std::log(r);
  return std::pow(r, -spec.s) / spec.s;
}

double riesz_potential(std::span<const double> x, const PotentialSpec& spec) {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return riesz_potential(std::sqrt(r2), spec);
}

double riesz_fourier_constant(int d, double s) {
  return std::pow(kPi, s - 0.5 * d) * std::tgamma(0.5 * (d - s)) / (2.0 * std::tgamma(0.5 * s + 1.0));
}

namespace {
// The constants exist for every a > d, including the endpoint a = d + 2.
void check_constant_args(const PotentialSpec& spec) {
  if (spec.d < 1) throw std::invalid_argument("d: dimension must be >= 1");
  if (!(spec.s >= 0.0 && spec.s < spec.d)) throw std::invalid_argument("s: exponent must satisfy 0 <= s < d");
  if (!(spec.a > spec.d)) throw std::invalid_argument("a: Bessel order must exceed d");
}
}  // namespace

KernelConstants normalization_constant(const PotentialSpec& spec, Profile p) {
  check_constant_args(spec);
  const RadialProfile phi(p, spec.d, spec.a);
  KernelConstants k;
  k.c_norm = spec.s > 0.0 ? 1.0 / (spec.s * phi.mellin(spec.s)) : 1.0 / phi.at_zero();
  k.C_phi_T_slope = phi.at_zero();
  k.C_phi_T_offset = -phi.log_moment();
  return k;
}

KernelConstants normalization_constant_quadrature(const PotentialSpec& spec, Profile p) {
  check_constant_args(spec);
  const RadialProfile phi(p, spec.d, spec.a);
  const double rmax = std::log(phi.support_radius());
  KernelConstants k;
  if (spec.s > 0.0) {
    const double s = spec.s;
    auto f = [&](double u) { return std::exp(s * u) * phi.value(std::exp(u)); };
    const double breaks[] = {-50.0 / s, 0.0, rmax};
    k.c_norm = 1.0 / (s * integrate_pieces(f, breaks, 1e-300, 1e-13));
  } else {
    k.c_norm = 1.0 / phi.value(0.0);
  }
  k.C_phi_T_slope = phi.value(0.0);
  auto lm = [&](double u) {
    const double r = std::exp(u);
    return u * phi.deriv(r) * r;
  };
  const double breaks[] = {-60.0 / phi.cusp_exponent(), 0.0, rmax};
  k.C_phi_T_offset = -integrate_pieces(lm, breaks, 1e-300, 1e-13);
  return k;
}

// ---------------------------------------------------------------------------
// Truncation

Truncation::Truncation(PotentialSpec spec, Profile profile)
    : spec_(std::move(spec)), phi_(profile, spec_.d, spec_.a) {
  spec_.validate();
  k_ = normalization_constant(spec_, profile);
}

double Truncation::lead() const {
  if (spec_.s == 0.0) return 1.0;
  switch (spec_.zeta.kind) {
    case Weight::Kind::exact:
      return 1.0;
    case Weight::Kind::scaled:
      return spec_.zeta.scale;
    case Weight::Kind::tabulated:
      return spec_.zeta.values.back();
  }
  return 1.0;
}

double Truncation::weight_at(double t) const {
  const auto& z = spec_.zeta;
  if (z.kind == Weight::Kind::exact) return spec_.s > 0.0 ? 1.0 : 0.0;
  if (z.kind == Weight::Kind::scaled) return z.scale;
  if (spec_.s == 0.0 && (t < z.knots.front() || t > z.knots.back())) return 0.0;
  return interp_log(z.knots, z.values, t);
}

// c * int_{t1}^{t2} m(t) K(r/t) t^{-deriv} dt/t, with m = (w - w_hi) t^{-s} for
// s > 0 and m = rho t^{-d} for s = 0, K = phi or phi'.
double Truncation::table_space(double r, double t1, double t2, int deriv) const {
  if (spec_.zeta.kind != Weight::Kind::tabulated) return 0.0;
  const auto& kn = spec_.zeta.knots;
  const double s = spec_.s;
  const double w_hi = spec_.zeta.values.back();
  double lo = std::max(t1, s > 0.0 ? 0.0 : kn.front());
  const double hi = std::min(t2, kn.back());
  if (!(hi > lo)) return 0.0;
  if (lo == 0.0) lo = r / phi_.support_radius();
  if (!(hi > lo)) return 0.0;
  auto f = [&](double u) {
    const double t = std::exp(u);
    const double m = s > 0.0 ? (weight_at(t) - w_hi) * std::pow(t, -s) : weight_at(t) * std::pow(t, -spec_.d);
    const double kv = deriv == 0 ? phi_.value(r / t) : phi_.deriv(r / t) / t;
    return m * kv;
  };
  std::vector<double> br{std::log(lo)};
  for (double t : kn)
    if (t > lo && t < hi) br.push_back(std::log(t));
  br.push_back(std::log(hi));
  return k_.c_norm * integrate_pieces(f, br, 1e-300, 1e-12);
}

double Truncation::table_at_zero(double eta) const {
  if (spec_.zeta.kind != Weight::Kind::tabulated) return 0.0;
  return table_space(0.0, eta, kInf, 0);
}

double Truncation::table_fourier(double xi, double t1, double t2) const {
  if (spec_.zeta.kind != Weight::Kind::tabulated) return 0.0;
  const auto& kn = spec_.zeta.knots;
  const double s = spec_.s;
  const int d = spec_.d;
  const double w_hi = spec_.zeta.values.back();
  double lo = std::max(t1, s > 0.0 ? 0.0 : kn.front());
  const double hi = std::min(t2, kn.back());
  if (!(hi > lo)) return 0.0;
  if (lo == 0.0) lo = kn.front() * std::exp(-50.0 / (d - s));
  if (!(hi > lo)) return 0.0;
  auto f = [&](double u) {
    const double t = std::exp(u);
    const double m = s > 0.0 ? (weight_at(t) - w_hi) * std::pow(t, d - s) : weight_at(t);
    return m * phi_.hat(t * xi);
  };
  std::vector<double> br{std::log(lo)};
  for (double t : kn)
    if (t > lo && t < hi) br.push_back(std::log(t));
  br.push_back(std::log(hi));
  return k_.c_norm * integrate_pieces(f, br, 1e-300, 1e-12);
}

double Truncation::g(double r) const {
  if (r <= 0.0) throw singular_evaluation("g: x = 0");
  const double s = spec_.s;
  const double base = s > 0.0 ? std::pow(r, -s) / s : -std::log(r);
  return lead() * base + table_space(r, 0.0, kInf, 0);
}

double Truncation::g_dr(double r) const {
  if (r <= 0.0) throw singular_evaluation("g: x = 0");
  return -lead() * std::pow(r, -spec_.s - 1.0) + table_space(r, 0.0, kInf, 1);
}

double Truncation::exact_f(double r, double eta) const {
  const double s = spec_.s;
  const double R = r / eta;
  if (s > 0.0) return k_.c_norm * std::pow(r, -s) * phi_.upper_mellin(s, R);
  return k_.c_norm * phi_.upper_mellin(0.0, R);
}

double Truncation::f_eta(double r, double eta) const {
  if (r <= 0.0) throw singular_evaluation("f_eta: x = 0");
  if (eta <= 0.0) return 0.0;
  return lead() * exact_f(r, eta) + table_space(r, 0.0, eta, 0);
}

double Truncation::exact_g_eta(double r, double eta) const {
  const double s = spec_.s;
  const double R = r / eta;
  const double c = k_.c_norm;
  if (R < 1.0) {
    if (s > 0.0) return c * phi_.at_zero() * std::pow(eta, -s) / s + c * std::pow(r, -s) * phi_.lower_mellin_reg(s, R);
    return -std::log(eta) + c * phi_.log_moment() + c * phi_.lower_mellin_reg(0.0, R);
  }
  const double g0 = s > 0.0 ? std::pow(r, -s) / s : -std::log(r);
  return g0 - exact_f(r, eta);
}

double Truncation::g_eta(double r, double eta) const {
  if (eta <= 0.0) return g(r);
  if (r == 0.0) return g_eta_zero(eta);
  return lead() * exact_g_eta(r, eta) + table_space(r, eta, kInf, 0);
}

double Truncation::g_eta_zero(double eta) const {
  if (eta <= 0.0) throw singular_evaluation("g_eta: x = 0 with eta = 0");
  const double s = spec_.s;
  const double c = k_.c_norm;
  if (s > 0.0) return lead() * c * phi_.at_zero() * std::pow(eta, -s) / s + table_at_zero(eta);
  return -std::log(eta) + c * phi_.log_moment() + table_at_zero(eta);
}

double Truncation::f_eta_dr(double r, double eta) const {
  if (r <= 0.0) throw singular_evaluation("f_eta: x = 0");
  if (eta <= 0.0) return 0.0;
  const double s = spec_.s;
  const double exact = -(s * exact_f(r, eta) + k_.c_norm * phi_.value(r / eta) * std::pow(eta, -s)) / r;
  return lead() * exact + table_space(r, 0.0, eta, 1);
}

double Truncation::exact_g_eta_dr(double r, double eta) const {
  const double s = spec_.s;
  const double R = r / eta;
  if (phi_.kind() == Profile::gaussian)
    return -std::pow(r, -s - 1.0) * boost::math::gamma_p(0.5 * s + 1.0, kPi * R * R);
  if (R < 1.0) {
    const double inner = -std::pow(R, s) * phi_.drop(R) - (s > 0.0 ? s * phi_.lower_mellin_reg(s, R) : 0.0);
    return k_.c_norm * std::pow(r, -s - 1.0) * inner;
  }
  const double exact_f_dr = -(s * exact_f(r, eta) + k_.c_norm * phi_.value(R) * std::pow(eta, -s)) / r;
  return -std::pow(r, -s - 1.0) - exact_f_dr;
}

double Truncation::g_eta_dr(double r, double eta) const {
  if (eta <= 0.0) return g_dr(r);
  if (r == 0.0) return 0.0;
  return lead() * exact_g_eta_dr(r, eta) + table_space(r, eta, kInf, 1);
}

double Truncation::f_eta_mass(double eta) const {
  if (eta <= 0.0) return 0.0;
  const double s = spec_.s;
  const int d = spec_.d;
  double v = lead() * k_.c_norm * std::pow(eta, d - s) / (d - s);
  if (spec_.zeta.kind == Weight::Kind::tabulated) {
    const auto& kn = spec_.zeta.knots;
    const double w_hi = spec_.zeta.values.back();
    auto f = [&](double u) {
      const double t = std::exp(u);
      return s > 0.0 ? (weight_at(t) - w_hi) * std::pow(t, d - s) : weight_at(t);
    };
    double lo = s > 0.0 ? kn.front() * std::exp(-50.0 / (d - s)) : kn.front();
    const double hi = std::min(eta, kn.back());
    if (hi > lo) {
      std::vector<double> br{std::log(lo)};
      for (double t : kn)
        if (t > lo && t < hi) br.push_back(std::log(t));
      br.push_back(std::log(hi));
      v += k_.c_norm * integrate_pieces(f, br, 1e-300, 1e-12);
    }
  }
  return v;
}

double Truncation::fourier_g(double xi) const {
  if (xi <= 0.0) throw singular_evaluation("fourier_g: xi = 0");
  const double s = spec_.s;
  const int d = spec_.d;
  return lead() * riesz_fourier_constant(d, s) * std::pow(xi, s - d) + table_fourier(xi, 0.0, kInf);
}

double Truncation::fourier_g_eta(double xi, double eta) const {
  if (eta <= 0.0) return fourier_g(xi);
  if (xi <= 0.0) throw singular_evaluation("fourier_g_eta: xi = 0 (divergent zero mode)");
  const double s = spec_.s;
  const int d = spec_.d;
  return lead() * k_.c_norm * std::pow(xi, s - d) * phi_.hat_upper_mellin(d - s, eta * xi) +
         table_fourier(xi, eta, kInf);
}

double Truncation::fourier_f_eta(double xi, double eta) const {
  if (eta <= 0.0) return 0.0;
  if (xi == 0.0) return f_eta_mass(eta);
  const double s = spec_.s;
  const int d = spec_.d;
  return lead() * k_.c_norm * std::pow(xi, s - d) * phi_.hat_lower_mellin(d - s, eta * xi) +
         table_fourier(xi, 0.0, eta);
}

double Truncation::reconstruct(double r) const {
  if (r <= 0.0) throw singular_evaluation("reconstruct: x = 0");
  const double s = spec_.s;
  const double c = k_.c_norm;
  const double T = 1e10 * r;
  const double t_lo = r / phi_.support_radius();
  auto f = [&](double u) {
    const double t = std::exp(u);
    return std::pow(t, -s) * phi_.value(r / t);
  };
  std::vector<double> br{std::log(t_lo), std::log(r)};
  for (double t = 10.0 * r; t < T; t *= 100.0) br.push_back(std::log(t));
  br.push_back(std::log(T));
  const double body = integrate_pieces(f, br, 1e-300, 1e-13);
  double main;
  if (s > 0.0) {
    main = c * (body + phi_.at_zero() * std::pow(T, -s) / s);
  } else {
    const double C_T = k_.C_phi_T_slope * std::log(T) + k_.C_phi_T_offset;
    main = c * (body - C_T);
  }
  return lead() * main + table_space(r, 0.0, kInf, 0);
}

double Truncation::f_eta_quadrature(double r, double eta) const {
  if (r <= 0.0) throw singular_evaluation("f_eta: x = 0");
  if (eta <= 0.0) return 0.0;
  const double s = spec_.s;
  const int d = spec_.d;
  const double t_lo = r / phi_.support_radius();
  if (eta <= t_lo) return 0.0;
  auto f = [&](double u) {
    const double t = std::exp(u);
    double zeta_td;  // zeta(t) t^{-d}
    if (s > 0.0) zeta_td = (spec_.zeta.kind == Weight::Kind::exact ? 1.0 : weight_at(t)) * std::pow(t, -s);
    else zeta_td = 1.0 + weight_at(t) * std::pow(t, -d);
    return zeta_td * phi_.value(r / t);
  };
  std::vector<double> br{std::log(t_lo)};
  if (r < eta) br.push_back(std::log(r));
  if (spec_.zeta.kind == Weight::Kind::tabulated)
    for (double t : spec_.zeta.knots)
      if (t > t_lo && t < eta && t != r) br.push_back(std::log(t));
  br.push_back(std::log(eta));
  std::sort(br.begin(), br.end());
  return k_.c_norm * integrate_pieces(f, br, 1e-300, 1e-12);
}

double Truncation::fourier_g_eta_quadrature(double xi, double eta) const {
  if (xi <= 0.0) throw singular_evaluation("fourier_g_eta: xi = 0");
  const double s = spec_.s;
  const int d = spec_.d;
  double u_lo = eta > 0.0 ? std::log(eta) : -std::log(xi) - 50.0 / (d - s);
  double u_hi;
  if (phi_.kind() == Profile::gaussian) u_hi = std::log(7.0 / xi);
  else u_hi = std::max(u_lo, -std::log(xi)) + 60.0 / (spec_.a - d + s);
  if (u_hi <= u_lo) return 0.0;
  auto f = [&](double u) {
    const double t = std::exp(u);
    double zeta;
    if (s > 0.0) zeta = (spec_.zeta.kind == Weight::Kind::exact ? 1.0 : weight_at(t)) * std::pow(t, d - s);
    else zeta = std::pow(t, d) + weight_at(t);
    return zeta * phi_.hat(t * xi);
  };
  std::vector<double> br{u_lo};
  const double u_mid = -std::log(xi);
  if (u_mid > u_lo && u_mid < u_hi) br.push_back(u_mid);
  if (spec_.zeta.kind == Weight::Kind::tabulated)
    for (double t : spec_.zeta.knots) {
      const double u = std::log(t);
      if (u > u_lo && u < u_hi) br.push_back(u);
    }
  br.push_back(u_hi);
  std::sort(br.begin(), br.end());
  return k_.c_norm * integrate_pieces(f, br, 1e-300, 1e-12);
}

// ---------------------------------------------------------------------------
// Point-argument forms

namespace {
double norm2(std::span<const double> x) {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return std::sqrt(r2);
}
}  // namespace

double f_eta(std::span<const double> x, double eta, const Truncation& tr) { return tr.f_eta(norm2(x), eta); }

double g_eta(std::span<const double> x, double eta, const Truncation& tr) { return tr.g_eta(norm2(x), eta); }

void grad_f_eta(std::span<const double> x, double eta, const Truncation& tr, std::span<double> out) {
  const double r = norm2(x);
  const double fr = tr.f_eta_dr(r, eta);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fr * x[i] / r;
}

void grad_g_eta(std::span<const double> x, double eta, const Truncation& tr, std::span<double> out) {
  const double r = norm2(x);
  if (r == 0.0) {
    if (eta <= 0.0) throw singular_evaluation("grad_g: x = 0");
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double gr = tr.g_eta_dr(r, eta);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = gr * x[i] / r;
}

double fourier_g_eta(std::span<const double> xi, double eta, const Truncation& tr) {
  return tr.fourier_g_eta(norm2(xi), eta);
}

}  // namespace modlab
