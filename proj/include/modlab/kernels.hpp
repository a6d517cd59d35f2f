#pragma once

#include <span>
#include <string>
#include <vector>

#include "modlab/quadrature.hpp"

namespace modlab {

enum class Profile { bessel, gaussian };

std::string to_string(Profile p);
Profile profile_from_string(const std::string& name);

// Weight zeta(t) of a Riesz-type potential.
//   exact:     zeta = t^{d-s}
//   scaled:    zeta = scale * t^{d-s}                         (s > 0 only)
//   tabulated: s > 0: zeta = w(t) t^{d-s}, w log-linear in t on the knots,
//                     constant beyond them; values hold w.
//              s = 0: zeta = t^d + rho(t), rho log-linear on the knots and
//                     zero outside; values hold rho.
struct Weight {
  enum class Kind { exact, scaled, tabulated };
  Kind kind = Kind::exact;
  double scale = 1.0;
  std::vector<double> knots;
  std::vector<double> values;
  double C_zeta = 1.0;
};

struct PotentialSpec {
  int d = 1;
  double s = 0.5;
  double a = 1.8;
  Weight zeta{};

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
  bool log_case() const { return s == 0.0; }
  double C_zeta() const;
};

struct KernelConstants {
  double c_norm = 0.0;
  double C_phi_T_slope = 0.0;   // phi(0)
  double C_phi_T_offset = 0.0;  // -int_0^inf log(r) phi'(r) dr
};

// Radial splitting function phi: the Bessel potential G_a or exp(-pi r^2).
class RadialProfile {
 public:
  RadialProfile(Profile kind, int d, double a);

  Profile kind() const { return kind_; }
  double value(double r) const;
  double deriv(double r) const;
  // phi(0) - phi(r), accurate for small r.
  double drop(double r) const;
  double hat(double rho) const;
  double at_zero() const { return phi0_; }
  // Decay radius beyond which phi is below 1e-300 relative.
  double support_radius() const;
  // Small-r exponent p with phi(0) - phi(r) ~ r^p.
  double cusp_exponent() const;

  double mellin(double z) const;                       // int_0^inf r^{z-1} phi
  double upper_mellin(double z, double R) const;       // int_R^inf, z >= 0
  double lower_mellin_reg(double z, double R) const;   // int_0^R r^{z-1}(phi - phi(0)), z >= 0
  double lower_mellin(double z, double R) const;       // int_0^R, z > 0
  double hat_mellin(double z) const;                   // int_0^inf t^{z-1} phihat(t)
  double hat_upper_mellin(double z, double T) const;
  double hat_lower_mellin(double z, double T) const;
  double log_moment() const;                           // int_0^inf log(r) phi'(r) dr

 private:
  Profile kind_;
  int d_;
  double a_, nu_, norm_, phi0_;
};

// Bessel potential G_a in R^d.
double bessel_potential(double r, double a, int d);
double bessel_potential_quadrature(double r, double a, int d);
double bessel_potential_derivative(double r, double a, int d);

double riesz_potential(double r, const PotentialSpec& spec);
double riesz_potential(std::span<const double> x, const PotentialSpec& spec);
// Constant C with FT(g)(xi) = C |xi|^{s-d} (xi in cycles), any s in [0, d).
double riesz_fourier_constant(int d, double s);

KernelConstants normalization_constant(const PotentialSpec& spec, Profile p = Profile::bessel);
KernelConstants normalization_constant_quadrature(const PotentialSpec& spec,
                                                  Profile p = Profile::bessel);

// Truncation g = g_eta + f_eta of a Riesz-type potential built on one profile.
// Radial arguments r = |x|.
class Truncation {
 public:
  explicit Truncation(PotentialSpec spec, Profile profile = Profile::bessel);

  const PotentialSpec& spec() const { return spec_; }
  const RadialProfile& profile() const { return phi_; }
  const KernelConstants& constants() const { return k_; }
  double c() const { return k_.c_norm; }

  double g(double r) const;
  double g_dr(double r) const;
  double f_eta(double r, double eta) const;
  double g_eta(double r, double eta) const;
  double f_eta_dr(double r, double eta) const;
  double g_eta_dr(double r, double eta) const;
  double g_eta_zero(double eta) const;
  double f_eta_mass(double eta) const;  // int_{R^d} f_eta
  double fourier_g(double xi) const;
  double fourier_g_eta(double xi, double eta) const;
  double fourier_f_eta(double xi, double eta) const;

  // Quadrature oracles in the scale variable t.
  double reconstruct(double r) const;
  double f_eta_quadrature(double r, double eta) const;
  double fourier_g_eta_quadrature(double xi, double eta) const;

  // zeta(t) t^{s-d} for s > 0, or rho(t) for s = 0.
  double weight_at(double t) const;

 private:
  // Contributions of the tabulated part of zeta over [t1, t2] (t2 may be inf).
  double table_space(double r, double t1, double t2, int deriv) const;
  double table_fourier(double xi, double t1, double t2) const;
  double table_at_zero(double eta) const;
  double exact_f(double r, double eta) const;
  double exact_g_eta(double r, double eta) const;
  double exact_g_eta_dr(double r, double eta) const;
  double lead() const;  // weight multiplying the exact Riesz part

  PotentialSpec spec_;
  RadialProfile phi_;
  KernelConstants k_;
};

// Point-argument conveniences; gradients write d components into out.
double f_eta(std::span<const double> x, double eta, const Truncation& tr);
double g_eta(std::span<const double> x, double eta, const Truncation& tr);
void grad_f_eta(std::span<const double> x, double eta, const Truncation& tr, std::span<double> out);
void grad_g_eta(std::span<const double> x, double eta, const Truncation& tr, std::span<double> out);
double fourier_g_eta(std::span<const double> xi, double eta, const Truncation& tr);

}  // namespace modlab
