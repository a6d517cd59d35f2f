#pragma once

#include <span>
#include <vector>

#include "modlab/ewald.hpp"
#include "modlab/kernels.hpp"
#include "modlab/torus.hpp"

namespace modlab {

struct EnergyBreakdown {
  double pair_term = 0, cross_term = 0, self_term = 0;
  double F_N = 0;
  double lambda = 0;
};

// (N ||mu||_inf)^{-1/d}
double microscale(std::size_t N, double linf, int d);

// Riesz value at a scalar radius: -log r or r^{-s}/s.
double riesz_radial(double r, double s);

EnergyBreakdown modulated_energy(const Configuration& c, const TorusDensity& mu, const PeriodizedKernel& g);

// Five pieces of F_N at truncation scale eta (independent of the kernel's own eta).
struct SplittingTerms {
  double eta = 0;
  double near_pairs = 0;   // (1/2N^2) sum_{i != j} f_eta^per(x_i - x_j)
  double f_self = 0;       // (1/2) int int f_eta^per dmu dmu
  double g_quadratic = 0;  // (1/2) int int g_eta^per d(mu_N - mu)^2, diagonal kept
  double g_diag = 0;       // -g_eta^per(0) / (2N)
  double f_cross = 0;      // -(1/N) sum_i (f_eta^per * mu)(x_i)
  double lhs = 0, rhs = 0, residual = 0;
};
SplittingTerms splitting_identity_check(const Configuration& c, const TorusDensity& mu,
                                        const PeriodizedKernel& g, double eta, double tol = 1e-13);

// r_i = min(min_{j != i} |x_i - x_j|, lambda) / 4.
std::vector<double> nearest_neighbor_scales(const Configuration& c, double lambda);

// Left sides of the close-pair and nearest-neighbor bounds and the right side
// written as base + C * slope (C the calibrated constant).
struct SmallScaleBound {
  double lhs_pairs = 0;      // (1/2N^2) sum_{i != j, |x_i - x_j| <= eta} g-term
  double lhs_neighbors = 0;  // (1/2N^2) sum_i g(4 r_i) (or g(4 r_i / eta) for s = 0)
  double rhs_base = 0, rhs_slope = 0;
  double F_N = 0, lambda = 0, eta = 0;
  double rhs(double C) const { return rhs_base + C * rhs_slope; }
  // Smallest C with lhs <= rhs(C) (neighbors) and lhs <= C rhs(C) (pairs).
  double needed_C() const;
  double ratio_pairs(double C) const;
  double ratio_neighbors(double C) const;
};
SmallScaleBound small_scale_bound_check(const Configuration& c, const TorusDensity& mu, const PeriodizedKernel& g,
                                        double eta);

struct CoercivityResult {
  double value = 0;
  int K = 0;
  double diag_tail = 0;          // exact diagonal part beyond K (included in value)
  double offdiag_tail_bound = 0;  // bound on the omitted off-diagonal part
};
// ||mu_N - mu||^2_{H^{-r/2}} = L^{-d} sum_k <2 pi k / L>^{-r} |muhat_N(k) - muhat(k)|^2.
CoercivityResult coercivity_norm(const Configuration& c, const TorusDensity& mu, double r, int K = 0);
// sum_n G_r(x + nL): the torus Bessel kernel with Fourier coefficients L^{-d} <2 pi k/L>^{-r}.
double periodic_bessel(std::span<const double> x, double r, const TorusGeometry& g);

// Coercivity right side in base + C * slope form with the constant entering
// multiplicatively too: norm <= C (base + C slope).
struct CoercivityBound {
  double norm = 0, base = 0, slope = 0;
  double needed_C() const;
};
CoercivityBound coercivity_bound(const Configuration& c, const TorusDensity& mu, const PeriodizedKernel& g, double r);

// Lower bound F_N + log-term + C ||mu||_inf lambda^{d-s} >= 0.
struct LowerBoundSample {
  double F_N = 0, log_term = 0, lambda = 0, scale = 0;
  double needed_C() const;  // max(0, -(F_N + log_term)) / scale
};
LowerBoundSample lower_bound_sample(const Configuration& c, const TorusDensity& mu, const PeriodizedKernel& g,
                                    bool with_log_term = true);
double lower_bound_diagnostic(const std::vector<Configuration>& batch, const TorusDensity& mu,
                              const PeriodizedKernel& g, bool with_log_term = true);

// Isotropic Gaussian density N(0, sigma^2 I) in R^d with its Riesz potential in closed form.
class GaussianDensity {
 public:
  GaussianDensity(int d, double sigma, double s);
  int d() const { return d_; }
  double sigma() const { return sigma_; }
  double s() const { return s_; }
  double density(std::span<const double> x) const;
  double potential(std::span<const double> x) const;  // (g * mu)(x)
  void potential_gradient(std::span<const double> x, std::span<double> out) const;
  // out[a * d + b] = d_a d_b (g * mu)(x)
  void potential_hessian(std::span<const double> x, std::span<double> out) const;
  double self_energy() const;  // int int g dmu dmu
  // Radial profile of g * mu * mu as a function of q = |x|^2 / (4 sigma^2): its q-derivative at 0.
  double self_profile_slope() const;

 private:
  double H(double q) const;
  double dH(double q) const;
  double d2H(double q) const;
  int d_;
  double sigma_, s_, B_;
};

EnergyBreakdown whole_space_energy(const Configuration& c, const GaussianDensity& mu);

}  // namespace modlab
