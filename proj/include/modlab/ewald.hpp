#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "modlab/kernels.hpp"
#include "modlab/torus.hpp"

namespace modlab {

struct under_resolved : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Piecewise Chebyshev interpolant on [a, b] with uniform pieces.
class ChebTable {
 public:
  ChebTable() = default;
  // Refines until the midpoint error is below tol * max|f|.
  ChebTable(const std::function<double(double)>& f, double a, double b, double tol, int degree = 14);
  double operator()(double x) const;
  std::size_t pieces() const { return n_; }

 private:
  double a_ = 0, b_ = 1, inv_h_ = 1;
  std::size_t n_ = 0;
  int deg_ = 0;
  std::vector<double> c_;
};

struct EwaldOptions {
  double eta = 0.0;  // <= 0: L / 8
  Profile phi = Profile::gaussian;
  double tol = 1e-10;  // tail budget for each of the two sums
  int K = 0;           // <= 0: chosen from the Fourier tail bound
  int K_cap = 200000;
  bool tabulate = true;  // Chebyshev near field (Gaussian profile, exact zeta)
};

// Periodic kernel g_T = sum_n f_eta(. + nL) - M + L^{-d} sum_{k != 0} ghat_eta(k/L) e(k.x/L).
class PeriodizedKernel {
 public:
  PeriodizedKernel(const PotentialSpec& spec, TorusGeometry geo, EwaldOptions opt = {});

  const Truncation& truncation() const { return tr_; }
  const PotentialSpec& spec() const { return tr_.spec(); }
  const TorusGeometry& geometry() const { return geo_; }
  double eta() const { return eta_; }
  int K() const { return K_; }
  double cutoff() const { return rc_; }
  int image_radius() const { return images_; }
  double mean_f() const { return M_; }  // L^{-d} int f_eta

  double eval(std::span<const double> x) const;
  void gradient(std::span<const double> x, std::span<double> out) const;
  double near_field(std::span<const double> x) const;  // image sum of f_eta
  double far_field(std::span<const double> x) const;   // Fourier sum
  // Untruncated mode value L^{-d} ghat(|k|/L), k != 0.
  double fourier(std::span<const int> k) const;

  // (1/2N^2) sum_{i != j} g_T(x_i - x_j) through cell lists + structure factors.
  double pair_energy(const Configuration& c) const;
  // Same through the O(N^2) loop over eval().
  double pair_energy_direct(const Configuration& c) const;
  // E_i = sum_{j != i} grad g_T(x_i - x_j) (unnormalized).
  std::vector<double> pair_gradients(const Configuration& c) const;

  // Radial pieces used by callers that need f_eta and g_eta separately.
  double f_r(double r) const;
  double f_dr(double r) const;

  // One of each +-k pair with its (tail-truncated) coefficient L^{-d} ghat_eta(|k|/L).
  struct HalfMode {
    std::array<int, 3> k;
    double coef;
  };
  const std::vector<HalfMode>& half_modes() const { return modes_; }
  const EwaldOptions& options() const { return opt_; }

 private:
  void choose_K(int requested, int cap, double tol);
  void build_modes();
  void near_sums(const Configuration& c, std::vector<double>* energy, std::vector<double>* grad) const;
  void far_sums(const Configuration& c, double* energy, std::vector<double>* grad) const;

  Truncation tr_;
  TorusGeometry geo_;
  EwaldOptions opt_;
  double eta_ = 0, tol_ = 0;
  int K_ = 0;
  double rc_ = 0;
  int images_ = 0;
  double M_ = 0;
  std::vector<HalfMode> modes_;  // one of each +-k pair
  bool tab_ = false;
  ChebTable G_, H_;  // g_eta(sqrt w), g_eta'(sqrt w)/sqrt w on w = r^2
};

}  // namespace modlab
