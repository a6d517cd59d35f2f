#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "modlab/dynamics.hpp"
#include "modlab/energy.hpp"
#include "modlab/spectral.hpp"

namespace modlab {

struct numerical_abort : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct cfl_error : numerical_abort {
  using numerical_abort::numerical_abort;
};

// Density on the n^d grid, stored as normalized FFT coefficients (a_0 = L^{-d}).
struct DensityState {
  TorusGeometry geo;
  int n = 0;
  double t = 0;
  std::vector<cplx> c;
  double linf = 0, l1 = 0, min = 0, mass = 0;

  static DensityState from_density(const TorusDensity& mu, int n);
  static DensityState from_grid(const GridField& f);
  GridField grid() const;
  // Trigonometric polynomial truncated at the dealiased band n/3.
  TorusDensity density() const;
  void refresh();
};

class MeanFieldSolver {
 public:
  MeanFieldSolver(const PotentialSpec& spec, const FlowSpec& flow, TorusGeometry geo, int n);

  const FlowSpec& flow() const { return flow_; }
  const PotentialSpec& spec() const { return spec_; }
  int n() const { return n_; }

  // u = -M grad g * mu + V^t on the grid.
  GridVector velocity(const DensityState& s) const;
  // Integrating-factor RK4 (Lawson) with the 2/3 rule; throws cfl_error or numerical_abort.
  DensityState step(const DensityState& s, double dt) const;
  // 2.5 / largest linearized advection rate, the explicit stability limit on the nonlocal term.
  double stable_dt(const DensityState& s) const;
  std::vector<DensityState> solve(const DensityState& s0, double dt, const std::vector<double>& save_times) const;

 private:
  std::vector<cplx> rhs(const std::vector<cplx>& c, double t) const;
  std::vector<cplx> velocity_coeffs(const std::vector<cplx>& c, int axis) const;
  GridVector velocity_grid(const std::vector<cplx>& c, double t) const;

  PotentialSpec spec_;
  FlowSpec flow_;
  TorusGeometry geo_;
  int n_;
  std::size_t size_;
  std::vector<std::vector<int>> k_;  // wavenumber per axis, FFT layout
  std::vector<double> ghat_, k2_;
  std::vector<char> keep_;
};

DensityState pde_step(const DensityState& s, const PotentialSpec& spec, const FlowSpec& flow, double dt);
GridVector velocity_field(const DensityState& s, const PotentialSpec& spec, const FlowSpec& flow);

// Grid field to trigonometric polynomials at the field's own band.
VectorField to_vector_field(const GridVector& u);

// Trapezoid rule over transport_norm(u^t, a); cumulative values at each save time.
std::vector<double> cumulative_regularity(const std::vector<double>& t, const std::vector<double>& norms);
double regularity_functional(const std::vector<DensityState>& states, double a, const MeanFieldSolver& solver);
std::vector<double> transport_norms(const std::vector<DensityState>& states, double a, const MeanFieldSolver& solver);

bool linfty_monotonicity_check(const std::vector<DensityState>& states, double tol = 1e-8);

// Lattice pushed through the inverse CDF of the axis-0 marginal; mu must depend on x_0 only.
Configuration quantile_lattice(const TorusDensity& mu, std::size_t N, double jitter, Philox& rng);
// L^{-d}(1 + eps cos(2 pi k x_0 / L))
TorusDensity axis_mode_density(TorusGeometry g, int k, double eps);

struct CoupledRun {
  std::vector<Trajectory> particles;  // one per seed
  std::vector<DensityState> states;
};
// Particles and PDE on the shared save schedule; snapshot F_N is filled in (averaged over seeds).
CoupledRun run_coupled(const Configuration& x0, const DensityState& mu0, const FlowSpec& flow,
                       const PeriodizedKernel& kernel, double pde_dt, const std::vector<double>& save_times,
                       const std::vector<std::uint64_t>& seeds);

struct GronwallSample {
  double t = 0;
  double F_N = 0;        // mean over seeds
  double log_term = 0;   // log(N ||mu||_inf) / (2 N d) for s = 0
  double additive = 0;   // ||mu||_inf^{s/d} N^{s/d - 1}, multiplied by C
  double ito = 0;        // (1/beta) ||mu||_inf^{(s+2)/d} N^{(s+2)/d - 1}, multiplied by C
  double N_u = 0;        // int_0^t transport norm of u
};
struct GronwallReport {
  std::size_t N = 0;
  std::vector<GronwallSample> samples;
  double C = 0;  // minimal C >= 1 with lhs(t) <= C e^{C N_u(t)} bracket(t) for all t
  double lhs(std::size_t i, double C) const;
  double rhs(std::size_t i, double C) const;
  bool holds(double C, std::size_t upto) const;
};
GronwallReport gronwall_check(const CoupledRun& run, const PeriodizedKernel& kernel, const FlowSpec& flow, double a);
// Refit on samples with t <= T.
double gronwall_fit(const GronwallReport& r, double T);

struct GronwallSweep {
  std::vector<std::size_t> N;
  std::vector<double> C;
  double spread = 0;  // max C / min C
  bool stable = false;
};
GronwallSweep gronwall_sweep(const std::vector<GronwallReport>& reports, double factor = 1.5);

// v = M grad g * f with |M| = 1 in operator norm.
struct VFieldLemma {
  double lhs_grad = 0, rhs_grad = 0, lhs_frac = 0, rhs_frac = 0;
  double ratio_grad() const { return rhs_grad > 0 ? lhs_grad / rhs_grad : 0.0; }
  double ratio_frac() const { return rhs_frac > 0 ? lhs_frac / rhs_frac : 0.0; }
};
VFieldLemma vfield_norm_lemma_check(const GridField& f, const PotentialSpec& spec, double a, double p, double alpha);

}  // namespace modlab
