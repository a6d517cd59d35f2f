#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "modlab/energy.hpp"
#include "modlab/ewald.hpp"
#include "modlab/spectral.hpp"
#include "modlab/torus.hpp"

namespace modlab {

// (1/N^2) sum_{i != j} (v_i - v_j).grad g_T(x_i - x_j)
//   - (2/N) sum_i [v(x_i).(grad g_T * mu)(x_i) - sum_c (d_c g_T * (v_c mu))(x_i)]
//   + 2 int v.grad(g_T * mu) mu
struct TransportTerms {
  double pair = 0, cross = 0, self = 0, total = 0;
};
TransportTerms transport_quadratic_form(const Configuration& c, const TorusDensity& mu, const VectorField& v,
                                        const PeriodizedKernel& g);

// Whole-space linear field v(x) = A x + b.
struct LinearField {
  int d = 1;
  std::vector<double> A;  // row-major d x d
  std::vector<double> b;
  static LinearField identity(int d);
  void apply(std::span<const double> x, std::span<double> out) const;
};
TransportTerms transport_quadratic_form(const Configuration& c, const GaussianDensity& mu, const LinearField& v);

// ||grad v||_inf + || |grad|^{a/2} v ||_{L^{2d/(a-2)}} 1_{a > 2}.
struct TransportNorm {
  double lipschitz = 0, fractional = 0, total = 0;
};
TransportNorm transport_norm(const VectorField& v, double a, int grid = 0);

// Random real vector field with iid normal coefficients for 0 < |k|_inf <= band.
VectorField random_vector_field(TorusGeometry g, int band, Philox& rng);

enum class Sampler { iid, lattice, cluster };
std::string to_string(Sampler s);
Configuration sample(Sampler s, const TorusDensity& mu, std::size_t N, Philox& rng);

struct FIRecord {
  std::uint64_t seed;
  std::size_t N;
  int d;
  double s, a;
  Sampler sampler;
  int trial;
  double lhs, norm, rhs_core, ratio;
};
struct FIResult {
  double offset_C = 0;  // calibrated multiplier of ||mu||_inf lambda^{d-s}, frozen after the first N
  std::vector<std::size_t> N;
  std::vector<double> sup_ratio;
  std::vector<FIRecord> records;
};
struct FIOptions {
  int mu_band = 2;
  double mu_amplitude = 0.6;
  int v_band = 2;
  double ewald_tol = 1e-10;
  std::vector<Sampler> samplers = {Sampler::iid, Sampler::lattice, Sampler::cluster};
};
FIResult fi_ratio_experiment(int trials, const std::vector<std::size_t>& N_list, const PotentialSpec& spec,
                             std::uint64_t seed, const FIOptions& opt = {});

// int int (v(x) - v(y)).grad g_eta(x - y) f(x) f(y) on the torus (f zero mean) against
// transport norm times int int g_eta f f.
struct TruncatedCommutator {
  double lhs = 0, quadratic = 0, norm = 0, ratio = 0;
};
TruncatedCommutator truncated_commutator_check(const TrigPoly& f, const VectorField& v, double eta,
                                               const PotentialSpec& spec, Profile phi = Profile::gaussian);

}  // namespace modlab
