#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "modlab/torus.hpp"

namespace modlab {

struct aliasing_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Real scalar field on the uniform periodic grid n^d, row-major, x_j = j L / n.
struct GridField {
  TorusGeometry geo;
  int n = 0;
  std::vector<double> values;

  GridField() = default;
  GridField(TorusGeometry g, int n);
  static GridField from_poly(const TrigPoly& p, int n);
  std::size_t size() const { return values.size(); }
  double cell_volume() const;
  // Largest |k|_inf carrying a coefficient above tol * max|c|.
  int band(double tol = 1e-13) const;
};

// Normalized DFT: c_k = n^{-d} sum_j f_j e^{-2 pi i k.j / n}, k in (-n/2, n/2] per axis (FFT layout).
std::vector<cplx> forward(const GridField& f);
GridField inverse(const std::vector<cplx>& c, TorusGeometry g, int n);
// Integer wavenumber of FFT index i on an n-point axis.
inline int wavenumber(int i, int n) { return i <= n / 2 ? i : i - n; }

struct MultiplierSpec {
  enum class Kind { inhomogeneous, homogeneous, gradient, riesz };
  Kind kind = Kind::inhomogeneous;
  double alpha = 0.0;
  int axis = 0;  // gradient / riesz component
};
MultiplierSpec bracket(double alpha);  // <grad>^alpha
MultiplierSpec frac_laplacian(double alpha);  // |grad|^alpha
MultiplierSpec partial(int axis);
MultiplierSpec riesz_transform(int axis);

GridField apply_multiplier(const GridField& f, const MultiplierSpec& m);

// ||f||_{H^alpha}: (L^d sum_k w(k)^{2 alpha} |c_k|^2)^{1/2}, w = <2 pi k/L> or |2 pi k/L|.
double sobolev_norm(const GridField& f, double alpha, bool homogeneous = false);
// Grid quadrature; p = inf gives the grid max of |f|.
double lp_norm(const GridField& f, double p);
// Pointwise Frobenius norm of a family of fields, then its L^p norm.
double lp_norm(const std::vector<GridField>& fs, double p);

using GridVector = std::vector<GridField>;

// int v . grad f <grad>^alpha f over the torus.
double kato_ponce_lhs(const GridVector& v, const GridField& f, double alpha);
// int v . grad(<grad>^{alpha/2} f) <grad>^{alpha/2} f and -(1/2) int div v |<grad>^{alpha/2} f|^2.
double kato_ponce_symmetric_part(const GridVector& v, const GridField& f, double alpha);
double kato_ponce_by_parts(const GridVector& v, const GridField& f, double alpha);

struct AvalTerm {
  std::string label;
  double order;     // derivatives falling on v (total, including the gradient)
  double exponent;  // Lebesgue exponent (inf allowed)
  double value;
};
struct Avals {
  double total = 0;
  std::vector<AvalTerm> terms;
};
// Terms of A_{v,alpha} with alpha = 2m + r, r in (0, 2]; "2+" realized as 2 + eps.
Avals avals_constant(const GridVector& v, double alpha, double eps_plus = 0.1);

struct KPRecord {
  std::uint64_t seed;
  int band, trial;
  double lhs, A, norm2, ratio;
};
struct KPResult {
  double max_ratio = 0;
  int skipped = 0;
  std::vector<KPRecord> records;
};
// Random band-limited (v, f) on the unit torus in d dimensions.
KPResult kp_ratio_experiment(int trials, double alpha, int band, std::uint64_t seed, int d = 1, double eps_plus = 0.1);
// Random real field with iid normal coefficients for 0 < |k|_inf <= band.
GridField random_band_limited(TorusGeometry g, int band, int n, Philox& rng, bool zero_mean = true);

struct LeibnizResult {
  double lhs = 0, rhs_factor = 0, ratio = 0;
};
// lhs = ||<grad>^{r/2} d_alpha (f g)||_2, rhs = ||g||_{H^{|alpha| + r/2}} * A~_{f,|alpha|,r}.
LeibnizResult leibniz_check(const GridField& f, const GridField& g, double r, const std::vector<int>& multi_index,
                            double eps_plus = 0.1);

// Inhomogeneous extension: per-mode profile phi(m, z) with m = <2 pi k / L>.
double cs_profile(double m, double s, double z);         // t-quadrature
double cs_profile_minus_one(double m, double s, double z);  // phi - 1 without cancellation
double cs_profile_closed(double m, double s, double z);  // 2 (mz/2)^{s/2} K_{s/2}(mz) / Gamma(s/2)
double cs_profile_dz_closed(double m, double s, double z);
double d2n_constant(double s);  // Gamma(-s/2) / (2^s Gamma(s/2))
double cs_energy_constant(double s);  // 4 Gamma(1 - s/2) / (2^s Gamma(s/2))

std::vector<GridField> cs_extension(const GridField& f, double s, const std::vector<double>& z);
// Richardson-extrapolated lim (F(., z) - f) / z^s, starting at z0 = h / max m.
GridField cs_dirichlet_to_neumann(const GridField& f, double s, double h = 0.02);
// int_{R^{d+1}} |z|^{1-s} (F^2 + |grad F|^2) by quadrature in z on a graded grid.
double cs_energy(const GridField& f, double s, double z_min = 1e-4, double rho = 1.15);

}  // namespace modlab
