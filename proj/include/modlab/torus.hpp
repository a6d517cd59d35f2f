#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace modlab {

using cplx = std::complex<double>;

struct TorusGeometry {
  int d = 1;
  double L = 1.0;
  double volume() const;
  // Reduce each coordinate into [0, L).
  void wrap(std::span<double> x) const;
  // Minimal-image displacement, components in [-L/2, L/2).
  void min_image(std::span<double> dx) const;
};

// N points in R^d (row-major) on the torus or in whole space.
struct Configuration {
  int d = 1;
  std::vector<double> x;
  std::optional<TorusGeometry> torus;

  std::size_t size() const { return x.size() / static_cast<std::size_t>(d); }
  std::span<const double> point(std::size_t i) const { return {x.data() + i * d, static_cast<std::size_t>(d)}; }
  std::span<double> point(std::size_t i) { return {x.data() + i * d, static_cast<std::size_t>(d)}; }
  // Distance between i and j, periodic when on the torus.
  double distance(std::size_t i, std::size_t j) const;
  double min_distance() const;
  // Throws collision_error if two points coincide (distance <= tol).
  void check_distinct(double tol = 0.0) const;
};

struct collision_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Philox4x32-10 counter-based generator, keyed by a 64-bit seed and a
// 128-bit counter; the last counter word advances per block.
class Philox {
 public:
  Philox(std::uint64_t seed, std::uint32_t c0, std::uint32_t c1 = 0, std::uint32_t c2 = 0);
  std::uint32_t next_u32();
  double uniform();  // (0, 1)
  double normal();   // Box-Muller

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

 private:
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_;
  std::array<std::uint32_t, 4> buf_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Modes k with |k|_inf <= K in d dimensions, lexicographic order.
struct ModeBox {
  int d = 1;
  int K = 0;
  std::size_t size() const;
  std::size_t index(std::span<const int> k) const;
  void mode(std::size_t idx, std::span<int> k) const;
  int side() const { return 2 * K + 1; }
};

// Real trigonometric polynomial sum_k c_k e^{2 pi i k.x / L}.
class TrigPoly {
 public:
  TrigPoly() = default;
  TrigPoly(TorusGeometry g, int K);

  const TorusGeometry& geometry() const { return geo_; }
  const ModeBox& box() const { return box_; }
  int K() const { return box_.K; }
  std::vector<cplx>& coeffs() { return c_; }
  const std::vector<cplx>& coeffs() const { return c_; }
  cplx& at(std::span<const int> k) { return c_[box_.index(k)]; }
  cplx at(std::span<const int> k) const;  // zero outside the box

  double eval(std::span<const double> x) const;
  std::vector<double> eval_points(const Configuration& cfg) const;
  // Values on the uniform grid n^d (row-major, x_j = j L / n).
  std::vector<double> grid_values(int n) const;

  double integral() const;  // int over the torus
  TrigPoly derivative(int axis) const;
  TrigPoly resized(int K) const;
  TrigPoly operator*(const TrigPoly& o) const;
  TrigPoly operator+(const TrigPoly& o) const;
  TrigPoly operator-(const TrigPoly& o) const;
  TrigPoly scaled(double a) const;
  // Multiply coefficient k by m(k) (k as double vector).
  template <class F>
  TrigPoly multiplier(F&& m) const {
    TrigPoly out = *this;
    std::vector<int> k(box_.d);
    for (std::size_t i = 0; i < c_.size(); ++i) {
      box_.mode(i, k);
      out.c_[i] *= m(std::span<const int>(k));
    }
    return out;
  }
  // Translate: p(x - shift).
  TrigPoly shifted(std::span<const double> shift) const;
  // Largest |Im| of the values implied by the coefficients (Hermitian defect).
  double hermitian_defect() const;

 private:
  TorusGeometry geo_;
  ModeBox box_;
  std::vector<cplx> c_;
};

using VectorField = std::vector<TrigPoly>;

// Probability density on the torus given by a nonnegative trig polynomial.
struct TorusDensity {
  TrigPoly p;
  double linf = 0.0;  // grid max
  double min = 0.0;   // grid min

  // Validates unit mass, Hermitian symmetry and nonnegativity on a grid.
  static TorusDensity from_poly(TrigPoly p, int grid = 0);
  static TorusDensity uniform(TorusGeometry g);
  // a_0 = L^{-d}; nonzero modes with |k|_inf <= K drawn so that
  // sum |a_k| <= amplitude * a_0.
  static TorusDensity random(TorusGeometry g, int K, double amplitude, Philox& rng);
  const TorusGeometry& geometry() const { return p.geometry(); }
  double eval(std::span<const double> x) const { return p.eval(x); }
};

// Samplers (torus).
Configuration sample_iid(const TorusDensity& mu, std::size_t N, Philox& rng);
// N must be a perfect d-th power; jitter in units of the lattice spacing.
Configuration jittered_lattice(TorusGeometry g, std::size_t N, double jitter, Philox& rng);
// Two uniform clusters centred at L/4 and 3L/4, cube side `width` * L.
Configuration two_cluster(TorusGeometry g, std::size_t N, double width, Philox& rng);

// Per-axis tables e^{2 pi i k x_a / L} for k = -K..K.
void axis_phases(std::span<const double> x, double L, int K, std::vector<cplx>& out);

}  // namespace modlab
