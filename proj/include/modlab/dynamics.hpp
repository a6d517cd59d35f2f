#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modlab/ewald.hpp"
#include "modlab/kernels.hpp"
#include "modlab/torus.hpp"

namespace modlab {

// V^t(x), a vector field (not a potential).
struct ExternalField {
  std::string name = "zero";
  std::function<void(double t, std::span<const double> x, std::span<double> out)> eval;
  bool zero() const { return !eval; }

  static ExternalField none();
  static ExternalField constant(std::vector<double> c);
  // amp * sin(2 pi x_axis / L) e_axis, optionally times cos(omega t)
  static ExternalField sine(int d, int axis, double amp, double L = 1.0, double omega = 0.0);
  static ExternalField fourier(VectorField v);
};

enum class Integrator { rk4, euler_maruyama };
std::string to_string(Integrator i);

struct FlowSpec {
  int d = 1;
  std::vector<double> M;  // row-major d x d
  ExternalField V = ExternalField::none();
  double beta = std::numeric_limits<double>::infinity();
  double dt = 1e-3;
  double t_end = 1.0;
  Integrator integrator = Integrator::rk4;
  bool interaction = true;
  double audit_safety = 0.1;

  static FlowSpec gradient(int d);  // M = -I
  bool deterministic() const { return std::isinf(beta); }
  // Throws std::invalid_argument naming the field.
  void validate() const;
};

// Symmetric part negative semidefinite within 1e-12.
bool check_repulsive(std::span<const double> M, int d);

// Whole space (Truncation) or torus (PeriodizedKernel) pair interaction.
class Interaction {
 public:
  explicit Interaction(const Truncation& tr) : tr_(&tr) {}
  explicit Interaction(const PeriodizedKernel& k) : k_(&k) {}
  bool periodic() const { return k_ != nullptr; }
  const PotentialSpec& spec() const { return k_ ? k_->spec() : tr_->spec(); }
  // sum_{j != i} grad g(x_i - x_j), row-major.
  std::vector<double> gradients(const Configuration& c) const;
  // (1/2N^2) sum_{i != j} g(x_i - x_j)
  double energy(const Configuration& c) const;

 private:
  const Truncation* tr_ = nullptr;
  const PeriodizedKernel* k_ = nullptr;
};

// F_i = (1/N) sum_{j != i} M grad g(x_i - x_j) - V(x_i).
std::vector<double> force(const Configuration& c, const FlowSpec& flow, const Interaction& g, double t = 0.0);

struct StiffnessAudit {
  double min_dist = 0, dt_max = 0;
  bool ok = true;
};
// dt <= safety * N min_dist^{s+2} / |M|.
StiffnessAudit stiffness_audit(const Configuration& c, const FlowSpec& flow, const PotentialSpec& spec);

struct Snapshot {
  double t = 0;
  Configuration x;
  double H = 0, min_dist = 0;
  double F_N = std::numeric_limits<double>::quiet_NaN();
};

struct CollisionRecord {
  double t = 0;
  std::size_t step = 0, i = 0, j = 0;
  double distance = 0;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  std::optional<CollisionRecord> collision;
  std::size_t steps = 0;
  bool aborted() const { return collision.has_value(); }
};

inline constexpr double kCollisionDistance = 1e-10;

// Fixed-step RK4 (beta = inf) or Euler-Maruyama; noise keyed by (seed, step, particle).
// save_times must be sorted and lie on the dt grid up to rounding; t = 0 is always saved.
Trajectory simulate(const Configuration& x0, const FlowSpec& flow, const Interaction& g,
                    const std::vector<double>& save_times, std::uint64_t seed);

std::vector<double> uniform_save_times(double t_end, int count);

void write_trajectory_csv(std::ostream& os, const Trajectory& tr);
void write_trajectory_binary(std::ostream& os, const Trajectory& tr, std::uint64_t spec_hash);

}  // namespace modlab
