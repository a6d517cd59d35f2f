#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "modlab/commutator.hpp"
#include "modlab/meanfield.hpp"

namespace modlab {

struct schema_error : std::invalid_argument {
  schema_error(const std::string& field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field(field) {}
  std::string field;
};

// Least squares of log value against log N.
struct RateFit {
  std::vector<double> N, value;
  double slope = 0, intercept = 0, residual = 0;  // residual: rms in log space
};
RateFit rate_fit(const std::vector<std::pair<double, double>>& pairs);

// Jittered lattices against the uniform density; value = F_N + log term (s = 0), magnitude fitted.
struct EnergySweepPoint {
  std::size_t N = 0;
  std::vector<double> F_N, log_term;
  double mean = 0;  // mean of F_N + log_term
};
struct EnergySweep {
  std::vector<EnergySweepPoint> points;
  RateFit fit;
};
EnergySweep energy_sweep(const PotentialSpec& spec, TorusGeometry geo, const std::vector<std::size_t>& N_list,
                         int trials, double jitter, std::uint64_t seed, double ewald_tol = 1e-10);

struct CoercivityRecord {
  std::size_t N;
  Sampler sampler;
  int trial;
  double norm, base, slope, needed_C;
};
struct CoercivitySweep {
  std::vector<std::size_t> N;
  std::vector<double> C;  // max needed C per N
  double growth = 0;      // max_N C_N / C_{N_0}
  double spread = 0;      // max / min
  std::vector<CoercivityRecord> records;
};
CoercivitySweep coercivity_sweep(const PotentialSpec& spec, const TorusDensity& mu, const std::vector<std::size_t>& N_list,
                                 int trials, const std::vector<Sampler>& samplers, std::uint64_t seed, double r);

struct GronwallSetup {
  PotentialSpec spec;
  FlowSpec flow;  // dt is an upper bound; the audit and the save grid refine it
  TorusDensity mu0;
  int grid = 64;
  double jitter = 0.0;
  double t_end = 1e-3;
  int saves = 4;
  std::vector<std::uint64_t> seeds{0};
  double ewald_tol = 1e-10;
};
struct GronwallExperiment {
  std::vector<GronwallReport> reports;
  GronwallSweep sweep;
  std::vector<double> particle_dt, pde_dt;
};
GronwallExperiment gronwall_experiment(const GronwallSetup& setup, const std::vector<std::size_t>& N_list,
                                       double factor = 1.5);

// Strictly validated config with every default filled in.
struct ExperimentConfig {
  std::string command;
  nlohmann::json resolved;
};
ExperimentConfig parse_config(const nlohmann::json& in);
const std::vector<std::string>& commands();

struct Artifact {
  std::string filename;
  std::string content;
};
struct RunResult {
  int status = 0;  // 0 ok, 2 assertion failure, 3 numerical abort
  std::string message;
  std::vector<Artifact> artifacts;
};
RunResult run(const ExperimentConfig& cfg);

// CSV body with '#' metadata lines carrying the resolved config and the body's FNV-1a hash.
std::string csv_with_header(const ExperimentConfig& cfg, const std::string& body);

// Full command line: --config, --out, --seed, --threads; returns the exit status.
int cli_main(int argc, const char* const* argv);

}  // namespace modlab
