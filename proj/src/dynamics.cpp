#include "modlab/dynamics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <Eigen/Dense>

#include "modlab/io.hpp"

namespace modlab {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double matrix_norm2(std::span<const double> M, int d) {
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(M.data(), d, d);
  return Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues()(0);
}

// Pairs closer than kCollisionDistance, found by a sweep along axis 0.
std::optional<std::pair<std::size_t, std::size_t>> find_collision(const Configuration& c) {
  const std::size_t N = c.size();
  const int d = c.d;
  std::vector<double> key(N);
  for (std::size_t i = 0; i < N; ++i) {
    double v = c.x[i * d];
    if (c.torus) {
      v = std::fmod(v, c.torus->L);
      if (v < 0) v += c.torus->L;
    }
    key[i] = v;
  }
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
  auto test = [&](std::size_t a, std::size_t b) { return c.distance(a, b) < kCollisionDistance; };
  for (std::size_t p = 0; p < N; ++p)
    for (std::size_t q = p + 1; q < N && key[order[q]] - key[order[p]] < kCollisionDistance; ++q)
      if (test(order[p], order[q])) return std::pair{std::min(order[p], order[q]), std::max(order[p], order[q])};
  if (c.torus && N > 1) {
    const double L = c.torus->L;
    for (std::size_t p = 0; p < N && key[order[p]] < kCollisionDistance; ++p)
      for (std::size_t q = N; q-- > p + 1 && key[order[q]] > L - kCollisionDistance;)
        if (test(order[p], order[q])) return std::pair{std::min(order[p], order[q]), std::max(order[p], order[q])};
  }
  return std::nullopt;
}

std::pair<std::size_t, std::size_t> closest_pair(const Configuration& c) {
  std::pair<std::size_t, std::size_t> best{0, 1};
  double m = INFINITY;
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = i + 1; j < c.size(); ++j) {
      const double r = c.distance(i, j);
      if (r < m) {
        m = r;
        best = {i, j};
      }
    }
  return best;
}

}  // namespace

ExternalField ExternalField::none() { return {}; }

ExternalField ExternalField::constant(std::vector<double> c) {
  ExternalField f;
  f.name = "constant";
  f.eval = [c](double, std::span<const double>, std::span<double> out) { std::copy(c.begin(), c.end(), out.begin()); };
  return f;
}

ExternalField ExternalField::sine(int d, int axis, double amp, double L, double omega) {
  if (axis < 0 || axis >= d) throw std::invalid_argument("V.axis: out of range");
  ExternalField f;
  f.name = "sine";
  f.eval = [=](double t, std::span<const double> x, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    out[axis] = amp * std::sin(kTwoPi * x[axis] / L) * (omega == 0.0 ? 1.0 : std::cos(omega * t));
  };
  return f;
}

ExternalField ExternalField::fourier(VectorField v) {
  ExternalField f;
  f.name = "fourier";
  f.eval = [v = std::move(v)](double, std::span<const double> x, std::span<double> out) {
    for (std::size_t a = 0; a < v.size(); ++a) out[a] = v[a].eval(x);
  };
  return f;
}

std::string to_string(Integrator i) { return i == Integrator::rk4 ? "rk4" : "euler_maruyama"; }

FlowSpec FlowSpec::gradient(int d) {
  FlowSpec f;
  f.d = d;
  f.M.assign(d * d, 0.0);
  for (int a = 0; a < d; ++a) f.M[a * d + a] = -1.0;
  return f;
}

void FlowSpec::validate() const {
  if (d < 1 || d > 3) throw std::invalid_argument("d: must be 1, 2 or 3");
  if (static_cast<int>(M.size()) != d * d) throw std::invalid_argument("M: must be d x d");
  if (!check_repulsive(M, d)) throw std::invalid_argument("M: symmetric part is not negative semidefinite");
  if (!(beta > 0.0)) throw std::invalid_argument("beta: must be positive");
  if (std::isinf(beta) && integrator != Integrator::rk4)
    throw std::invalid_argument("integrator: beta = inf requires rk4");
  if (!std::isinf(beta) && integrator != Integrator::euler_maruyama)
    throw std::invalid_argument("integrator: finite beta requires euler_maruyama");
  if (!(dt > 0.0) || !(t_end >= 0.0)) throw std::invalid_argument("dt: must be positive with t_end >= 0");
}

bool check_repulsive(std::span<const double> M, int d) {
  if (static_cast<int>(M.size()) != d * d) throw std::invalid_argument("M: must be square");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(M.data(), d, d);
  const Eigen::MatrixXd S = 0.5 * (A + A.transpose());
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues().maxCoeff() <= 1e-12;
}

std::vector<double> Interaction::gradients(const Configuration& c) const {
  if (k_) return k_->pair_gradients(c);
  const std::size_t N = c.size();
  const int d = c.d;
  std::vector<double> E(N * d, 0.0);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < N; ++i) {
    double v[3];
    for (std::size_t j = 0; j < N; ++j) {
      if (j == i) continue;
      double r2 = 0;
      for (int a = 0; a < d; ++a) {
        v[a] = c.x[i * d + a] - c.x[j * d + a];
        r2 += v[a] * v[a];
      }
      const double r = std::sqrt(r2);
      const double gr = tr_->g_dr(r) / r;
      for (int a = 0; a < d; ++a) E[i * d + a] += gr * v[a];
    }
  }
  return E;
}

double Interaction::energy(const Configuration& c) const {
  if (k_) return k_->pair_energy(c);
  const std::size_t N = c.size();
  const int d = c.d;
  std::vector<double> row(N, 0.0);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < N; ++i) {
    double s = 0;
    for (std::size_t j = i + 1; j < N; ++j) {
      double r2 = 0;
      for (int a = 0; a < d; ++a) r2 += (c.x[i * d + a] - c.x[j * d + a]) * (c.x[i * d + a] - c.x[j * d + a]);
      s += tr_->g(std::sqrt(r2));
    }
    row[i] = s;
  }
  const double n = static_cast<double>(N);
  return std::accumulate(row.begin(), row.end(), 0.0) / (n * n);
}

std::vector<double> force(const Configuration& c, const FlowSpec& flow, const Interaction& g, double t) {
  const std::size_t N = c.size();
  const int d = c.d;
  if (flow.d != d) throw std::invalid_argument("d: flow and configuration disagree");
  std::vector<double> F(N * d, 0.0);
  if (flow.interaction && N > 1) {
    const auto E = g.gradients(c);
    const double inv = 1.0 / static_cast<double>(N);
    for (std::size_t i = 0; i < N; ++i)
      for (int a = 0; a < d; ++a) {
        double s = 0;
        for (int b = 0; b < d; ++b) s += flow.M[a * d + b] * E[i * d + b];
        F[i * d + a] = inv * s;
      }
  }
  if (!flow.V.zero()) {
    double v[3];
    for (std::size_t i = 0; i < N; ++i) {
      flow.V.eval(t, c.point(i), std::span<double>(v, d));
      for (int a = 0; a < d; ++a) F[i * d + a] -= v[a];
    }
  }
  return F;
}

StiffnessAudit stiffness_audit(const Configuration& c, const FlowSpec& flow, const PotentialSpec& spec) {
  StiffnessAudit a;
  a.min_dist = c.size() > 1 ? c.min_distance() : INFINITY;
  const double m = flow.interaction ? matrix_norm2(flow.M, flow.d) : 0.0;
  if (m == 0.0 || c.size() < 2) {
    a.dt_max = INFINITY;
    return a;
  }
  a.dt_max = flow.audit_safety * static_cast<double>(c.size()) * std::pow(a.min_dist, spec.s + 2.0) / m;
  a.ok = flow.dt <= a.dt_max;
  return a;
}

std::vector<double> uniform_save_times(double t_end, int count) {
  std::vector<double> t(count + 1);
  for (int i = 0; i <= count; ++i) t[i] = t_end * i / count;
  return t;
}

Trajectory simulate(const Configuration& x0, const FlowSpec& flow, const Interaction& g,
                    const std::vector<double>& save_times, std::uint64_t seed) {
  flow.validate();
  if (x0.d != flow.d) throw std::invalid_argument("d: flow and configuration disagree");
  if (x0.torus.has_value() != g.periodic()) throw std::invalid_argument("geometry: configuration and kernel disagree");
  if (flow.interaction) x0.check_distinct(kCollisionDistance);
  const auto audit = stiffness_audit(x0, flow, g.spec());
  if (!audit.ok)
    throw std::invalid_argument("dt: " + std::to_string(flow.dt) + " exceeds stiffness bound " +
                                std::to_string(audit.dt_max));

  const std::size_t steps = static_cast<std::size_t>(std::llround(flow.t_end / flow.dt));
  std::vector<std::size_t> save_steps{0};
  for (double t : save_times) {
    const double q = t / flow.dt;
    const auto k = static_cast<std::size_t>(std::llround(q));
    if (std::abs(q - static_cast<double>(k)) > 1e-6 || k > steps)
      throw std::invalid_argument("save_times: must lie on the dt grid within [0, t_end]");
    if (k > save_steps.back()) save_steps.push_back(k);
  }

  const std::size_t N = x0.size();
  const int d = x0.d;
  Trajectory tr;
  Configuration x = x0;
  if (x.torus)
    for (std::size_t i = 0; i < N; ++i) x.torus->wrap(x.point(i));

  auto save = [&](double t) {
    Snapshot s;
    s.t = t;
    s.x = x;
    s.min_dist = N > 1 ? x.min_distance() : INFINITY;
    s.H = flow.interaction && N > 1 ? g.energy(x) : 0.0;
    tr.snapshots.push_back(std::move(s));
  };
  auto collide = [&](std::size_t step, double t) {
    const auto [i, j] = N > 1 ? closest_pair(x) : std::pair<std::size_t, std::size_t>{0, 0};
    tr.collision = CollisionRecord{t, step, i, j, N > 1 ? x.distance(i, j) : 0.0};
  };

  save(0.0);
  std::size_t next = 1;
  const double h = flow.dt;
  const double noise = flow.deterministic() ? 0.0 : std::sqrt(2.0 * h / flow.beta);
  Configuration y = x;
  for (std::size_t n = 0; n < steps; ++n) {
    const double t = static_cast<double>(n) * h;
    try {
      if (flow.integrator == Integrator::rk4) {
        auto stage = [&](const std::vector<double>& k, double c) {
          for (std::size_t m = 0; m < x.x.size(); ++m) y.x[m] = x.x[m] + c * k[m];
        };
        const auto k1 = force(x, flow, g, t);
        stage(k1, 0.5 * h);
        const auto k2 = force(y, flow, g, t + 0.5 * h);
        stage(k2, 0.5 * h);
        const auto k3 = force(y, flow, g, t + 0.5 * h);
        stage(k3, h);
        const auto k4 = force(y, flow, g, t + h);
        for (std::size_t m = 0; m < x.x.size(); ++m) x.x[m] += h / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
      } else {
        const auto F = force(x, flow, g, t);
        for (std::size_t i = 0; i < N; ++i) {
          Philox rng(seed, static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n >> 32),
                     static_cast<std::uint32_t>(i));
          for (int a = 0; a < d; ++a) x.x[i * d + a] += h * F[i * d + a] + noise * rng.normal();
        }
      }
    } catch (const singular_evaluation&) {
      collide(n, t);
      break;
    }
    if (x.torus)
      for (std::size_t i = 0; i < N; ++i) x.torus->wrap(x.point(i));
    tr.steps = n + 1;
    if (flow.interaction && N > 1 && find_collision(x)) {
      collide(n + 1, t + h);
      break;
    }
    if (next < save_steps.size() && save_steps[next] == n + 1) {
      save(static_cast<double>(n + 1) * h);
      ++next;
    }
  }
  return tr;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  if (tr.snapshots.empty()) return;
  const auto& c0 = tr.snapshots.front().x;
  os << "t";
  for (std::size_t i = 0; i < c0.size(); ++i)
    for (int a = 0; a < c0.d; ++a) os << ",x" << i << "_" << a;
  os << ",H_N,min_dist\n";
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  for (const auto& s : tr.snapshots) {
    os << num(s.t);
    for (double v : s.x.x) os << ',' << num(v);
    os << ',' << num(s.H) << ',' << num(s.min_dist) << '\n';
  }
}

void write_trajectory_binary(std::ostream& os, const Trajectory& tr, std::uint64_t spec_hash) {
  if (tr.snapshots.empty()) return;
  const auto& c0 = tr.snapshots.front().x;
  SnapshotWriter w(os, {SnapshotKind::particles, c0.size(), static_cast<std::uint32_t>(c0.d), spec_hash, 2});
  for (const auto& s : tr.snapshots) w.write(s.t, {s.H, s.min_dist}, s.x.x);
}

}  // namespace modlab
