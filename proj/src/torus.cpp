#include "modlab/torus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace modlab {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

double TorusGeometry::volume() const { return std::pow(L, d); }

void TorusGeometry::wrap(std::span<double> x) const {
  for (double& v : x) {
    v -= L * std::floor(v / L);
    if (v >= L) v -= L;
  }
}

void TorusGeometry::min_image(std::span<double> dx) const {
  for (double& v : dx) v -= L * std::floor(v / L + 0.5);
}

double Configuration::distance(std::size_t i, std::size_t j) const {
  double r2 = 0.0;
  for (int a = 0; a < d; ++a) {
    double v = x[i * d + a] - x[j * d + a];
    if (torus) v -= torus->L * std::floor(v / torus->L + 0.5);
    r2 += v * v;
  }
  return std::sqrt(r2);
}

double Configuration::min_distance() const {
  const std::size_t n = size();
  double m = std::numeric_limits<double>::infinity();
  if (d == 1 && torus) {
    std::vector<double> s(x);
    std::sort(s.begin(), s.end());
    for (std::size_t i = 0; i + 1 < n; ++i) m = std::min(m, s[i + 1] - s[i]);
    if (n >= 2) m = std::min(m, s[0] + torus->L - s[n - 1]);
    return m;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m = std::min(m, distance(i, j));
  return m;
}

void Configuration::check_distinct(double tol) const {
  if (size() < 2) return;
  const double m = min_distance();
  if (!(m > tol)) throw collision_error("coincident points (min distance " + std::to_string(m) + ")");
}

// ---------------------------------------------------------------------------
// Philox4x32-10

std::array<std::uint32_t, 4> Philox::block(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += W0;
    k[1] += W1;
  }
  return c;
}

Philox::Philox(std::uint64_t seed, std::uint32_t c0, std::uint32_t c1, std::uint32_t c2)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, ctr_{c0, c1, c2, 0} {}

std::uint32_t Philox::next_u32() {
  if (used_ == 4) {
    buf_ = block(ctr_, key_);
    ++ctr_[3];
    used_ = 0;
  }
  return buf_[used_++];
}

double Philox::uniform() {
  const std::uint64_t hi = next_u32() >> 5, lo = next_u32() >> 6;  // 53 bits
  return (static_cast<double>((hi << 26) | lo) + 0.5) * 0x1p-53;
}

double Philox::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform(), u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(kTwoPi * u2);
  has_spare_ = true;
  return r * std::cos(kTwoPi * u2);
}

// ---------------------------------------------------------------------------
// ModeBox / TrigPoly

std::size_t ModeBox::size() const {
  std::size_t n = 1;
  for (int a = 0; a < d; ++a) n *= static_cast<std::size_t>(side());
  return n;
}

std::size_t ModeBox::index(std::span<const int> k) const {
  std::size_t idx = 0;
  for (int a = 0; a < d; ++a) idx = idx * side() + static_cast<std::size_t>(k[a] + K);
  return idx;
}

void ModeBox::mode(std::size_t idx, std::span<int> k) const {
  for (int a = d - 1; a >= 0; --a) {
    k[a] = static_cast<int>(idx % side()) - K;
    idx /= side();
  }
}

void axis_phases(std::span<const double> x, double L, int K, std::vector<cplx>& out) {
  const int d = static_cast<int>(x.size());
  const int side = 2 * K + 1;
  out.assign(static_cast<std::size_t>(d * side), cplx{});
  for (int a = 0; a < d; ++a) {
    cplx* row = out.data() + a * side + K;
    row[0] = 1.0;
    const double th = kTwoPi * x[a] / L;
    for (int k = 1; k <= K; ++k) {
      // direct evaluation keeps the error independent of k
      row[k] = std::polar(1.0, k * th);
      row[-k] = std::conj(row[k]);
    }
  }
}

TrigPoly::TrigPoly(TorusGeometry g, int K) : geo_(g), box_{g.d, K}, c_(box_.size()) {}

cplx TrigPoly::at(std::span<const int> k) const {
  for (int a = 0; a < box_.d; ++a)
    if (std::abs(k[a]) > box_.K) return {};
  return c_[box_.index(k)];
}

double TrigPoly::eval(std::span<const double> x) const {
  std::vector<cplx> ph;
  axis_phases(x, geo_.L, box_.K, ph);
  const int d = box_.d, side = box_.side();
  if (d == 1) {
    double s = 0.0;
    for (int i = 0; i < side; ++i) s += (c_[i] * ph[i]).real();
    return s;
  }
  std::vector<int> k(d);
  double s = 0.0;
  for (std::size_t i = 0; i < c_.size(); ++i) {
    box_.mode(i, k);
    cplx e = ph[k[0] + box_.K];
    for (int a = 1; a < d; ++a) e *= ph[a * side + k[a] + box_.K];
    s += (c_[i] * e).real();
  }
  return s;
}

std::vector<double> TrigPoly::eval_points(const Configuration& cfg) const {
  std::vector<double> out(cfg.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < cfg.size(); ++i) out[i] = eval(cfg.point(i));
  return out;
}

std::vector<double> TrigPoly::grid_values(int n) const {
  const int d = box_.d;
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(n);
  std::vector<double> out(total);
#pragma omp parallel for schedule(static)
  for (std::size_t g = 0; g < total; ++g) {
    double x[3] = {0, 0, 0};
    std::size_t r = g;
    for (int a = d - 1; a >= 0; --a) {
      x[a] = geo_.L * static_cast<double>(r % n) / n;
      r /= n;
    }
    out[g] = eval(std::span<const double>(x, d));
  }
  return out;
}

double TrigPoly::integral() const {
  std::vector<int> z(box_.d, 0);
  return geo_.volume() * c_[box_.index(z)].real();
}

TrigPoly TrigPoly::derivative(int axis) const {
  const double L = geo_.L;
  return multiplier([&](std::span<const int> k) { return cplx(0.0, kTwoPi * k[axis] / L); });
}

TrigPoly TrigPoly::resized(int K) const {
  TrigPoly out(geo_, K);
  std::vector<int> k(box_.d);
  for (std::size_t i = 0; i < out.c_.size(); ++i) {
    out.box_.mode(i, k);
    out.c_[i] = at(k);
  }
  return out;
}

TrigPoly TrigPoly::operator*(const TrigPoly& o) const {
  const int d = box_.d;
  TrigPoly out(geo_, box_.K + o.box_.K);
  std::vector<int> k1(d), k2(d), k(d);
  for (std::size_t i = 0; i < c_.size(); ++i) {
    if (c_[i] == cplx{}) continue;
    box_.mode(i, k1);
    for (std::size_t j = 0; j < o.c_.size(); ++j) {
      if (o.c_[j] == cplx{}) continue;
      o.box_.mode(j, k2);
      for (int a = 0; a < d; ++a) k[a] = k1[a] + k2[a];
      out.c_[out.box_.index(k)] += c_[i] * o.c_[j];
    }
  }
  return out;
}

TrigPoly TrigPoly::operator+(const TrigPoly& o) const {
  const int K = std::max(box_.K, o.box_.K);
  TrigPoly a = resized(K), b = o.resized(K);
  for (std::size_t i = 0; i < a.c_.size(); ++i) a.c_[i] += b.c_[i];
  return a;
}

TrigPoly TrigPoly::operator-(const TrigPoly& o) const { return *this + o.scaled(-1.0); }

TrigPoly TrigPoly::scaled(double s) const {
  TrigPoly out = *this;
  for (auto& v : out.c_) v *= s;
  return out;
}

TrigPoly TrigPoly::shifted(std::span<const double> shift) const {
  const double L = geo_.L;
  return multiplier([&](std::span<const int> k) {
    double ph = 0.0;
    for (int a = 0; a < box_.d; ++a) ph += k[a] * shift[a];
    return std::polar(1.0, -kTwoPi * ph / L);
  });
}

double TrigPoly::hermitian_defect() const {
  double m = 0.0;
  std::vector<int> k(box_.d), mk(box_.d);
  for (std::size_t i = 0; i < c_.size(); ++i) {
    box_.mode(i, k);
    for (int a = 0; a < box_.d; ++a) mk[a] = -k[a];
    m = std::max(m, std::abs(c_[i] - std::conj(c_[box_.index(mk)])));
  }
  return m;
}

// ---------------------------------------------------------------------------
// TorusDensity

TorusDensity TorusDensity::from_poly(TrigPoly p, int grid) {
  const auto& g = p.geometry();
  if (std::abs(p.integral() - 1.0) > 1e-12) throw std::invalid_argument("mu: total mass must be 1");
  if (p.hermitian_defect() > 1e-14 * std::max(1.0, 1.0 / g.volume()))
    throw std::invalid_argument("mu: coefficients are not Hermitian (density not real)");
  if (grid <= 0) grid = std::max(8 * (2 * p.K() + 1), g.d == 1 ? 256 : (g.d == 2 ? 64 : 24));
  const auto v = p.grid_values(grid);
  TorusDensity mu;
  mu.p = std::move(p);
  mu.linf = *std::max_element(v.begin(), v.end());
  mu.min = *std::min_element(v.begin(), v.end());
  if (mu.min < 0.0) throw std::invalid_argument("mu: density is negative on the evaluation grid");
  return mu;
}

TorusDensity TorusDensity::uniform(TorusGeometry g) {
  TrigPoly p(g, 0);
  p.coeffs()[0] = 1.0 / g.volume();
  TorusDensity mu;
  mu.p = p;
  mu.linf = mu.min = 1.0 / g.volume();
  return mu;
}

TorusDensity TorusDensity::random(TorusGeometry g, int K, double amplitude, Philox& rng) {
  TrigPoly p(g, K);
  const double a0 = 1.0 / g.volume();
  const auto& box = p.box();
  std::vector<int> k(g.d), mk(g.d);
  std::vector<double> w(box.size(), 0.0);
  double total = 0.0;
  const std::size_t half = box.size() / 2;  // index of k = 0
  for (std::size_t i = half + 1; i < box.size(); ++i) {
    w[i] = rng.uniform();
    total += 2.0 * w[i];
  }
  for (std::size_t i = half + 1; i < box.size(); ++i) {
    box.mode(i, k);
    for (int a = 0; a < g.d; ++a) mk[a] = -k[a];
    const cplx v = std::polar(amplitude * a0 * w[i] / total, kTwoPi * rng.uniform());
    p.coeffs()[i] = v;
    p.coeffs()[box.index(mk)] = std::conj(v);
  }
  p.coeffs()[half] = a0;
  return from_poly(std::move(p));
}

// ---------------------------------------------------------------------------
// Samplers

Configuration sample_iid(const TorusDensity& mu, std::size_t N, Philox& rng) {
  const auto& g = mu.geometry();
  Configuration c{g.d, std::vector<double>(N * g.d), g};
  const double bound = mu.linf * (1.0 + 1e-9) + 1e-300;
  double y[3];
  for (std::size_t i = 0; i < N; ++i) {
    for (;;) {
      for (int a = 0; a < g.d; ++a) y[a] = g.L * rng.uniform();
      if (rng.uniform() * bound <= mu.eval(std::span<const double>(y, g.d))) break;
    }
    for (int a = 0; a < g.d; ++a) c.x[i * g.d + a] = y[a];
  }
  return c;
}

Configuration jittered_lattice(TorusGeometry g, std::size_t N, double jitter, Philox& rng) {
  const auto n = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(N), 1.0 / g.d)));
  std::size_t total = 1;
  for (int a = 0; a < g.d; ++a) total *= n;
  if (total != N) throw std::invalid_argument("N: jittered lattice needs a perfect d-th power");
  const double h = g.L / static_cast<double>(n);
  Configuration c{g.d, std::vector<double>(N * g.d), g};
  for (std::size_t i = 0; i < N; ++i) {
    std::size_t r = i;
    for (int a = g.d - 1; a >= 0; --a) {
      const double base = (static_cast<double>(r % n) + 0.5) * h;
      r /= n;
      c.x[i * g.d + a] = base + jitter * h * (rng.uniform() - 0.5);
    }
    g.wrap(c.point(i));
  }
  return c;
}

Configuration two_cluster(TorusGeometry g, std::size_t N, double width, Philox& rng) {
  Configuration c{g.d, std::vector<double>(N * g.d), g};
  for (std::size_t i = 0; i < N; ++i) {
    const double centre = (i % 2 == 0 ? 0.25 : 0.75) * g.L;
    for (int a = 0; a < g.d; ++a) c.x[i * g.d + a] = centre + width * g.L * (rng.uniform() - 0.5);
    g.wrap(c.point(i));
  }
  return c;
}

}  // namespace modlab
