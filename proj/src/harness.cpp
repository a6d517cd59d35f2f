#include "modlab/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "modlab/io.hpp"

namespace modlab {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Rate fit

RateFit rate_fit(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 3) throw std::invalid_argument("pairs: need at least 3 points");
  RateFit f;
  double sx = 0, sy = 0;
  for (const auto& [N, v] : pairs) {
    if (!(N > 0.0)) throw std::invalid_argument("pairs: N must be positive");
    if (!(v > 0.0)) throw std::invalid_argument("pairs: values must be positive");
    f.N.push_back(N);
    f.value.push_back(v);
    sx += std::log(N);
    sy += std::log(v);
  }
  const double n = static_cast<double>(pairs.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < f.N.size(); ++i) {
    const double dx = std::log(f.N[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(f.value[i]) - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("pairs: N values must not all coincide");
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rr = 0;
  for (std::size_t i = 0; i < f.N.size(); ++i) {
    const double e = std::log(f.value[i]) - f.intercept - f.slope * std::log(f.N[i]);
    rr += e * e;
  }
  f.residual = std::sqrt(rr / n);
  return f;
}

// ---------------------------------------------------------------------------
// Experiments

EnergySweep energy_sweep(const PotentialSpec& spec, TorusGeometry geo, const std::vector<std::size_t>& N_list,
                         int trials, double jitter, std::uint64_t seed, double ewald_tol) {
  spec.validate();
  if (trials < 1) throw std::invalid_argument("trials: must be >= 1");
  const auto mu = TorusDensity::uniform(geo);
  EnergySweep out;
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t N : N_list) {
    EwaldOptions o;
    o.eta = std::min(geo.L / 8, 3.0 * geo.L * std::pow(static_cast<double>(N), -1.0 / geo.d));
    o.tol = ewald_tol;
    PeriodizedKernel k(spec, geo, o);
    EnergySweepPoint p;
    p.N = N;
    for (int t = 0; t < trials; ++t) {
      Philox rng(seed, 1, static_cast<std::uint32_t>(N), static_cast<std::uint32_t>(t));
      const auto ls = lower_bound_sample(jittered_lattice(geo, N, jitter, rng), mu, k);
      p.F_N.push_back(ls.F_N);
      p.log_term.push_back(ls.log_term);
      p.mean += (ls.F_N + ls.log_term) / trials;
    }
    pairs.emplace_back(static_cast<double>(N), std::abs(p.mean));
    out.points.push_back(std::move(p));
  }
  out.fit = rate_fit(pairs);
  return out;
}

CoercivitySweep coercivity_sweep(const PotentialSpec& spec, const TorusDensity& mu, const std::vector<std::size_t>& N_list,
                                 int trials, const std::vector<Sampler>& samplers, std::uint64_t seed, double r) {
  if (N_list.empty()) throw std::invalid_argument("N_list: must not be empty");
  PeriodizedKernel k(spec, mu.geometry());
  CoercivitySweep out;
  for (std::size_t N : N_list) {
    double C = 0;
    for (Sampler smp : samplers) {
      for (int t = 0; t < trials; ++t) {
        Philox rng(seed, 2, static_cast<std::uint32_t>(N), static_cast<std::uint32_t>(t) * 8 + static_cast<int>(smp));
        const auto b = coercivity_bound(sample(smp, mu, N, rng), mu, k, r);
        const double nc = b.needed_C();
        out.records.push_back({N, smp, t, b.norm, b.base, b.slope, nc});
        C = std::max(C, nc);
      }
    }
    out.N.push_back(N);
    out.C.push_back(C);
  }
  const auto [lo, hi] = std::minmax_element(out.C.begin(), out.C.end());
  out.growth = out.C.front() > 0 ? *hi / out.C.front() : INFINITY;
  out.spread = *lo > 0 ? *hi / *lo : INFINITY;
  return out;
}

GronwallExperiment gronwall_experiment(const GronwallSetup& setup, const std::vector<std::size_t>& N_list,
                                       double factor) {
  const auto& geo = setup.mu0.geometry();
  const int d = geo.d;
  if (setup.saves < 1) throw std::invalid_argument("saves: must be >= 1");
  if (!(setup.t_end > 0)) throw std::invalid_argument("t_end: must be positive");
  if (setup.seeds.empty()) throw std::invalid_argument("seeds: must not be empty");
  const double h = setup.t_end / setup.saves;
  const auto times = uniform_save_times(setup.t_end, setup.saves);
  GronwallExperiment out;
  for (std::size_t N : N_list) {
    Philox rng(setup.seeds.front(), 3, static_cast<std::uint32_t>(N));
    auto x0 = quantile_lattice(setup.mu0, N, setup.jitter, rng);
    x0.torus = geo;
    EwaldOptions o;
    o.eta = std::min(geo.L / 8, 16.0 * geo.L * std::pow(static_cast<double>(N), -1.0 / d));
    o.tol = setup.ewald_tol;
    PeriodizedKernel k(setup.spec, geo, o);

    FlowSpec f = setup.flow;
    f.t_end = setup.t_end;
    const double cap = std::min(f.dt, stiffness_audit(x0, f, setup.spec).dt_max);
    f.dt = h / std::ceil(h / cap * (1 - 1e-12));

    const auto s0 = DensityState::from_density(setup.mu0, setup.grid);
    MeanFieldSolver solver(setup.spec, f, geo, setup.grid);
    const double pde_dt = h / std::ceil(h / (0.5 * solver.stable_dt(s0)));

    const auto run = run_coupled(x0, s0, f, k, pde_dt, times, setup.seeds);
    out.reports.push_back(gronwall_check(run, k, f, setup.spec.a));
    out.particle_dt.push_back(f.dt);
    out.pde_dt.push_back(pde_dt);
  }
  out.sweep = gronwall_sweep(out.reports, factor);
  return out;
}

// ---------------------------------------------------------------------------
// Config schema

namespace {

json zeta_default() { return {{"kind", "exact"}, {"scale", 1.0}, {"knots", json::array()}, {"values", json::array()}, {"C_zeta", 1.0}}; }
json field_default() { return {{"kind", "none"}, {"axis", 0}, {"amp", 0.0}, {"omega", 0.0}, {"vec", json::array()}}; }
json mode_default() { return {{"mode", 1}, {"eps", 0.3}}; }
json samplers_default() { return json::array({"iid", "lattice", "cluster"}); }

const std::map<std::string, json>& schemas() {
  static const std::map<std::string, json> m = [] {
    std::map<std::string, json> s;
    s["kernel-table"] = {{"profile", "bessel"}, {"eta", 0.1}, {"r_min", 0.01}, {"r_max", 2.0}, {"points", 40}};
    s["energy-sweep"] = {{"N_list", {64, 256, 1024, 4096}}, {"trials", 4},       {"jitter", 0.25},
                         {"ewald_tol", 1e-10},              {"check_slope", true}, {"slope_tol", 0.1}};
    s["coercivity"] = {{"N_list", {64, 256, 1024}}, {"trials", 10},       {"samplers", samplers_default()},
                       {"mu_band", 2},              {"mu_amplitude", 0.6}, {"r", 0.0},
                       {"factor", 1.5}};
    s["commutator-sweep"] = {{"N_list", {128, 256, 512, 1024}}, {"trials", 10},        {"samplers", samplers_default()},
                             {"mu_band", 2},                    {"mu_amplitude", 0.6}, {"v_band", 2},
                             {"ewald_tol", 1e-10},              {"max_growth", 0.15}};
    s["kp-verify"] = {{"alpha", 2.0}, {"bands", {8, 16}}, {"trials", 200}, {"eps_plus", 0.1}, {"max_growth", 0.1}};
    s["cs-verify"] = {{"s_list", {0.5, 1.0, 1.5}}, {"n", 32}, {"band", 5}, {"rtol_d2n", 1e-3}, {"rtol_energy", 1e-4}};
    s["dynamics"] = {{"N", 16},           {"jitter", 0.25},       {"torus", true},      {"M", json::array()},
                     {"V", field_default()}, {"beta", "inf"},     {"integrator", "auto"}, {"dt", 1e-4},
                     {"t_end", 0.01},     {"saves", 10},          {"audit_safety", 0.1}, {"eta", 0.0},
                     {"ewald_tol", 1e-10}, {"format", "csv"}};
    s["meanfield"] = {{"n", 64},      {"mu0", mode_default()}, {"M", json::array()}, {"V", field_default()},
                      {"beta", "inf"}, {"dt", 0.0},            {"t_end", 0.01},      {"saves", 10}};
    s["gronwall"] = {{"N_list", {128, 512, 2048}}, {"seeds", {0}},          {"mu0", mode_default()},
                     {"M", json::array()},         {"V", field_default()},  {"beta", "inf"},
                     {"integrator", "auto"},       {"dt", 1.0},             {"t_end", 1e-3},
                     {"saves", 4},                 {"grid", 64},            {"jitter", 0.0},
                     {"audit_safety", 0.1},        {"ewald_tol", 1e-10},    {"factor", 1.5}};
    s["rate-fit"] = {{"pairs", json::array()}, {"check", false}, {"expect_slope", -0.5}, {"tol", 0.02}};
    const json common = {{"seed", 0}, {"output", ""}, {"d", 1}, {"s", 0.5}, {"a", 1.8}, {"L", 1.0}, {"zeta", zeta_default()}};
    for (auto& [name, j] : s)
      for (auto& [k, v] : common.items()) j[k] = v;
    return s;
  }();
  return m;
}

bool same_kind(const json& def, const json& v) {
  if (def.is_number()) return v.is_number();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  if (def.is_object()) return v.is_object();
  return false;
}

json merge(const json& def, const json& in, const std::string& prefix) {
  json out = def;
  for (auto& [k, v] : in.items()) {
    const std::string name = prefix + k;
    if (!def.contains(k)) throw schema_error(name, "unknown field");
    const json& d = def[k];
    if (k == "beta" && (v.is_number() || v == "inf")) {
      out[k] = v;
    } else if (!same_kind(d, v)) {
      throw schema_error(name, "expected " + std::string(d.type_name()) + ", got " + v.type_name());
    } else if (d.is_object()) {
      out[k] = merge(d, v, name + ".");
    } else {
      out[k] = v;
    }
  }
  return out;
}

template <class T>
T get(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw schema_error(key, e.what());
  }
}

PotentialSpec spec_from(const json& j) {
  PotentialSpec p;
  p.d = get<int>(j, "d");
  p.s = get<double>(j, "s");
  p.a = get<double>(j, "a");
  const auto& z = j["zeta"];
  const auto kind = get<std::string>(z, "kind");
  if (kind == "exact") p.zeta.kind = Weight::Kind::exact;
  else if (kind == "scaled") p.zeta.kind = Weight::Kind::scaled;
  else if (kind == "tabulated") p.zeta.kind = Weight::Kind::tabulated;
  else throw schema_error("zeta.kind", "expected exact, scaled or tabulated");
  p.zeta.scale = get<double>(z, "scale");
  p.zeta.knots = get<std::vector<double>>(z, "knots");
  p.zeta.values = get<std::vector<double>>(z, "values");
  p.zeta.C_zeta = get<double>(z, "C_zeta");
  return p;
}

TorusGeometry geo_from(const json& j) {
  const double L = get<double>(j, "L");
  if (!(L > 0)) throw schema_error("L", "must be positive");
  return TorusGeometry{get<int>(j, "d"), L};
}

Sampler sampler_from(const std::string& s) {
  if (s == "iid") return Sampler::iid;
  if (s == "lattice") return Sampler::lattice;
  if (s == "cluster") return Sampler::cluster;
  throw schema_error("samplers", "unknown sampler " + s);
}

std::vector<Sampler> samplers_from(const json& j) {
  std::vector<Sampler> out;
  for (const auto& s : get<std::vector<std::string>>(j, "samplers")) out.push_back(sampler_from(s));
  if (out.empty()) throw schema_error("samplers", "must not be empty");
  return out;
}

ExternalField field_from(const json& j, int d, double L) {
  const auto& v = j["V"];
  const auto kind = get<std::string>(v, "kind");
  if (kind == "none") return ExternalField::none();
  if (kind == "constant") {
    auto c = get<std::vector<double>>(v, "vec");
    if (static_cast<int>(c.size()) != d) throw schema_error("V.vec", "must have d components");
    return ExternalField::constant(c);
  }
  if (kind == "sine") {
    const int axis = get<int>(v, "axis");
    if (axis < 0 || axis >= d) throw schema_error("V.axis", "must lie in [0, d)");
    return ExternalField::sine(d, axis, get<double>(v, "amp"), L, get<double>(v, "omega"));
  }
  throw schema_error("V.kind", "expected none, constant or sine");
}

FlowSpec flow_from(const json& j, int d, double L) {
  FlowSpec f = FlowSpec::gradient(d);
  auto M = get<std::vector<double>>(j, "M");
  if (!M.empty()) f.M = M;
  f.V = field_from(j, d, L);
  const auto& b = j["beta"];
  f.beta = b.is_string() ? std::numeric_limits<double>::infinity() : b.get<double>();
  const std::string integ = j.contains("integrator") ? get<std::string>(j, "integrator") : "auto";
  if (integ == "auto") f.integrator = f.deterministic() ? Integrator::rk4 : Integrator::euler_maruyama;
  else if (integ == "rk4") f.integrator = Integrator::rk4;
  else if (integ == "euler_maruyama") f.integrator = Integrator::euler_maruyama;
  else throw schema_error("integrator", "expected auto, rk4 or euler_maruyama");
  if (j.contains("audit_safety")) f.audit_safety = get<double>(j, "audit_safety");
  f.t_end = get<double>(j, "t_end");
  const double dt = get<double>(j, "dt");
  f.dt = dt > 0 ? dt : 1.0;
  return f;
}

std::vector<std::size_t> sizes_from(const json& j, const std::string& key) {
  auto v = get<std::vector<std::size_t>>(j, key);
  if (v.empty()) throw schema_error(key, "must not be empty");
  for (auto n : v)
    if (n == 0) throw schema_error(key, "entries must be positive");
  return v;
}

// Field name from "field: message" diagnostics of the library validators.
schema_error as_schema(const std::invalid_argument& e) {
  const std::string w = e.what();
  const auto p = w.find(':');
  if (p == std::string::npos) return schema_error("config", w);
  return schema_error(w.substr(0, p), w.substr(p + 2 <= w.size() ? p + 2 : p + 1));
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint32_t experiment_id(const std::string& command) {
  const auto& c = commands();
  return static_cast<std::uint32_t>(std::find(c.begin(), c.end(), command) - c.begin()) + 16;
}

}  // namespace

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c = {"kernel-table", "energy-sweep", "coercivity", "commutator-sweep", "kp-verify",
                                             "cs-verify",    "dynamics",     "meanfield",  "gronwall",         "rate-fit"};
  return c;
}

ExperimentConfig parse_config(const json& in) {
  if (!in.is_object()) throw schema_error("config", "top level must be an object");
  if (!in.contains("command")) throw schema_error("command", "missing");
  if (!in["command"].is_string()) throw schema_error("command", "expected string");
  const auto command = in["command"].get<std::string>();
  const auto it = schemas().find(command);
  if (it == schemas().end()) throw schema_error("command", "unknown command " + command);
  json body = in;
  body.erase("command");
  ExperimentConfig cfg{command, merge(it->second, body, "")};
  cfg.resolved["command"] = command;
  if (cfg.resolved["output"] == "") cfg.resolved["output"] = command;
  const auto& sd = cfg.resolved["seed"];
  if (!sd.is_number_unsigned() && !(sd.is_number_integer() && sd.get<std::int64_t>() >= 0))
    throw schema_error("seed", "expected unsigned integer");
  cfg.resolved["seed"] = sd.get<std::uint64_t>();

  // Semantic checks that need built objects.
  try {
    const auto& j = cfg.resolved;
    const auto spec = spec_from(j);
    spec.validate();
    geo_from(j);
    if (j.contains("V")) flow_from(j, spec.d, get<double>(j, "L")).validate();
  } catch (const schema_error&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw as_schema(e);
  }
  return cfg;
}

std::string csv_with_header(const ExperimentConfig& cfg, const std::string& body) {
  std::ostringstream os;
  os << "# riesz-modlab " << cfg.command << "\n";
  os << "# config: " << cfg.resolved.dump() << "\n";
  os << "# content_hash: fnv1a64:" << hex64(fnv1a64(body)) << "\n";
  os << body;
  return os.str();
}

namespace {

struct Output {
  const ExperimentConfig& cfg;
  RunResult res;
  json summary = json::object();
  void csv(const std::string& body, const std::string& suffix = "") {
    res.artifacts.push_back({cfg.resolved["output"].get<std::string>() + suffix + ".csv", csv_with_header(cfg, body)});
  }
  void finish() {
    json j;
    j["config"] = cfg.resolved;
    j["summary"] = summary;
    j["status"] = res.status;
    if (!res.message.empty()) j["message"] = res.message;
    json hashes = json::object();
    for (const auto& a : res.artifacts) hashes[a.filename] = "fnv1a64:" + hex64(fnv1a64(a.content));
    j["artifacts"] = hashes;
    res.artifacts.push_back({cfg.resolved["output"].get<std::string>() + ".json", j.dump(2) + "\n"});
  }
  void fail(const std::string& msg) {
    res.status = 2;
    res.message = msg;
  }
};

void kernel_table(Output& o) {
  const auto& j = o.cfg.resolved;
  auto spec = spec_from(j);
  Truncation tr(spec, profile_from_string(get<std::string>(j, "profile")));
  const double eta = get<double>(j, "eta"), r0 = get<double>(j, "r_min"), r1 = get<double>(j, "r_max");
  const int n = get<int>(j, "points");
  if (!(r0 > 0 && r1 > r0)) throw schema_error("r_min", "need 0 < r_min < r_max");
  if (n < 2) throw schema_error("points", "must be >= 2");
  if (!(eta > 0)) throw schema_error("eta", "must be positive");
  std::string body = "r,g,g_eta,f_eta\n";
  for (int i = 0; i < n; ++i) {
    const double r = r0 * std::pow(r1 / r0, static_cast<double>(i) / (n - 1));
    body += num(r) + "," + num(tr.g(r)) + "," + num(tr.g_eta(r, eta)) + "," + num(tr.f_eta(r, eta)) + "\n";
  }
  o.csv(body);
}

void energy_sweep_cmd(Output& o, std::uint64_t seed) {
  const auto& j = o.cfg.resolved;
  const auto spec = spec_from(j);
  const auto sweep = energy_sweep(spec, geo_from(j), sizes_from(j, "N_list"), get<int>(j, "trials"),
                                  get<double>(j, "jitter"), seed, get<double>(j, "ewald_tol"));
  std::string body = "N,trial,seed,F_N,log_term,value\n";
  for (const auto& p : sweep.points)
    for (std::size_t t = 0; t < p.F_N.size(); ++t)
      body += std::to_string(p.N) + "," + std::to_string(t) + "," + std::to_string(seed) + "," + num(p.F_N[t]) + "," +
              num(p.log_term[t]) + "," + num(p.F_N[t] + p.log_term[t]) + "\n";
  o.csv(body);
  const double expected = spec.s / spec.d - 1.0;
  o.summary = {{"slope", sweep.fit.slope}, {"intercept", sweep.fit.intercept}, {"residual", sweep.fit.residual},
               {"expected_slope", expected}};
  if (get<bool>(j, "check_slope") && std::abs(sweep.fit.slope - expected) > get<double>(j, "slope_tol"))
    o.fail("slope " + num(sweep.fit.slope) + " differs from " + num(expected));
}

void coercivity_cmd(Output& o, std::uint64_t seed) {
  const auto& j = o.cfg.resolved;
  const auto spec = spec_from(j);
  Philox rng(seed, experiment_id("coercivity"), 0xffffffffu);
  const auto mu = TorusDensity::random(geo_from(j), get<int>(j, "mu_band"), get<double>(j, "mu_amplitude"), rng);
  double r = get<double>(j, "r");
  if (r <= 0) r = spec.a;
  const auto sw = coercivity_sweep(spec, mu, sizes_from(j, "N_list"), get<int>(j, "trials"), samplers_from(j), seed, r);
  std::string body = "N,sampler,trial,seed,norm,base,slope,needed_C\n";
  for (const auto& x : sw.records)
    body += std::to_string(x.N) + "," + to_string(x.sampler) + "," + std::to_string(x.trial) + "," +
            std::to_string(seed) + "," + num(x.norm) + "," + num(x.base) + "," + num(x.slope) + "," + num(x.needed_C) +
            "\n";
  o.csv(body);
  o.summary = {{"N", sw.N}, {"C", sw.C}, {"growth", sw.growth}, {"spread", sw.spread}};
  if (sw.growth > get<double>(j, "factor")) o.fail("calibrated constant grows by " + num(sw.growth));
}

void commutator_cmd(Output& o, std::uint64_t seed) {
  const auto& j = o.cfg.resolved;
  FIOptions opt;
  opt.mu_band = get<int>(j, "mu_band");
  opt.mu_amplitude = get<double>(j, "mu_amplitude");
  opt.v_band = get<int>(j, "v_band");
  opt.ewald_tol = get<double>(j, "ewald_tol");
  opt.samplers = samplers_from(j);
  const auto r = fi_ratio_experiment(get<int>(j, "trials"), sizes_from(j, "N_list"), spec_from(j), seed, opt);
  std::string body = "seed,N,d,s,a,sampler,trial,lhs,norm,rhs_core,ratio\n";
  for (const auto& x : r.records)
    body += std::to_string(x.seed) + "," + std::to_string(x.N) + "," + std::to_string(x.d) + "," + num(x.s) + "," +
            num(x.a) + "," + to_string(x.sampler) + "," + std::to_string(x.trial) + "," + num(x.lhs) + "," +
            num(x.norm) + "," + num(x.rhs_core) + "," + num(x.ratio) + "\n";
  o.csv(body);
  double growth = 0;
  for (std::size_t i = 1; i < r.sup_ratio.size(); ++i) growth = std::max(growth, r.sup_ratio[i] / r.sup_ratio[i - 1] - 1);
  o.summary = {{"N", r.N}, {"sup_ratio", r.sup_ratio}, {"offset_C", r.offset_C}, {"max_growth", growth}};
  if (growth > get<double>(j, "max_growth")) o.fail("sup ratio grows by " + num(growth) + " under doubling");
}

void kp_cmd(Output& o, std::uint64_t seed) {
  const auto& j = o.cfg.resolved;
  const auto bands = get<std::vector<int>>(j, "bands");
  if (bands.empty()) throw schema_error("bands", "must not be empty");
  std::string body = "seed,band,trial,lhs,A,norm2,ratio\n";
  std::vector<double> sup;
  for (int b : bands) {
    const auto r = kp_ratio_experiment(get<int>(j, "trials"), get<double>(j, "alpha"), b, seed, get<int>(j, "d"),
                                       get<double>(j, "eps_plus"));
    for (const auto& x : r.records)
      body += std::to_string(x.seed) + "," + std::to_string(x.band) + "," + std::to_string(x.trial) + "," + num(x.lhs) +
              "," + num(x.A) + "," + num(x.norm2) + "," + num(x.ratio) + "\n";
    sup.push_back(r.max_ratio);
  }
  o.csv(body);
  double growth = 0;
  for (std::size_t i = 1; i < sup.size(); ++i) growth = std::max(growth, sup[i] / sup[i - 1] - 1);
  o.summary = {{"bands", bands}, {"sup_ratio", sup}, {"max_growth", growth}};
  if (growth >= get<double>(j, "max_growth")) o.fail("sup ratio grows by " + num(growth));
}

void cs_cmd(Output& o, std::uint64_t seed) {
  const auto& j = o.cfg.resolved;
  Philox rng(seed, experiment_id("cs-verify"));
  const auto f = random_band_limited(geo_from(j), get<int>(j, "band"), get<int>(j, "n"), rng, false);
  std::string body = "s,d2n,d2n_expected,d2n_rel_err,energy,energy_expected,energy_rel_err\n";
  double worst_d = 0, worst_e = 0;
  for (double s : get<std::vector<double>>(j, "s_list")) {
    if (!(s > 0 && s < 2)) throw schema_error("s_list", "entries must lie in (0, 2)");
    const auto lim = cs_dirichlet_to_neumann(f, s);
    const auto ref = apply_multiplier(f, bracket(s));
    double num_ = 0, den = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      num_ += lim.values[i] * ref.values[i];
      den += ref.values[i] * ref.values[i];
    }
    const double c = num_ / den, ce = d2n_constant(s);
    const double E = cs_energy(f, s), Ee = cs_energy_constant(s) * std::pow(sobolev_norm(f, 0.5 * s), 2);
    const double rd = std::abs(c - ce) / std::abs(ce), re = std::abs(E - Ee) / std::abs(Ee);
    worst_d = std::max(worst_d, rd);
    worst_e = std::max(worst_e, re);
    body += num(s) + "," + num(c) + "," + num(ce) + "," + num(rd) + "," + num(E) + "," + num(Ee) + "," + num(re) + "\n";
  }
  o.csv(body);
  o.summary = {{"max_d2n_rel_err", worst_d}, {"max_energy_rel_err", worst_e}};
  if (worst_d > get<double>(j, "rtol_d2n") || worst_e > get<double>(j, "rtol_energy"))
    o.fail("extension constants outside tolerance");
}

void dynamics_cmd(Output& o, std::uint64_t seed) {
  const auto& j = o.cfg.resolved;
  const auto spec = spec_from(j);
  const auto geo = geo_from(j);
  auto flow = flow_from(j, spec.d, geo.L);
  Philox rng(seed, experiment_id("dynamics"));
  auto x0 = jittered_lattice(geo, get<std::size_t>(j, "N"), get<double>(j, "jitter"), rng);
  const bool torus = get<bool>(j, "torus");
  if (!torus) x0.torus.reset();
  const auto times = uniform_save_times(flow.t_end, get<int>(j, "saves"));
  Trajectory tr;
  if (torus) {
    EwaldOptions eo;
    eo.eta = get<double>(j, "eta");
    eo.tol = get<double>(j, "ewald_tol");
    PeriodizedKernel k(spec, geo, eo);
    tr = simulate(x0, flow, Interaction(k), times, seed);
  } else {
    Truncation t(spec);
    tr = simulate(x0, flow, Interaction(t), times, seed);
  }
  const auto format = get<std::string>(j, "format");
  if (format == "binary") {
    std::ostringstream os;
    write_trajectory_binary(os, tr, fnv1a64(j.dump()));
    o.res.artifacts.push_back({j["output"].get<std::string>() + ".bin", os.str()});
  } else if (format == "csv") {
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    o.csv(os.str());
  } else {
    throw schema_error("format", "expected csv or binary");
  }
  o.summary = {{"steps", tr.steps}, {"snapshots", tr.snapshots.size()}};
  if (tr.aborted()) {
    const auto& c = *tr.collision;
    o.summary["collision"] = {{"t", c.t}, {"step", c.step}, {"i", c.i}, {"j", c.j}, {"distance", c.distance}};
    o.res.status = 3;
    o.res.message = "collision between particles " + std::to_string(c.i) + " and " + std::to_string(c.j);
  }
}

void meanfield_cmd(Output& o) {
  const auto& j = o.cfg.resolved;
  const auto spec = spec_from(j);
  const auto geo = geo_from(j);
  auto flow = flow_from(j, spec.d, geo.L);
  const int n = get<int>(j, "n");
  const auto mu0 = axis_mode_density(geo, get<int>(j["mu0"], "mode"), get<double>(j["mu0"], "eps"));
  const auto s0 = DensityState::from_density(mu0, n);
  MeanFieldSolver solver(spec, flow, geo, n);
  const int saves = get<int>(j, "saves");
  const auto times = uniform_save_times(flow.t_end, saves);
  double dt = get<double>(j, "dt");
  const double h = flow.t_end / saves;
  if (dt <= 0) dt = 0.5 * solver.stable_dt(s0);
  dt = h / std::ceil(h / dt * (1 - 1e-12));
  std::vector<double> all{0.0};
  for (double t : times)
    if (t > all.back()) all.push_back(t);
  const auto states = solver.solve(s0, dt, all);
  const auto norms = transport_norms(states, spec.a, solver);
  std::vector<double> ts;
  for (const auto& s : states) ts.push_back(s.t);
  const auto Nu = cumulative_regularity(ts, norms);
  std::string body = "t,mass,linf,min,transport_norm,N_u\n";
  for (std::size_t i = 0; i < states.size(); ++i)
    body += num(states[i].t) + "," + num(states[i].mass) + "," + num(states[i].linf) + "," + num(states[i].min) + "," +
            num(norms[i]) + "," + num(Nu[i]) + "\n";
  o.csv(body);
  o.summary = {{"dt", dt}, {"N_u", Nu.back()}, {"linf_monotone", linfty_monotonicity_check(states)}};
}

void gronwall_cmd(Output& o) {
  const auto& j = o.cfg.resolved;
  GronwallSetup st;
  st.spec = spec_from(j);
  const auto geo = geo_from(j);
  st.flow = flow_from(j, st.spec.d, geo.L);
  st.mu0 = axis_mode_density(geo, get<int>(j["mu0"], "mode"), get<double>(j["mu0"], "eps"));
  st.grid = get<int>(j, "grid");
  st.jitter = get<double>(j, "jitter");
  st.t_end = st.flow.t_end;
  st.saves = get<int>(j, "saves");
  st.seeds = get<std::vector<std::uint64_t>>(j, "seeds");
  st.ewald_tol = get<double>(j, "ewald_tol");
  const auto ex = gronwall_experiment(st, sizes_from(j, "N_list"), get<double>(j, "factor"));
  std::string body = "N,t,F_N,log_term,additive,ito,N_u,lhs,rhs\n";
  for (const auto& r : ex.reports)
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
      const auto& s = r.samples[i];
      body += std::to_string(r.N) + "," + num(s.t) + "," + num(s.F_N) + "," + num(s.log_term) + "," + num(s.additive) +
              "," + num(s.ito) + "," + num(s.N_u) + "," + num(r.lhs(i, r.C)) + "," + num(r.rhs(i, r.C)) + "\n";
    }
  o.csv(body);
  o.summary = {{"N", ex.sweep.N},   {"C", ex.sweep.C}, {"spread", ex.sweep.spread}, {"stable", ex.sweep.stable},
               {"particle_dt", ex.particle_dt}, {"pde_dt", ex.pde_dt}};
  if (!ex.sweep.stable) o.fail("fitted constants spread by " + num(ex.sweep.spread));
}

void rate_fit_cmd(Output& o) {
  const auto& j = o.cfg.resolved;
  std::vector<std::pair<double, double>> pairs;
  for (const auto& p : j["pairs"]) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw schema_error("pairs", "entries must be [N, value]");
    pairs.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  RateFit f;
  try {
    f = rate_fit(pairs);
  } catch (const std::invalid_argument& e) {
    throw as_schema(e);
  }
  std::string body = "N,value,fitted\n";
  for (std::size_t i = 0; i < f.N.size(); ++i)
    body += num(f.N[i]) + "," + num(f.value[i]) + "," + num(std::exp(f.intercept) * std::pow(f.N[i], f.slope)) + "\n";
  o.csv(body);
  o.summary = {{"slope", f.slope}, {"intercept", f.intercept}, {"residual", f.residual}};
  if (get<bool>(j, "check") && std::abs(f.slope - get<double>(j, "expect_slope")) > get<double>(j, "tol"))
    o.fail("slope " + num(f.slope) + " outside tolerance");
}

}  // namespace

RunResult run(const ExperimentConfig& cfg) {
  Output o{cfg, {}};
  const auto seed = cfg.resolved["seed"].get<std::uint64_t>();
  const auto& c = cfg.command;
  try {
    if (c == "kernel-table") kernel_table(o);
    else if (c == "energy-sweep") energy_sweep_cmd(o, seed);
    else if (c == "coercivity") coercivity_cmd(o, seed);
    else if (c == "commutator-sweep") commutator_cmd(o, seed);
    else if (c == "kp-verify") kp_cmd(o, seed);
    else if (c == "cs-verify") cs_cmd(o, seed);
    else if (c == "dynamics") dynamics_cmd(o, seed);
    else if (c == "meanfield") meanfield_cmd(o);
    else if (c == "gronwall") gronwall_cmd(o);
    else if (c == "rate-fit") rate_fit_cmd(o);
  } catch (const schema_error&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw as_schema(e);
  } catch (const std::exception& e) {
    // numerical_abort, collisions, resolution and aliasing guards
    o.res.status = 3;
    o.res.message = e.what();
    o.res.artifacts.clear();
  }
  o.finish();
  return o.res;
}

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"riesz-modlab: modulated-energy experiments"};
  std::string config_path, out_dir = ".";
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--config", config_path, "JSON experiment config")->required();
  app.add_option("--out", out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "overrides the config seed");
  auto* thr_opt = app.add_option("--threads", threads, "OpenMP threads")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (thr_opt->count() > 0) {
    omp_set_num_threads(threads);
  } else if (const char* env = std::getenv("RIESZ_MODLAB_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }

  try {
    std::ifstream in(config_path);
    if (!in) throw schema_error("config", "cannot open " + config_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw schema_error("config", e.what());
    }
    if (seed_opt->count() > 0 && j.is_object()) j["seed"] = seed;
    const auto cfg = parse_config(j);
    const auto res = run(cfg);
    std::filesystem::create_directories(out_dir);
    for (const auto& a : res.artifacts) {
      std::ofstream os(std::filesystem::path(out_dir) / a.filename, std::ios::binary);
      os << a.content;
    }
    if (!res.message.empty()) std::cerr << cfg.command << ": " << res.message << "\n";
    return res.status;
  } catch (const schema_error& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace modlab
