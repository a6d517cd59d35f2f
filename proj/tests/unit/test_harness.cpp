#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "modlab/harness.hpp"
#include "modlab/io.hpp"

using namespace modlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  auto p = fs::temp_directory_path() / "modlab_harness_test";
  fs::create_directories(p);
  return p;
}

int cli(const json& cfg, const std::string& out, std::vector<std::string> extra = {}) {
  const auto path = scratch() / "cfg.json";
  std::ofstream(path) << cfg.dump();
  std::vector<std::string> args{"riesz-modlab", "--config", path.string(), "--out", out};
  args.insert(args.end(), extra.begin(), extra.end());
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string field_of(const json& j) {
  try {
    parse_config(j);
  } catch (const schema_error& e) {
    return e.field;
  }
  return "";
}

}  // namespace

TEST_CASE("rate fit") {
  std::vector<std::pair<double, double>> exact;
  for (double N : {16.0, 64.0, 256.0, 1024.0}) exact.emplace_back(N, std::pow(N, -0.5));
  auto f = rate_fit(exact);
  CHECK(std::abs(f.slope + 0.5) < 1e-12);
  CHECK(std::abs(f.intercept) < 1e-12);

  Philox rng(11, 0);
  std::vector<std::pair<double, double>> noisy;
  for (double N = 32; N <= 32768; N *= 2) noisy.emplace_back(N, 3.0 * std::pow(N, -0.5) * (1 + 0.01 * rng.normal()));
  CHECK(std::abs(rate_fit(noisy).slope + 0.5) < 0.02);

  CHECK_THROWS_AS(rate_fit({{1, 1}, {2, 2}}), std::invalid_argument);
  CHECK_THROWS_AS(rate_fit({{1, 1}, {2, 0}, {4, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(rate_fit({{1, 1}, {2, -3}, {4, 1}}), std::invalid_argument);
}

TEST_CASE("lattice energy sweep follows N^{s/d-1}") {
  PotentialSpec sp;
  sp.d = 1;
  sp.s = 0.5;
  sp.a = 1.8;
  auto sw = energy_sweep(sp, TorusGeometry{1, 1.0}, {64, 256, 1024}, 3, 0.25, 5);
  CHECK(std::abs(sw.fit.slope + 0.5) < 0.1);
  for (const auto& p : sw.points) CHECK(p.mean < 0.0);
}

TEST_CASE("config schema") {
  auto cfg = parse_config(json{{"command", "kernel-table"}});
  CHECK(cfg.resolved["eta"] == 0.1);
  CHECK(cfg.resolved["output"] == "kernel-table");
  CHECK(cfg.resolved["zeta"]["kind"] == "exact");

  CHECK(field_of({{"command", "kernel-table"}, {"s", 1.5}}) == "s");
  CHECK(field_of({{"command", "kernel-table"}, {"etaa", 0.1}}) == "etaa");
  CHECK(field_of({{"command", "kernel-table"}, {"zeta", {{"kindd", "exact"}}}}) == "zeta.kindd");
  CHECK(field_of({{"command", "kernel-table"}, {"eta", "big"}}) == "eta");
  CHECK(field_of({{"command", "nope"}}) == "command");
  CHECK(field_of({{"s", 0.5}}) == "command");
  CHECK(field_of({{"command", "dynamics"}, {"M", {1.0}}}) == "M");
  CHECK(field_of({{"command", "dynamics"}, {"beta", 2.0}, {"integrator", "rk4"}}) == "integrator");
  CHECK(field_of({{"command", "gronwall"}, {"beta", 2.0}}) == "");
  CHECK(field_of({{"command", "kernel-table"}, {"seed", -1}}) == "seed");
}

TEST_CASE("kernel table output") {
  auto cfg = parse_config(json{{"command", "kernel-table"}, {"points", 6}});
  auto r = run(cfg);
  CHECK(r.status == 0);
  REQUIRE(r.artifacts.size() == 2);
  const auto& csv = r.artifacts[0].content;
  std::istringstream in(csv);
  std::string l1, l2, l3, head;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  std::getline(in, head);
  CHECK(l1 == "# riesz-modlab kernel-table");
  CHECK(l2.rfind("# config: {", 0) == 0);
  CHECK(head == "r,g,g_eta,f_eta");
  const auto body = csv.substr(csv.find("r,g,"));
  CHECK(l3 == "# content_hash: fnv1a64:" + hex64(fnv1a64(body)));
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    double r_, g, ge, fe;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &r_, &g, &ge, &fe) == 4);
    CHECK(std::abs(g - ge - fe) <= 1e-10 * std::abs(g));
    ++rows;
  }
  CHECK(rows == 6);
  CHECK(run(cfg).artifacts[0].content == csv);
}

TEST_CASE("stochastic dynamics output is thread-count independent") {
  json j{{"command", "dynamics"}, {"N", 27}, {"d", 3}, {"s", 1.0}, {"a", 4.0}, {"beta", 20.0},
         {"t_end", 0.002}, {"dt", 1e-4},   {"saves", 2}};
  auto cfg = parse_config(j);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  auto a = run(cfg);
  omp_set_num_threads(3);
  auto b = run(cfg);
  omp_set_num_threads(saved);
  REQUIRE(a.status == 0);
  CHECK(a.artifacts[0].content == b.artifacts[0].content);
  CHECK(a.artifacts[1].content == b.artifacts[1].content);
  j["seed"] = 1;
  CHECK(run(parse_config(j)).artifacts[0].content != a.artifacts[0].content);
}

TEST_CASE("command line exit codes and reruns") {
  const auto dir = scratch();
  const json table{{"command", "kernel-table"}, {"points", 4}};
  CHECK(cli(table, (dir / "a").string()) == 0);
  CHECK(cli(table, (dir / "b").string(), {"--threads", "2"}) == 0);
  CHECK(slurp(dir / "a" / "kernel-table.csv") == slurp(dir / "b" / "kernel-table.csv"));
  CHECK(slurp(dir / "a" / "kernel-table.json") == slurp(dir / "b" / "kernel-table.json"));

  CHECK(cli({{"command", "kernel-table"}, {"s", 1.0}}, (dir / "c").string()) == 1);
  CHECK(cli({{"command", "kernel-table"}, {"bogus", 1}}, (dir / "c").string()) == 1);

  const json fit{{"command", "rate-fit"},
                 {"pairs", {{1, 1.0}, {4, 0.5}, {16, 0.25}}},
                 {"check", true},
                 {"expect_slope", -0.5},
                 {"tol", 1e-9}};
  CHECK(cli(fit, (dir / "d").string()) == 0);
  auto off = fit;
  off["expect_slope"] = -1.0;
  CHECK(cli(off, (dir / "d").string()) == 2);

  const json blowup{{"command", "meanfield"}, {"n", 32}, {"t_end", 0.1}, {"saves", 1}, {"dt", 0.1},
                    {"V", {{"kind", "sine"}, {"amp", 50.0}}}};
  CHECK(cli(blowup, (dir / "e").string()) == 3);

  // --seed overrides the config value and lands in the header
  const json dyn{{"command", "dynamics"}, {"N", 4}, {"beta", 10.0}, {"t_end", 0.001}, {"dt", 1e-4}, {"saves", 1}};
  CHECK(cli(dyn, (dir / "f").string(), {"--seed", "77"}) == 0);
  CHECK(slurp(dir / "f" / "dynamics.csv").find("\"seed\":77") != std::string::npos);

  const int saved = omp_get_max_threads();
  setenv("RIESZ_MODLAB_THREADS", "2", 1);
  CHECK(cli(table, (dir / "g").string()) == 0);
  CHECK(omp_get_max_threads() == 2);
  unsetenv("RIESZ_MODLAB_THREADS");
  omp_set_num_threads(saved);
}
