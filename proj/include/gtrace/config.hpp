// Experiment configuration (JSON). Every field has a default except system.name;
// parse errors name the offending field.
#pragma once

#include "gtrace/core.hpp"
#include "gtrace/hamiltonians.hpp"
#include "gtrace/io.hpp"
#include "gtrace/orbits.hpp"
#include "gtrace/traceformula.hpp"
#include "gtrace/window.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gtrace {

struct EnergyGridSpec {
  double lo = 0.0, hi = 0.0;  // both 0 -> [E - dE/2, E + dE/2]
  int points = 0;             // 0 -> spacing hbar / points_per_hbar
  double points_per_hbar = 40.0;

  std::vector<double> make(double E, double dE, double hbar) const {
    double a = lo, b = hi;
    if (a == 0.0 && b == 0.0) {
      a = E - 0.5 * dE;
      b = E + 0.5 * dE;
    }
    int m = points;
    if (m <= 0) m = static_cast<int>(std::ceil((b - a) / (hbar / points_per_hbar))) + 1;
    return linspace(a, b, m);
  }
};

struct GridSpec {
  double L = 0.0;  // 0 -> automatic
  int N = 0;       // 0 -> automatic
};

struct WavepacketSpec {
  Vec alpha;
  double t = 1.0;
  std::vector<double> hbar_list;
  double L = 1.5;
};

struct ExperimentConfig {
  std::string system;
  std::map<std::string, double> system_params;
  std::vector<double> hbar{0.05};
  double E = 1.0;
  double dE = 0.5;
  double T = 0.0;  // 0 -> 1.2 x orbits.T_max
  std::string ghat_family = "bump";
  EnergyGridSpec E_grid;
  std::vector<OrbitSeed> seeds;
  double T_max = 0.0;  // 0 -> window T
  RecurrenceScan scan;
  GridSpec grid;
  CoherentOptions coherent;
  WavepacketSpec wavepacket;
  std::vector<std::string> routes;
  std::optional<std::vector<std::string>> suite;  // validate; unset -> full suite
  unsigned seed = 0;
  std::string output = "out";
  json raw;

  HamiltonianSystem make_system() const { return make_builtin(system, system_params); }
  SpectralWindow window() const { return SpectralWindow(T, E, dE, ghat_family); }
  EnergyShell shell() const { return EnergyShell(make_system(), E, dE); }
};

namespace detail {

class ConfigReader {
 public:
  ConfigReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  ConfigReader sub(const std::string& key) const {
    if (!has(key)) return ConfigReader(empty(), field(key));
    if (!j_.at(key).is_object()) throw ConfigError(field(key), "must be an object");
    return ConfigReader(j_.at(key), field(key));
  }

  double number(const std::string& key, double def) const {
    if (!has(key)) return def;
    if (!j_.at(key).is_number()) throw ConfigError(field(key), "must be a number");
    return j_.at(key).get<double>();
  }
  int integer(const std::string& key, int def) const {
    if (!has(key)) return def;
    if (!j_.at(key).is_number_integer()) throw ConfigError(field(key), "must be an integer");
    return j_.at(key).get<int>();
  }
  bool boolean(const std::string& key, bool def) const {
    if (!has(key)) return def;
    if (!j_.at(key).is_boolean()) throw ConfigError(field(key), "must be true or false");
    return j_.at(key).get<bool>();
  }
  std::string string(const std::string& key, const std::string& def) const {
    if (!has(key)) return def;
    if (!j_.at(key).is_string()) throw ConfigError(field(key), "must be a string");
    return j_.at(key).get<std::string>();
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> def) const {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) throw ConfigError(field(key), "must be a number or an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(field(key), "array entries must be numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  std::vector<std::string> strings(const std::string& key, std::vector<std::string> def) const {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(field(key), "must be an array of strings");
    std::vector<std::string> out;
    for (const auto& x : v) {
      if (!x.is_string()) throw ConfigError(field(key), "array entries must be strings");
      out.push_back(x.get<std::string>());
    }
    return out;
  }
  const json& at(const std::string& key) const { return j_.at(key); }

  void reject_unknown(std::initializer_list<const char*> known) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool ok = false;
      for (const char* k : known) ok = ok || it.key() == k;
      if (!ok) throw ConfigError(field(it.key()), "unknown field");
    }
  }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }
  const json& j_;
  std::string path_;
};

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "must be a JSON object");
  detail::ConfigReader r(j, "");
  r.reject_unknown({"system", "hbar", "E", "dE", "window", "E_grid", "orbits", "grid", "coherent", "wavepacket",
                    "routes", "validate", "seed", "output", "description"});
  ExperimentConfig c;
  c.raw = j;

  if (!r.has("system")) throw ConfigError("system", "missing (expected {\"name\": ..., \"params\": {...}})");
  const auto sys = r.sub("system");
  sys.reject_unknown({"name", "params"});
  if (!sys.has("name")) throw ConfigError("system.name", "missing");
  c.system = sys.string("name", "");
  try {
    parse_builtin(c.system);
  } catch (const Error& e) {
    throw ConfigError("system.name", e.what());
  }
  const auto params = sys.sub("params");
  if (sys.has("params")) {
    for (auto it = sys.at("params").begin(); it != sys.at("params").end(); ++it) {
      c.system_params[it.key()] = params.number(it.key(), 0.0);
    }
  }
  try {
    c.make_system();
  } catch (const Error& e) {
    throw ConfigError("system.params", e.what());
  }

  c.hbar = r.numbers("hbar", c.hbar);
  if (c.hbar.empty()) throw ConfigError("hbar", "must not be empty");
  for (double h : c.hbar)
    if (!(h > 0.0)) throw ConfigError("hbar", "must be positive");
  c.E = r.number("E", c.E);
  c.dE = r.number("dE", c.dE);
  if (!(c.dE > 0.0)) throw ConfigError("dE", "must be positive");

  const auto orb = r.sub("orbits");
  orb.reject_unknown({"seeds", "T_max", "scan"});
  if (orb.has("seeds")) {
    const auto& s = orb.at("seeds");
    if (!s.is_array()) throw ConfigError("orbits.seeds", "must be an array");
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::string f = "orbits.seeds[" + std::to_string(i) + "]";
      if (!s[i].is_object()) throw ConfigError(f, "must be an object {alpha, T_guess}");
      detail::ConfigReader sr(s[i], f);
      sr.reject_unknown({"alpha", "T_guess"});
      const auto a = sr.numbers("alpha", {});
      const int n = c.make_system().dim();
      if (static_cast<int>(a.size()) != 2 * n) {
        throw ConfigError(f + ".alpha", "needs " + std::to_string(2 * n) + " entries (q then p)");
      }
      const double Tg = sr.number("T_guess", 0.0);
      if (!(Tg > 0.0)) throw ConfigError(f + ".T_guess", "must be positive");
      c.seeds.push_back({Eigen::Map<const Vec>(a.data(), static_cast<Eigen::Index>(a.size())), Tg});
    }
  }
  c.T_max = orb.number("T_max", 0.0);
  const auto scan = orb.sub("scan");
  scan.reject_unknown({"enabled", "samples", "report_dt", "threshold"});
  c.scan.enabled = scan.boolean("enabled", false);
  c.scan.samples = scan.integer("samples", c.scan.samples);
  c.scan.report_dt = scan.number("report_dt", c.scan.report_dt);
  c.scan.threshold = scan.number("threshold", c.scan.threshold);

  const auto win = r.sub("window");
  win.reject_unknown({"T", "family"});
  c.T = win.number("T", 0.0);
  if (c.T == 0.0) {
    if (!(c.T_max > 0.0)) throw ConfigError("window.T", "missing (or give orbits.T_max, then T = 1.2 T_max)");
    c.T = 1.2 * c.T_max;
  }
  if (!(c.T > 0.0)) throw ConfigError("window.T", "must be positive");
  if (c.T_max == 0.0) c.T_max = c.T;
  c.ghat_family = win.string("family", c.ghat_family);
  c.window();  // validates T and the family

  const auto eg = r.sub("E_grid");
  eg.reject_unknown({"lo", "hi", "points", "points_per_hbar"});
  c.E_grid.lo = eg.number("lo", 0.0);
  c.E_grid.hi = eg.number("hi", 0.0);
  c.E_grid.points = eg.integer("points", 0);
  c.E_grid.points_per_hbar = eg.number("points_per_hbar", 40.0);
  if (c.E_grid.hi < c.E_grid.lo) throw ConfigError("E_grid.hi", "must not be below E_grid.lo");
  if (!(c.E_grid.points_per_hbar > 0.0)) throw ConfigError("E_grid.points_per_hbar", "must be positive");

  const auto g = r.sub("grid");
  g.reject_unknown({"L", "N"});
  c.grid.L = g.number("L", 0.0);
  c.grid.N = g.integer("N", 0);
  if (c.grid.L < 0.0) throw ConfigError("grid.L", "must be positive");
  if (c.grid.N != 0 && (c.grid.N < 4 || c.grid.N % 2 != 0)) throw ConfigError("grid.N", "must be even and >= 4");

  const auto co = r.sub("coherent");
  co.reject_unknown({"initial_points", "rel_tol", "max_halvings", "dt"});
  c.coherent.initial_points = co.integer("initial_points", c.coherent.initial_points);
  c.coherent.rel_tol = co.number("rel_tol", c.coherent.rel_tol);
  c.coherent.max_halvings = co.integer("max_halvings", c.coherent.max_halvings);
  c.coherent.dt = co.number("dt", c.coherent.dt);

  const auto wp = r.sub("wavepacket");
  wp.reject_unknown({"alpha", "t", "hbar_list", "L"});
  {
    const int n = c.make_system().dim();
    std::vector<double> a = wp.numbers("alpha", {});
    if (a.empty()) {
      a.assign(2 * n, 0.0);
      a[0] = 0.5;
    }
    if (static_cast<int>(a.size()) != 2 * n) throw ConfigError("wavepacket.alpha", "wrong length");
    c.wavepacket.alpha = Eigen::Map<const Vec>(a.data(), static_cast<Eigen::Index>(a.size()));
  }
  c.wavepacket.t = wp.number("t", 1.0);
  c.wavepacket.hbar_list = wp.numbers("hbar_list", {2e-2, 1e-2, 5e-3, 2.5e-3});
  c.wavepacket.L = wp.number("L", 1.5);

  c.routes = r.strings("routes", {});
  const auto v = r.sub("validate");
  v.reject_unknown({"suite"});
  if (v.has("suite")) c.suite = v.strings("suite", {});
  const int sd = r.integer("seed", 0);
  if (sd < 0) throw ConfigError("seed", "must be nonnegative");
  c.seed = static_cast<unsigned>(sd);
  c.scan.seed = c.seed;
  c.output = r.string("output", c.output);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("--config", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(is, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

/// Box and grid for the exact route: V > E + 2 dE on the boundary with a 10% margin,
/// N the smallest power of two (>= 256) meeting the resolution rule.
inline GridSpec auto_grid(const HamiltonianSystem& sys, double E, double dE, double hbar, GridSpec g = {}) {
  if (!sys.potential()) throw Error("auto_grid: needs H = |p|^2 + V");
  const int n = sys.dim();
  if (g.L <= 0.0) {
    double r = 0.0;
    for (int i = 0; i < n; ++i) {
      for (double s : {1.0, -1.0}) {
        Vec u = Vec::Zero(n);
        u(i) = s;
        r = std::max(r, detail::radial_crossing(sys.potential()->value, Vec::Zero(n), u, E + 2.0 * dE));
      }
    }
    g.L = std::ceil(1.1 * r * 4.0) / 4.0;
  }
  if (g.N <= 0) {
    const double pmax = std::sqrt(E + dE);
    int N = 256;
    while (N * kPi * hbar / (2.0 * g.L * pmax) < 8.0) N *= 2;
    g.N = N;
  }
  return g;
}

}  // namespace gtrace
