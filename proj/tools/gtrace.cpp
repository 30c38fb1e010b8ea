// gtrace: command-line front end.
// Exit codes: 0 ok, 1 validation failure or runtime error, 2 usage or configuration error.
#include "gtrace/config.hpp"
#include "gtrace/io.hpp"
#include "gtrace/oscillatory.hpp"
#include "gtrace/orbits.hpp"
#include "gtrace/quantum_oracle.hpp"
#include "gtrace/traceformula.hpp"
#include "gtrace/validation.hpp"
#include "gtrace/wavepackets.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace gtrace;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::string config;
  std::vector<double> hbar;
  std::vector<std::string> routes;
  std::string out;
  std::optional<unsigned> seed;
  std::vector<std::string> tol_overrides;
};

struct Tolerances {
  OrbitOptions orbit;
  TraceOptions trace;
  CoherentOptions coherent;
  QuadratureOptions quadrature;
  PacketErrorOptions packet;
};

void warn(const std::string& s) { std::cerr << "warning: " << s << "\n"; }

Tolerances apply_overrides(const std::vector<std::string>& kv, const ExperimentConfig* cfg) {
  Tolerances t;
  if (cfg) t.coherent = cfg->coherent;
  for (const auto& item : kv) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--tol-overrides", "expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("--tol-overrides." + key, "value is not a number");
    }
    if (key == "orbit.tol") t.orbit.tol = v;
    else if (key == "orbit.degeneracy_tol") t.orbit.degeneracy_tol = v;
    else if (key == "integration.rtol") t.orbit.integration.rtol = v;
    else if (key == "integration.atol") t.orbit.integration.atol = v;
    else if (key == "dSdE_tol") t.trace.dSdE_tol = v;
    else if (key == "coherent.rel_tol") t.coherent.rel_tol = v;
    else if (key == "quadrature.rel_tol") t.quadrature.rel_tol = v;
    else if (key == "packet.richardson_tol") t.packet.richardson_tol = v;
    else throw ConfigError("--tol-overrides." + key, "unknown tolerance key");
  }
  t.trace.orbit = t.orbit;
  return t;
}

ExperimentConfig load(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config", "required for this command");
  auto cfg = load_config(c.config);
  if (!c.hbar.empty()) {
    for (double h : c.hbar)
      if (!(h > 0.0)) throw ConfigError("--hbar", "must be positive");
    cfg.hbar = c.hbar;
  }
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.scan.seed = *c.seed;
  }
  if (!c.out.empty()) cfg.output = c.out;
  return cfg;
}

json manifest(const std::string& command, const ExperimentConfig* cfg, const Common& c) {
  json m;
  m["tool"] = "gtrace";
  m["version"] = "0.1.0";
  m["command"] = command;
  m["config_file"] = c.config;
  m["tol_overrides"] = c.tol_overrides;
  if (cfg) {
    m["config"] = cfg->raw;
    m["effective"] = {{"system", cfg->system}, {"params", cfg->system_params}, {"hbar", cfg->hbar},
                      {"E", cfg->E},           {"dE", cfg->dE},              {"T", cfg->T},
                      {"T_max", cfg->T_max},   {"ghat_family", cfg->ghat_family},
                      {"seed", cfg->seed}};
  }
  return m;
}

std::string hbar_tag(double h) {
  std::ostringstream os;
  os << h;
  return os.str();
}

std::vector<double> as_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

EnumerationResult find_orbits(const ExperimentConfig& cfg, const Tolerances& tol, double T_max) {
  return enumerate_orbits(cfg.shell(), T_max, cfg.seeds, tol.orbit, cfg.scan);
}

int cmd_orbits(const Common& c) {
  const auto cfg = load(c);
  const auto tol = apply_overrides(c.tol_overrides, &cfg);
  const auto en = find_orbits(cfg, tol, cfg.T_max);
  for (const auto& w : en.warnings) warn(w);
  const int n = cfg.make_system().dim();
  std::vector<std::string> header{"k", "T_star", "T", "S", "maslov", "det_I_minus_P", "nondegenerate"};
  for (int i = 0; i < n; ++i) header.push_back("q" + std::to_string(i + 1));
  for (int i = 0; i < n; ++i) header.push_back("p" + std::to_string(i + 1));
  CsvTable t(header);
  for (const auto& o : en.orbits) {
    std::vector<std::string> row{std::to_string(o.k), csv_number(o.T_star), csv_number(o.T()), csv_number(o.S),
                                 std::to_string(o.maslov), csv_number(o.det_I_minus_P),
                                 o.nondegenerate ? "true" : "false"};
    for (Eigen::Index i = 0; i < o.alpha0.size(); ++i) row.push_back(csv_number(o.alpha0(i)));
    t.add_row(row);
  }
  auto m = manifest("orbits", &cfg, c);
  m["primitives"] = en.primitives.size();
  m["failed_seeds"] = en.failed_seeds;
  m["warnings"] = en.warnings;
  const fs::path path = fs::path(cfg.output) / "orbits.csv";
  write_table(path, t, m);
  std::printf("%zu primitive orbits, %zu orbits with |T| <= %g, %d failed seeds -> %s\n", en.primitives.size(),
              en.orbits.size(), cfg.T_max, en.failed_seeds, path.string().c_str());
  if (cfg.seeds.empty() && !cfg.scan.enabled) return kExitOk;
  if (en.orbits.empty()) {
    std::fprintf(stderr, "error: seeds were given but no periodic orbits were found\n");
    return kExitFail;
  }
  return kExitOk;
}

int cmd_rho(const Common& c, std::vector<std::string> routes) {
  const auto cfg = load(c);
  const auto tol = apply_overrides(c.tol_overrides, &cfg);
  if (routes.empty()) routes = cfg.routes;
  if (routes.empty()) throw CLI::ValidationError("routes", "no route selected (exact, semiclassical, coherent)");
  bool want_exact = false, want_sc = false, want_cs = false;
  for (const auto& r : routes) {
    if (r == "exact") want_exact = true;
    else if (r == "semiclassical") want_sc = true;
    else if (r == "coherent") want_cs = true;
    else if (r == "compare") want_exact = want_sc = want_cs = true;
    else throw ConfigError("routes", "unknown route '" + r + "'");
  }
  const auto sys = cfg.make_system();
  const auto w = cfg.window();
  if (want_cs && sys.dim() != 1) {
    warn("coherent route is one-dimensional only; skipped for " + cfg.system);
    want_cs = false;
  }
  std::vector<PeriodicOrbit> orbits;
  if (want_sc) {
    const auto en = find_orbits(cfg, tol, w.T());
    for (const auto& s : en.warnings) warn(s);
    orbits = en.orbits;
    if (orbits.empty()) warn("no periodic orbits within the window: semiclassical curve is the Weyl term only");
  }


  for (double hbar : cfg.hbar) {
    const auto grid = cfg.E_grid.make(cfg.E, cfg.dE, hbar);
    std::vector<std::string> header{"E"};
    std::vector<std::vector<double>> cols;
    std::optional<ExactRho> ex;
    std::optional<DensityOfStates> sc;
    std::optional<CoherentRho> cs;
    json info;
    if (want_exact) {
      const auto g = auto_grid(sys, cfg.E, cfg.dE, hbar, cfg.grid);
      ex = exact_rho(GridHamiltonian::build(sys, g.L, g.N, hbar, cfg.E, cfg.dE), w, grid);
      for (const auto& s : ex->warnings) warn(s);
      header.push_back("rho_exact");
      cols.push_back(ex->rho);
      info["exact"] = {{"L", g.L}, {"N", g.N}, {"levels", ex->eigenvalues.size()}, {"edge_fraction", ex->edge_fraction}};
    }
    if (want_sc) {
      sc = semiclassical_rho(cfg.shell(), w, orbits, hbar, grid, nullptr, tol.trace);
      for (const auto& s : sc->warnings) warn(s);
      header.push_back("rho_semiclassical");
      cols.push_back(sc->rho_total);
      info["semiclassical"] = {{"orbit_terms", sc->terms.size()},
                               {"imag_residue", sc->imag_residue},
                               {"dSdE_defect", sc->dSdE_defect}};
    }
    if (want_cs) {
      CoherentOptions co = tol.coherent;
      cs = rho_via_coherent_states(sys, w, hbar, grid, co);
      for (const auto& s : cs->warnings) warn(s);
      header.push_back("rho_coherent");
      cols.push_back(cs->rho);
      info["coherent"] = {{"alpha_points", cs->alpha_points}, {"t_points", cs->t_points},
                          {"last_change", cs->last_change}};
    }
    if (sc) {
      header.push_back("weyl");
      cols.push_back(sc->weyl);
      for (const auto& term : sc->terms) {
        const std::string tag = "orbit_k" + std::to_string(term.k) + "_T" + hbar_tag(term.T_star);
        std::vector<double> re, im;
        for (const auto& v : term.values) {
          re.push_back(v.real());
          im.push_back(v.imag());
        }
        header.push_back(tag + "_re");
        cols.push_back(re);
        header.push_back(tag + "_im");
        cols.push_back(im);
      }
    }
    CsvTable t(header);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      std::vector<double> row{grid[i]};
      for (const auto& col : cols) row.push_back(col[i]);
      t.add_row(row);
    }

    // deviation summary against the exact route on [E - dE/2, E + dE/2]
    json summary = json::object();
    const double lo = cfg.E - 0.5 * cfg.dE, hi = cfg.E + 0.5 * cfg.dE;
    auto compare = [&](const std::string& name, const std::vector<double>& rho) {
      const double l = relative_linf(grid, rho, ex->rho, lo, hi);
      const double off = detail::peak_offset(peak_positions(grid, rho), peak_positions(grid, ex->rho));
      summary[name] = {{"relative_linf", l}, {"peak_offset", std::isfinite(off) ? json(off) : json(nullptr)}};
      std::printf("  hbar=%g %s vs exact: rel Linf %.4g, peak offset %s\n", hbar, name.c_str(), l,
                  std::isfinite(off) ? std::to_string(off).c_str() : "n/a (peak counts differ)");
    };
    if (ex && sc) compare("semiclassical", sc->rho_total);
    if (ex && cs) compare("coherent", cs->rho);

    auto m = manifest("rho", &cfg, c);
    m["hbar"] = hbar;
    m["routes"] = routes;
    m["E_grid"] = {{"lo", grid.front()}, {"hi", grid.back()}, {"points", grid.size()}};
    m["route_info"] = info;
    m["deviation"] = summary;
    const fs::path path = fs::path(cfg.output) / ("rho_hbar" + hbar_tag(hbar) + ".csv");
    write_table(path, t, m);
    std::printf("rho at hbar=%g (%zu points) -> %s\n", hbar, grid.size(), path.string().c_str());
  }
  return kExitOk;
}

int cmd_validate(const Common& c, int mutate_maslov) {
  std::optional<ExperimentConfig> cfg;
  if (!c.config.empty()) cfg = load(c);
  ValidationContext ctx;
  ctx.seed = c.seed ? *c.seed : (cfg ? cfg->seed : 0u);
  ctx.maslov_shift = mutate_maslov;
  const std::string out = !c.out.empty() ? c.out : (cfg ? cfg->output : std::string("out"));

  std::vector<NamedCheck> selected;
  if (cfg && cfg->suite) {
    for (const auto& name : *cfg->suite) {
      const auto& all = validation_suite();
      const auto it = std::find_if(all.begin(), all.end(), [&](const NamedCheck& n) { return n.name == name; });
      if (it == all.end()) throw ConfigError("validate.suite", "unknown check '" + name + "'");
      selected.push_back(*it);
    }
  } else {
    selected = validation_suite();
  }
  json report = manifest("validate", cfg ? &*cfg : nullptr, c);
  report["maslov_shift"] = mutate_maslov;
  report["checks"] = json::array();
  if (selected.empty()) warn("empty validation suite selected: nothing to check");
  bool ok = true;
  for (const auto& chk : selected) {
    const auto r = run_check(chk, ctx);
    ok = ok && r.passed;
    std::printf("[%s] %-17s %7.1fs  %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds, r.detail.c_str());
    std::fflush(stdout);
    report["checks"].push_back(to_json(r));
  }
  report["passed"] = ok;
  const fs::path path = fs::path(out) / "validate.json";
  write_json(path, report);
  std::printf("%s -> %s\n", ok ? "all checks passed" : "validation FAILED", path.string().c_str());
  return ok ? kExitOk : kExitFail;
}

int cmd_wavepacket(const Common& c) {
  const auto cfg = load(c);
  auto tol = apply_overrides(c.tol_overrides, &cfg);
  tol.packet.L = cfg.wavepacket.L;
  const auto sys = cfg.make_system();
  const auto& hs = c.hbar.empty() ? cfg.wavepacket.hbar_list : c.hbar;
  CsvTable t({"hbar", "error", "richardson", "norm_defect", "phase", "N", "steps"});
  std::vector<double> errs;
  for (double h : hs) {
    const auto p = packet_error(sys, cfg.wavepacket.alpha, cfg.wavepacket.t, h, tol.packet);
    t.add_row(std::vector<double>{p.hbar, p.error, p.richardson, p.norm_defect, p.phase, double(p.N), double(p.steps)});
    errs.push_back(p.error);
    std::printf("  hbar=%g  L2 error %.6g  (N=%d, steps=%d)\n", h, p.error, p.N, p.steps);
  }
  auto m = manifest("wavepacket", &cfg, c);
  m["alpha"] = as_std(cfg.wavepacket.alpha);
  m["t"] = cfg.wavepacket.t;
  m["box_L"] = cfg.wavepacket.L;
  if (hs.size() >= 2) {
    const double s = loglog_slope(hs, errs);
    m["loglog_slope"] = s;
    std::printf("log-log slope of error vs hbar: %.4f\n", s);
  }
  const fs::path path = fs::path(cfg.output) / "wavepacket.csv";
  write_table(path, t, m);
  std::printf("-> %s\n", path.string().c_str());
  return kExitOk;
}

int cmd_staphase(const Common& c) {
  std::optional<ExperimentConfig> cfg;
  if (!c.config.empty()) cfg = load(c);
  const auto tol = apply_overrides(c.tol_overrides, cfg ? &*cfg : nullptr);
  const std::string out = !c.out.empty() ? c.out : (cfg ? cfg->output : std::string("out"));
  CsvTable t({"problem", "omega", "J_re", "J_im", "c0_re", "c0_im", "residual"});
  json report = manifest("staphase", cfg ? &*cfg : nullptr, c);
  report["problems"] = json::array();
  bool ok = true;
  for (const auto& pb : {fresnel_problem(), circle_problem(), odd_amplitude_problem()}) {
    const auto r = verify_expansion(pb, tol.quadrature);
    for (std::size_t i = 0; i < r.omegas.size(); ++i) {
      t.add_row(std::vector<std::string>{pb.name, csv_number(r.omegas[i]), csv_number(r.J[i].real()),
                                         csv_number(r.J[i].imag()), csv_number(r.c0[i].real()),
                                         csv_number(r.c0[i].imag()), csv_number(r.residuals[i])});
    }
    const bool good = r.accepted && (pb.name == "odd_amplitude" || r.modulus_mismatch <= 0.02);
    ok = ok && good;
    std::printf("[%s] %-14s exponent %.4f  modulus mismatch %.3g\n", good ? "PASS" : "FAIL", pb.name.c_str(),
                r.exponent, r.modulus_mismatch);
    report["problems"].push_back({{"name", pb.name}, {"exponent", r.exponent}, {"accepted", r.accepted},
                                  {"modulus_mismatch", r.modulus_mismatch}, {"residuals", r.residuals}});
  }
  const fs::path path = fs::path(out) / "staphase.csv";
  write_table(path, t, report);
  std::printf("-> %s\n", path.string().c_str());
  return ok ? kExitOk : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gtrace: periodic orbits, semiclassical trace formula and its validators"};
  app.require_subcommand(1);
  Common common;
  int mutate_maslov = 0;
  std::string route_pos;
  unsigned seed_value = 0;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config,-c", common.config, "experiment config (JSON)");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    else opt->check(CLI::ExistingFile);
    sub->add_option("--hbar", common.hbar, "override hbar (one or more values)");
    sub->add_option("--out,-o", common.out, "output directory (overrides config 'output')");
    sub->add_option("--seed", seed_value, "random seed (overrides config 'seed')");
    sub->add_option("--tol-overrides", common.tol_overrides, "key=value tolerance overrides")->delimiter(',');
  };

  auto* orbits = app.add_subcommand("orbits", "enumerate periodic orbits and write orbits.csv");
  add_common(orbits, true);
  auto* rho = app.add_subcommand("rho", "density of states by the exact, semiclassical and coherent routes");
  add_common(rho, true);
  rho->add_option("route", route_pos, "exact | semiclassical | coherent | compare")
      ->check(CLI::IsMember({"exact", "semiclassical", "coherent", "compare"}));
  rho->add_option("--routes", common.routes, "comma-separated route list")->delimiter(',');
  auto* validate = app.add_subcommand("validate", "run the invariant suite and write validate.json");
  add_common(validate, false);
  validate->add_option("--mutate-maslov", mutate_maslov, "add this shift to every primitive Maslov index");
  auto* wave = app.add_subcommand("wavepacket", "leading-order packet vs exact propagation over an hbar sweep");
  add_common(wave, true);
  auto* sta = app.add_subcommand("staphase", "stationary-phase expansion checks");
  add_common(sta, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }
  for (auto* sub : {orbits, rho, validate, wave, sta}) {
    if (sub->parsed() && sub->count("--seed") > 0) common.seed = seed_value;
  }

  try {
    if (*orbits) return cmd_orbits(common);
    if (*rho) {
      std::vector<std::string> routes = common.routes;
      if (!route_pos.empty()) routes.push_back(route_pos);
      if (rho->count("--routes") > 0 && common.routes.empty()) {
        std::fprintf(stderr, "usage error: --routes given but empty\n");
        return kExitUsage;
      }
      return cmd_rho(common, routes);
    }
    if (*validate) return cmd_validate(common, mutate_maslov);
    if (*wave) return cmd_wavepacket(common);
    if (*sta) return cmd_staphase(common);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFail;
  }
  return kExitUsage;
}
