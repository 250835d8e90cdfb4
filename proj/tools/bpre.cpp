// bpre: co-existence exponents for two critical branching processes in a
// joint random environment, with the supporting random-walk-in-quadrant
// machinery. Subcommands estimate survival curves, fit power-law exponents,
// cross-check against exact enumeration, and run conditioned-walk
// diagnostics. Every run is reproducible from its manifest.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bpre/branching.hpp"
#include "bpre/env.hpp"
#include "bpre/estimators.hpp"
#include "bpre/harmonic.hpp"
#include "bpre/io.hpp"
#include "bpre/version.hpp"
#include "bpre/walk.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// n-grid syntax: "a:b:x2" geometric, "a:b:+s" arithmetic, "a,b,c" explicit,
// "a" single point.
std::vector<std::size_t> parse_n_grid(const std::string& text) {
  std::vector<std::size_t> grid;
  if (text.find(':') != std::string::npos) {
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 + 1);
    if (c2 == std::string::npos)
      throw std::invalid_argument("n-grid range needs the form a:b:x2 or a:b:+s");
    const std::size_t a = bpre::parse_u64(text.substr(0, c1));
    const std::size_t b = bpre::parse_u64(text.substr(c1 + 1, c2 - c1 - 1));
    const std::string step = text.substr(c2 + 1);
    if (step.size() < 2 || (step[0] != 'x' && step[0] != '+'))
      throw std::invalid_argument("n-grid step must start with 'x' or '+'");
    const std::size_t s = bpre::parse_u64(step.substr(1));
    if (step[0] == 'x') {
      if (s < 2) throw std::invalid_argument("geometric n-grid factor must be >= 2");
      for (std::size_t n = a; n <= b; n *= s) grid.push_back(n);
    } else {
      if (s < 1) throw std::invalid_argument("arithmetic n-grid step must be >= 1");
      for (std::size_t n = a; n <= b; n += s) grid.push_back(n);
    }
  } else {
    for (const auto& tok : bpre::split_csv_line(text)) grid.push_back(bpre::parse_u64(tok));
  }
  bpre::validate_n_grid(grid);
  return grid;
}

std::pair<double, double> parse_pair(const std::string& text, const char* what) {
  const auto f = bpre::split_csv_line(text);
  if (f.size() != 2)
    throw std::invalid_argument(std::string(what) + " must be two comma-separated values");
  return {bpre::parse_double(f[0]), bpre::parse_double(f[1])};
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& tok : bpre::split_csv_line(text)) out.push_back(bpre::parse_double(tok));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

// Checks the output directory before any sampling starts.
void probe_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".bpre_probe";
  {
    std::ofstream f(probe);
    if (!f) throw std::runtime_error("output directory not writable: " + dir.string());
  }
  fs::remove(probe, ec);
}

struct ManifestBuilder {
  json config;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::vector<fs::path> outputs;

  void add_output(const fs::path& p) { outputs.push_back(p); }
  void write(const fs::path& path) {
    bpre::RunManifest m;
    m.config = config;
    m.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    m.output_digests = json::object();
    for (const auto& p : outputs)
      m.output_digests[p.filename().string()] = bpre::fnv1a64_hex_of_file(p);
    bpre::write_manifest(path, m);
  }
};

double theory_theta_for(double rho, bpre::CurveMode mode) {
  if (mode != bpre::CurveMode::Coexist) return 0.5;  // one-type decay
  if (rho == 1.0) return 0.5;                        // synchronous boundary
  return bpre::theta_formula(rho);
}

// --config accepts either a plain config object or a run manifest (the
// config is then taken from its "config" field). Flags given on the command
// line override config values.
json load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  json j = json::parse(in, nullptr, true, true);
  if (j.contains("config")) return j["config"];
  return j;
}

std::vector<std::string> config_to_args(const json& cfg) {
  std::vector<std::string> args;
  for (const auto& [key, value] : cfg.items()) {
    if (key == "command") continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back("--" + key);
      continue;
    }
    args.push_back("--" + key);
    if (value.is_string())
      args.push_back(value.get<std::string>());
    else if (value.is_number_float())
      args.push_back(bpre::format_double(value.get<double>()));
    else
      args.push_back(value.dump());
  }
  return args;
}

struct CurveArgs {
  double rho = 0.0;
  std::string family = "gaussian";
  std::string z = "1,1";
  std::string x = "1,1";
  std::string n_grid = "64:2048:x2";
  std::uint64_t replicas = 200000;
  std::uint64_t seed = 1;
  std::string mode = "coexist";
  std::size_t n_min = 64;
  bool svg = false;
  unsigned threads = 0;
  std::string out = ".";
  std::string config_file;
};

void add_common_options(CLI::App* cmd, CurveArgs& a, bool wants_z, bool wants_x) {
  cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option("--rho", a.rho, "environment correlation in [-1, 1]")->required();
  cmd->add_option("--family", a.family, "environment family: gaussian | discrete");
  if (wants_z) cmd->add_option("--z", a.z, "start populations z1,z2");
  if (wants_x) cmd->add_option("--x", a.x, "walk start point x1,x2");
  cmd->add_option("--seed", a.seed, "master seed");
  cmd->add_option("--threads", a.threads, "worker cap (0 = hardware); never affects results");
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--config", a.config_file, "config file or run manifest; flags override");
}

int run_curve_command(const std::string& name, const CurveArgs& a, bool exit_tail) {
  const auto family = bpre::family_from_name(a.family);
  bpre::require_rho_in_closed_range(a.rho);
  const bpre::EnvModelSpec spec{family, a.rho};
  const auto grid = parse_n_grid(a.n_grid);
  const auto mode = bpre::curve_mode_from_name(a.mode);
  if (a.replicas < 1) throw std::invalid_argument("replicas must be >= 1");

  ManifestBuilder mb;
  mb.config = json{{"command", name},
                   {"rho", a.rho},
                   {"family", a.family},
                   {"n-grid", a.n_grid},
                   {"replicas", a.replicas},
                   {"seed", a.seed},
                   {"n-min", a.n_min},
                   {"svg", a.svg},
                   {"threads", a.threads},
                   {"out", a.out}};
  if (exit_tail)
    mb.config["x"] = a.x;
  else {
    mb.config["z"] = a.z;
    mb.config["mode"] = a.mode;
  }

  const fs::path dir(a.out);
  probe_writable(dir);

  bpre::SurvivalCurve curve;
  if (exit_tail) {
    const auto [x1, x2] = parse_pair(a.x, "--x");
    curve = bpre::exit_tail_curve(spec, {x1, x2}, grid, a.replicas, a.seed, a.threads);
  } else {
    const auto [z1, z2] = parse_pair(a.z, "--z");
    if (z1 < 0 || z2 < 0 || z1 != std::floor(z1) || z2 != std::floor(z2))
      throw std::invalid_argument("--z components must be non-negative integers");
    curve = bpre::annealed_curve(spec, {static_cast<std::int64_t>(z1),
                                        static_cast<std::int64_t>(z2)},
                                 grid, a.replicas, a.seed, mode, a.threads);
  }

  const std::string stem = exit_tail ? "exit_tail" : "coexist";
  const fs::path csv_path = dir / (stem + ".csv");
  bpre::write_file(csv_path, bpre::curve_to_csv(curve));
  mb.add_output(csv_path);

  if (a.svg) {
    const auto fit = bpre::fit_power_law(curve, a.n_min);
    const double theory = -theory_theta_for(a.rho, exit_tail ? bpre::CurveMode::Coexist : mode);
    const fs::path svg_path = dir / (stem + ".svg");
    bpre::write_file(svg_path, bpre::survival_svg(curve, fit, theory));
    mb.add_output(svg_path);
  }
  mb.write(dir / (stem + "_manifest.json"));

  if (curve.low_replica_warning)
    std::cerr << "warning: fewer than 1000 replicas; standard errors are unreliable\n";
  for (const auto& row : curve.rows)
    std::cout << stem << " n=" << row.n << " estimate=" << bpre::format_double(row.estimate)
              << " stderr=" << bpre::format_double(row.stderr_) << "\n";
  std::cout << "wrote " << csv_path.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"co-existence exponents for branching processes in random environment"};
  app.set_version_flag("--version", bpre::kArtifactVersion);
  app.require_subcommand(0, 1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  CurveArgs coexist_args, exit_args;
  auto* coexist_cmd =
      app.add_subcommand("coexist", "annealed co-existence (or one-type) survival curve");
  coexist_cmd->add_option("--n-grid", coexist_args.n_grid, "grid: a:b:x2, a:b:+s, or list");
  coexist_cmd->add_option("--replicas", coexist_args.replicas, "environment replicas");
  coexist_cmd->add_option("--mode", coexist_args.mode, "coexist | single1 | single2");
  coexist_cmd->add_option("--n-min", coexist_args.n_min, "smallest n used by the svg fit");
  coexist_cmd->add_flag("--svg", coexist_args.svg, "emit a log-log plot with fit and theory");
  add_common_options(coexist_cmd, coexist_args, true, false);

  auto* exit_cmd = app.add_subcommand("exit-tail", "P(tau_x > n) survival curve");
  exit_cmd->add_option("--n-grid", exit_args.n_grid, "grid: a:b:x2, a:b:+s, or list");
  exit_cmd->add_option("--replicas", exit_args.replicas, "walk replicas");
  exit_cmd->add_option("--n-min", exit_args.n_min, "smallest n used by the svg fit");
  exit_cmd->add_flag("--svg", exit_args.svg, "emit a log-log plot with fit and theory");
  add_common_options(exit_cmd, exit_args, false, true);

  struct {
    std::string input;
    std::size_t n_min = 64;
    std::string out = ".";
    std::string config_file;
  } fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "power-law exponent fit of a survival curve CSV");
  fit_cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  fit_cmd->add_option("--input", fit_args.input, "curve CSV path")->required();
  fit_cmd->add_option("--n-min", fit_args.n_min, "ignore grid points below this n");
  fit_cmd->add_option("--out", fit_args.out, "output directory");
  fit_cmd->add_option("--config", fit_args.config_file, "config file or run manifest");

  struct {
    double rho = 0.0;
    std::string z = "1,1";
    std::string x = "0.5,0.5";
    std::string kind = "coexist";
    std::size_t n = 1;
    std::uint64_t replicas = 200000;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string config_file;
  } oracle_args;
  auto* oracle_cmd = app.add_subcommand(
      "oracle", "exact enumeration vs Monte Carlo (discrete family, n <= 8)");
  oracle_cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  oracle_cmd->add_option("--rho", oracle_args.rho)->required();
  oracle_cmd->add_option("--z", oracle_args.z, "populations for kind=coexist");
  oracle_cmd->add_option("--x", oracle_args.x, "start point for kind=exit");
  oracle_cmd->add_option("--kind", oracle_args.kind, "coexist | exit");
  oracle_cmd->add_option("--n", oracle_args.n, "horizon, at most 8");
  oracle_cmd->add_option("--replicas", oracle_args.replicas);
  oracle_cmd->add_option("--seed", oracle_args.seed);
  oracle_cmd->add_option("--threads", oracle_args.threads);
  oracle_cmd->add_option("--config", oracle_args.config_file);

  struct {
    double rho = 0.0;
    std::string family = "gaussian";
    std::string x = "1,1";
    double offset = 2.0;
    std::size_t depth = 64;
    std::uint64_t replicas = 20000;
    std::uint64_t seed = 1;
    std::string config_file;
  } vharm_args;
  auto* vharm_cmd =
      app.add_subcommand("vharm", "Monte Carlo harmonic-function estimate V(x)");
  vharm_cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  vharm_cmd->add_option("--rho", vharm_args.rho)->required();
  vharm_cmd->add_option("--family", vharm_args.family);
  vharm_cmd->add_option("--x", vharm_args.x);
  vharm_cmd->add_option("--offset", vharm_args.offset, "interior shift R");
  vharm_cmd->add_option("--depth", vharm_args.depth, "backward extension steps m");
  vharm_cmd->add_option("--replicas", vharm_args.replicas);
  vharm_cmd->add_option("--seed", vharm_args.seed);
  vharm_cmd->add_option("--config", vharm_args.config_file);

  struct {
    double rho = 0.0;
    std::string family = "gaussian";
    std::string x = "1,1";
    std::string n_grid = "256,1024,4096";
    std::uint64_t particles = 20000;
    double offset = 2.0;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string out = ".";
    std::string config_file;
  } rep_args;
  auto* rep_cmd = app.add_subcommand(
      "repulsion", "entropic repulsion diagnostic under the conditioned walk");
  rep_cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  rep_cmd->add_option("--rho", rep_args.rho)->required();
  rep_cmd->add_option("--family", rep_args.family);
  rep_cmd->add_option("--x", rep_args.x);
  rep_cmd->add_option("--n-grid", rep_args.n_grid);
  rep_cmd->add_option("--particles", rep_args.particles);
  rep_cmd->add_option("--offset", rep_args.offset);
  rep_cmd->add_option("--seed", rep_args.seed);
  rep_cmd->add_option("--threads", rep_args.threads);
  rep_cmd->add_option("--out", rep_args.out);
  rep_cmd->add_option("--config", rep_args.config_file);

  struct {
    double rho = 0.0;
    std::string family = "gaussian";
    std::string mode = "walk";
    std::string x = "1,1";
    std::string z = "1,1";
    std::string t_grid = "0.5,1";
    std::size_t horizon = 1024;
    std::uint64_t particles = 20000;
    std::uint64_t replicas = 200000;
    double offset = 2.0;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string out;
    std::string config_file;
  } meander_args;
  auto* meander_cmd = app.add_subcommand(
      "meander", "self-consistency of scaled conditioned marginals across horizons");
  meander_cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  meander_cmd->add_option("--rho", meander_args.rho)->required();
  meander_cmd->add_option("--family", meander_args.family);
  meander_cmd->add_option("--mode", meander_args.mode, "walk | branching");
  meander_cmd->add_option("--x", meander_args.x, "walk start (mode walk)");
  meander_cmd->add_option("--z", meander_args.z, "populations (mode branching)");
  meander_cmd->add_option("--t-grid", meander_args.t_grid);
  meander_cmd->add_option("--horizon", meander_args.horizon, "compared against 4x this");
  meander_cmd->add_option("--particles", meander_args.particles);
  meander_cmd->add_option("--replicas", meander_args.replicas);
  meander_cmd->add_option("--offset", meander_args.offset);
  meander_cmd->add_option("--seed", meander_args.seed);
  meander_cmd->add_option("--threads", meander_args.threads);
  meander_cmd->add_option("--out", meander_args.out);
  meander_cmd->add_option("--config", meander_args.config_file);

  struct {
    double rho = 0.0;
    std::string family = "gaussian";
    std::string z = "1,1";
    std::size_t n = 1024;
    double epsilon = 0.25;
    std::uint64_t replicas = 1000000;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string out;
    std::string config_file;
  } zs_args;
  auto* zs_cmd = app.add_subcommand(
      "zsdev", "deviation frequency of log Z from S among co-surviving runs");
  zs_cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  zs_cmd->add_option("--rho", zs_args.rho)->required();
  zs_cmd->add_option("--family", zs_args.family);
  zs_cmd->add_option("--z", zs_args.z);
  zs_cmd->add_option("--n", zs_args.n);
  zs_cmd->add_option("--epsilon", zs_args.epsilon);
  zs_cmd->add_option("--replicas", zs_args.replicas);
  zs_cmd->add_option("--seed", zs_args.seed);
  zs_cmd->add_option("--threads", zs_args.threads);
  zs_cmd->add_option("--out", zs_args.out);
  zs_cmd->add_option("--config", zs_args.config_file);

  // Rebuild argv with --config values injected before the user's flags so the
  // command line wins under the TakeLast policy.
  std::vector<std::string> args;
  try {
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    if (!args.empty() && !args.front().empty() && args.front()[0] != '-') {
      std::string cfg_path;
      for (std::size_t i = 1; i + 1 < args.size(); ++i)
        if (args[i] == "--config") cfg_path = args[i + 1];
      if (!cfg_path.empty()) {
        const json cfg = load_config_file(cfg_path);
        if (cfg.contains("command") && cfg["command"].get<std::string>() != args.front())
          throw std::invalid_argument("config was recorded for command '" +
                                      cfg["command"].get<std::string>() +
                                      "', not '" + args.front() + "'");
        const auto injected = config_to_args(cfg);
        args.insert(args.begin() + 1, injected.begin(), injected.end());
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    std::vector<const char*> cargs;
    cargs.push_back(argv[0]);
    for (const auto& s : args) cargs.push_back(s.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << "\n";
    return kExitConfig;
  }

  try {
    if (app.got_subcommand(coexist_cmd))
      return run_curve_command("coexist", coexist_args, false);
    if (app.got_subcommand(exit_cmd))
      return run_curve_command("exit-tail", exit_args, true);

    if (app.got_subcommand(fit_cmd)) {
      const auto curve = bpre::load_curve_csv(fit_args.input);
      ManifestBuilder mb;
      mb.config = json{{"command", "fit"},
                       {"input", fit_args.input},
                       {"n-min", fit_args.n_min},
                       {"out", fit_args.out}};
      const fs::path dir(fit_args.out);
      probe_writable(dir);
      const auto fit = bpre::fit_power_law(curve, fit_args.n_min);
      double theta_theory;
      if (std::fabs(curve.rho) < 1.0)
        theta_theory = bpre::theta_formula(curve.rho);
      else if (curve.rho == 1.0)
        theta_theory = 0.5;
      else
        throw std::invalid_argument("curve has rho = -1; no power-law theory value");
      const fs::path csv_path = dir / "fit.csv";
      bpre::write_file(csv_path, bpre::fit_to_csv(fit, theta_theory));
      mb.add_output(csv_path);
      mb.write(dir / "fit_manifest.json");
      std::cout << "slope=" << bpre::format_double(fit.slope)
                << " stderr=" << bpre::format_double(fit.stderr_)
                << " theta_theory=" << bpre::format_double(theta_theory)
                << " slope+theta=" << bpre::format_double(fit.slope + theta_theory)
                << " points=" << fit.points_used << "\n";
      if (fit.excluded_zero_estimates)
        std::cerr << "warning: zero estimates were excluded from the fit\n";
      return kExitOk;
    }

    if (app.got_subcommand(oracle_cmd)) {
      const auto spec = bpre::make_discrete_env(oracle_args.rho);
      bpre::OracleReport rep;
      if (oracle_args.kind == "coexist") {
        const auto [z1, z2] = parse_pair(oracle_args.z, "--z");
        rep = bpre::oracle_coexistence(spec,
                                       {static_cast<std::int64_t>(z1),
                                        static_cast<std::int64_t>(z2)},
                                       oracle_args.n, oracle_args.replicas,
                                       oracle_args.seed, oracle_args.threads);
      } else if (oracle_args.kind == "exit") {
        const auto [x1, x2] = parse_pair(oracle_args.x, "--x");
        rep = bpre::oracle_exit(spec, {x1, x2}, oracle_args.n, oracle_args.replicas,
                                oracle_args.seed, oracle_args.threads);
      } else {
        throw std::invalid_argument("--kind must be coexist or exit");
      }
      std::cout << "exact=" << bpre::format_double(rep.exact)
                << " estimate=" << bpre::format_double(rep.estimate)
                << " stderr=" << bpre::format_double(rep.stderr_)
                << " z=" << bpre::format_double(rep.z_score) << "\n";
      return kExitOk;
    }

    if (app.got_subcommand(vharm_cmd)) {
      const auto spec =
          bpre::EnvModelSpec{bpre::family_from_name(vharm_args.family), vharm_args.rho};
      const auto approx = bpre::make_harmonic_approx(vharm_args.rho, vharm_args.offset,
                                                     vharm_args.depth, vharm_args.replicas);
      const auto [x1, x2] = parse_pair(vharm_args.x, "--x");
      const auto est = bpre::estimate_V(approx, spec, {x1, x2}, vharm_args.seed);
      const double u0 = bpre::u_harmonic(approx.geometry, {x1, x2});
      std::cout << "V=" << bpre::format_double(est.value)
                << " stderr=" << bpre::format_double(est.stderr_) << " u="
                << bpre::format_double(u0)
                << " ratio=" << bpre::format_double(u0 != 0.0 ? est.value / u0 : 0.0)
                << " survivors=" << est.survivors << "\n";
      if (est.starved) {
        std::cerr << "error: every replica exited before depth " << vharm_args.depth
                  << "; the estimate is starved\n";
        return kExitRuntime;
      }
      return kExitOk;
    }

    if (app.got_subcommand(rep_cmd)) {
      const auto spec =
          bpre::EnvModelSpec{bpre::family_from_name(rep_args.family), rep_args.rho};
      const auto approx = bpre::make_harmonic_approx(rep_args.rho, rep_args.offset);
      const auto grid = parse_n_grid(rep_args.n_grid);
      const auto [x1, x2] = parse_pair(rep_args.x, "--x");
      if (rep_args.particles < 100)
        throw std::invalid_argument("need at least 100 particles");
      ManifestBuilder mb;
      mb.config = json{{"command", "repulsion"}, {"rho", rep_args.rho},
                       {"family", rep_args.family}, {"x", rep_args.x},
                       {"n-grid", rep_args.n_grid}, {"particles", rep_args.particles},
                       {"offset", rep_args.offset}, {"seed", rep_args.seed},
                       {"threads", rep_args.threads}, {"out", rep_args.out}};
      const fs::path dir(rep_args.out);
      probe_writable(dir);
      std::vector<bpre::ParticleEnsemble> ensembles;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        bpre::HtransformOptions opts;
        opts.threads = rep_args.threads;
        ensembles.push_back(bpre::htransform_sample(
            approx, spec, {x1, x2}, grid[i], rep_args.particles,
            bpre::derive_stream(rep_args.seed, bpre::fnv1a64("repulsion"), i), opts));
      }
      const auto report = bpre::repulsion_report(ensembles);
      const fs::path csv_path = dir / "repulsion.csv";
      bpre::write_file(csv_path, bpre::repulsion_to_csv(report));
      mb.add_output(csv_path);
      mb.write(dir / "repulsion_manifest.json");
      for (const auto& row : report.rows)
        std::cout << "n=" << row.n << " fraction=" << bpre::format_double(row.fraction)
                  << " stderr=" << bpre::format_double(row.stderr_) << "\n";
      std::cout << "wrote " << csv_path.string() << "\n";
      return kExitOk;
    }

    if (app.got_subcommand(meander_cmd)) {
      const auto spec =
          bpre::EnvModelSpec{bpre::family_from_name(meander_args.family), meander_args.rho};
      const auto t_grid = parse_double_list(meander_args.t_grid);
      bpre::MeanderReport rep;
      if (meander_args.mode == "walk") {
        const auto approx = bpre::make_harmonic_approx(meander_args.rho, meander_args.offset);
        const auto [x1, x2] = parse_pair(meander_args.x, "--x");
        rep = bpre::meander_consistency_walk(approx, spec, {x1, x2}, t_grid,
                                             meander_args.horizon, meander_args.particles,
                                             meander_args.seed, meander_args.threads);
      } else if (meander_args.mode == "branching") {
        const auto [z1, z2] = parse_pair(meander_args.z, "--z");
        const bpre::PopulationState z{static_cast<std::int64_t>(z1),
                                      static_cast<std::int64_t>(z2)};
        auto small_h = bpre::coexistence_weighted_walk_marginals(
            spec, z, meander_args.horizon, t_grid, meander_args.replicas,
            bpre::derive_stream(meander_args.seed, bpre::fnv1a64("meander.small"), 0),
            meander_args.threads);
        auto large_h = bpre::coexistence_weighted_walk_marginals(
            spec, z, 4 * meander_args.horizon, t_grid, meander_args.replicas,
            bpre::derive_stream(meander_args.seed, bpre::fnv1a64("meander.large"), 0),
            meander_args.threads);
        rep = bpre::compare_marginals(small_h, large_h);
        rep.horizon_small = meander_args.horizon;
        rep.horizon_large = 4 * meander_args.horizon;
      } else {
        throw std::invalid_argument("--mode must be walk or branching");
      }
      for (const auto& row : rep.rows)
        std::cout << "t=" << bpre::format_double(row.t)
                  << " ks_coord1=" << bpre::format_double(row.ks_coord1)
                  << " ks_coord2=" << bpre::format_double(row.ks_coord2)
                  << " ks_radial=" << bpre::format_double(row.ks_radial) << "\n";
      std::cout << "ess_small=" << bpre::format_double(rep.ess_small)
                << " ess_large=" << bpre::format_double(rep.ess_large) << "\n";
      if (!meander_args.out.empty()) {
        const fs::path dir(meander_args.out);
        probe_writable(dir);
        std::string csv = "t,ks_coord1,ks_coord2,ks_radial,ess_small,ess_large\n";
        for (const auto& row : rep.rows) {
          csv += bpre::format_double(row.t) + "," + bpre::format_double(row.ks_coord1) +
                 "," + bpre::format_double(row.ks_coord2) + "," +
                 bpre::format_double(row.ks_radial) + "," +
                 bpre::format_double(rep.ess_small) + "," +
                 bpre::format_double(rep.ess_large) + "\n";
        }
        bpre::write_file(dir / "meander.csv", csv);
        std::cout << "wrote " << (dir / "meander.csv").string() << "\n";
      }
      return kExitOk;
    }

    if (app.got_subcommand(zs_cmd)) {
      const auto spec =
          bpre::EnvModelSpec{bpre::family_from_name(zs_args.family), zs_args.rho};
      const auto [z1, z2] = parse_pair(zs_args.z, "--z");
      const auto rep = bpre::zs_deviation(spec,
                                          {static_cast<std::int64_t>(z1),
                                           static_cast<std::int64_t>(z2)},
                                          zs_args.n, zs_args.replicas, zs_args.epsilon,
                                          zs_args.seed, zs_args.threads);
      std::cout << "frequency=" << bpre::format_double(rep.frequency)
                << " stderr=" << bpre::format_double(rep.stderr_)
                << " co_surviving=" << rep.co_surviving
                << " saturated_excluded=" << rep.saturated_excluded
                << " coexistence_rate=" << bpre::format_double(rep.coexistence_rate)
                << "\n";
      if (!zs_args.out.empty()) {
        const fs::path dir(zs_args.out);
        probe_writable(dir);
        std::string csv = "n,epsilon,frequency,stderr,co_surviving,saturated_excluded,replicas\n";
        csv += std::to_string(rep.n) + "," + bpre::format_double(rep.epsilon) + "," +
               bpre::format_double(rep.frequency) + "," + bpre::format_double(rep.stderr_) +
               "," + std::to_string(rep.co_surviving) + "," +
               std::to_string(rep.saturated_excluded) + "," + std::to_string(rep.replicas) +
               "\n";
        bpre::write_file(dir / "zsdev.csv", csv);
        std::cout << "wrote " << (dir / "zsdev.csv").string() << "\n";
      }
      return kExitOk;
    }

    std::cerr << app.help() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
