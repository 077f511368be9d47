// Command-line front end: config ingestion, subcommand dispatch, and
// deterministic serialization of trajectories and reports.
//
// Exit codes: 0 success, 1 config/usage error, 2 precondition failure,
// 3 runtime failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hawkes_ei/config.hpp"
#include "hawkes_ei/diagnostics.hpp"
#include "hawkes_ei/io.hpp"
#include "hawkes_ei/lyapunov.hpp"
#include "hawkes_ei/model.hpp"
#include "hawkes_ei/simulator.hpp"

namespace {

using nlohmann::json;
using namespace hawkes_ei;

json config_echo(const ModelParams& p, std::uint64_t seed) {
  json j;
  j["n_plus"] = p.n_plus;
  j["n_minus"] = p.n_minus;
  j["c_pp"] = p.c_pp;
  j["c_pm"] = p.c_pm;
  j["c_mp"] = p.c_mp;
  j["c_mm"] = p.c_mm;
  j["nu_plus"] = p.nu_plus;
  j["nu_minus"] = p.nu_minus;
  j["a_plus"] = p.a_plus;
  j["a_minus"] = p.a_minus;
  j["seed"] = seed;
  return j;
}

json report_json(const AssumptionReport& r) {
  json j;
  j["cond1"] = r.cond1;
  j["cond2"] = r.cond2;
  j["cond3"] = r.cond3;
  j["assumption1"] = r.assumption1;
  j["assumption2"] = r.assumption2;
  j["margin1"] = r.margin1;
  j["margin2"] = r.margin2;
  j["margin3"] = r.margin3;
  j["nu_equal"] = r.nu_equal;
  j["weight_det"] = r.weight_det;
  j["spectral_radius"] = r.spectral_radius;
  j["subcritical"] = r.subcritical;
  return j;
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot open output file '" + path + "'");
  out << body;
  if (!out) throw RuntimeFailure("failed writing output file '" + path + "'");
}

std::pair<double, double> parse_pair(const std::string& text, const std::string& flag) {
  const std::size_t comma = text.find(',');
  if (comma == std::string::npos)
    throw ConfigError(flag + " expects 'X,Y', got '" + text + "'");
  try {
    return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
  } catch (...) {
    throw ConfigError(flag + " expects two numbers, got '" + text + "'");
  }
}

std::vector<double> parse_double_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (...) {
      throw ConfigError(flag + " expects comma-separated numbers, got '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(flag + " is empty");
  return out;
}

struct VarySpec {
  std::string key;
  double lo = 0.0, hi = 0.0, step = 0.0;
  std::vector<double> values() const {
    std::vector<double> out;
    for (int k = 0;; ++k) {
      const double v = lo + k * step;
      if (v > hi + 1e-9 * step) break;
      out.push_back(v);
    }
    return out;
  }
};

std::vector<VarySpec> parse_vary(const std::string& text) {
  std::vector<VarySpec> specs;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const std::size_t eq = part.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--vary expects key=lo:hi:step, got '" + part + "'");
    VarySpec spec;
    spec.key = part.substr(0, eq);
    const std::string range = part.substr(eq + 1);
    const std::size_t c1 = range.find(':');
    const std::size_t c2 = range.find(':', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ConfigError("--vary range must be lo:hi:step, got '" + range + "'");
    try {
      spec.lo = std::stod(range.substr(0, c1));
      spec.hi = std::stod(range.substr(c1 + 1, c2 - c1 - 1));
      spec.step = std::stod(range.substr(c2 + 1));
    } catch (...) {
      throw ConfigError("--vary range must be numeric, got '" + range + "'");
    }
    if (!(spec.step > 0.0)) throw ConfigError("--vary step must be positive");
    if (spec.hi < spec.lo) throw ConfigError("--vary needs hi >= lo");
    static const char* allowed[] = {"c_pp", "c_pm",     "c_mp",     "c_mm",
                                    "nu_plus", "nu_minus", "a_plus", "a_minus"};
    bool ok = false;
    for (const char* a : allowed) ok = ok || spec.key == a;
    if (!ok) throw ConfigError("--vary cannot vary key '" + spec.key + "'");
    specs.push_back(spec);
  }
  if (specs.empty()) throw ConfigError("--vary is empty");
  return specs;
}

void apply_vary(RunConfig& cfg, const std::string& key, double value) {
  if (key == "c_pp") cfg.c_pp = value;
  else if (key == "c_pm") cfg.c_pm = value;
  else if (key == "c_mp") cfg.c_mp = value;
  else if (key == "c_mm") cfg.c_mm = value;
  else if (key == "nu_plus") cfg.nu_plus = value;
  else if (key == "nu_minus") cfg.nu_minus = value;
  else if (key == "a_plus") { cfg.a_plus = std::vector<double>{value}; cfg.a_plus_scalar = true; }
  else if (key == "a_minus") { cfg.a_minus = std::vector<double>{value}; cfg.a_minus_scalar = true; }
}

int run_check(const std::string& config_path) {
  const RunConfig cfg = parse_config(config_path);
  const ModelParams params = build_params(cfg);
  const AssumptionReport rep = check_assumption_one(params);

  json j;
  j["config"] = config_echo(params, cfg.seed.value_or(0));
  j["report"] = report_json(rep);
  json warnings = json::array();
  if (rep.nu_equal && rep.weight_det != 0.0) {
    const double scale = std::max(std::abs(params.c_pp * params.c_mm),
                                  std::abs(params.c_mp * params.c_pm));
    if (std::abs(rep.weight_det) < 1e-12 * scale)
      warnings.push_back("coupling determinant is within 1e-12 of singular; "
                         "the non-degeneracy check may not be robust");
  }
  j["warnings"] = warnings;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_simulate(const std::string& config_path, std::optional<double> horizon_flag,
                 std::optional<std::uint64_t> seed_flag, std::optional<double> sample_dt_flag,
                 const std::string& out_path, const std::string& events_path) {
  const RunConfig cfg = parse_config(config_path);
  const ModelParams params = build_params(cfg);

  std::optional<double> horizon = horizon_flag ? horizon_flag : cfg.horizon;
  if (!horizon) throw ConfigError("horizon required (flag --horizon or config key)");
  const std::uint64_t seed = seed_flag ? *seed_flag : cfg.seed.value_or(0);
  const std::optional<double> sample_dt = sample_dt_flag ? sample_dt_flag : cfg.sample_dt;

  SimulateOptions opt;
  opt.sample_dt = sample_dt;
  if (cfg.max_events) opt.max_events = *cfg.max_events;
  const SystemState init{0.0, cfg.x0.value_or(0.0), cfg.y0.value_or(0.0)};

  const Trajectory traj = simulate(params, init, *horizon, RngContract{seed, 0}, opt);

  std::vector<SystemState> rows;
  if (sample_dt) {
    rows = traj.samples;
    if (rows.empty() || rows.back().t != traj.final_state.t) rows.push_back(traj.final_state);
  } else {
    rows = {traj.initial_state, traj.final_state};
  }
  std::ostringstream states;
  write_states_csv(states, rows);
  write_file(out_path, states.str());

  if (!events_path.empty()) {
    std::ostringstream events;
    write_events_csv(events, traj.events);
    write_file(events_path, events.str());
  }
  return 0;
}

int run_drift(const std::string& config_path, double extent, double step,
              std::optional<double> kappa, const std::string& out_path) {
  const RunConfig cfg = parse_config(config_path);
  const ModelParams params = build_params(cfg);
  const LyapunovConfig lcfg = choose_pq(params);
  const DriftReport rep = verify_drift(params, lcfg, extent, step, std::nullopt, kappa);

  json j;
  j["config"] = config_echo(params, cfg.seed.value_or(0));
  j["lyapunov"] = {{"p", lcfg.p},
                   {"q", lcfg.q},
                   {"c_star_pp", lcfg.c_star_pp},
                   {"c_star_mm", lcfg.c_star_mm},
                   {"delta_star", lcfg.delta_star}};
  json quadrants = json::array();
  for (Quadrant quad : {Quadrant::PP, Quadrant::PM, Quadrant::MP, Quadrant::MM}) {
    const QuadrantCoeffs closed = quadrant_drift_coeffs(quad, params, lcfg);
    const NumericFit fit = fit_numeric_coeffs(quad, params, lcfg);
    quadrants.push_back(
        {{"quadrant", quadrant_name(quad)},
         {"closed_form", {{"a", closed.a}, {"b", closed.b}, {"d", closed.d}}},
         {"fitted",
          {{"a", fit.coeffs.a},
           {"b", fit.coeffs.b},
           {"d", fit.coeffs.d},
           {"e", fit.e},
           {"f", fit.f},
           {"g0", fit.g0},
           {"max_abs_residual", fit.max_abs_residual}}}});
  }
  j["quadrants"] = quadrants;
  json violations = json::array();
  for (const DriftViolation& v : rep.violations)
    violations.push_back({{"x", v.x}, {"y", v.y}, {"excess", v.excess}});
  j["drift"] = {{"kappa", rep.kappa},     {"c", rep.c},
                {"K", rep.K},             {"n_violations", rep.n_violations},
                {"violations", violations}, {"grid_extent", rep.grid_extent},
                {"grid_step", rep.grid_step}};
  write_file(out_path, j.dump(2) + "\n");
  return 0;
}

int run_converge(const std::string& config_path, const std::string& start_a_text,
                 const std::string& start_b_text, std::uint64_t replicates,
                 const std::string& horizons_text, const std::string& g_name,
                 std::optional<std::uint64_t> seed_flag, const std::string& out_path) {
  const RunConfig cfg = parse_config(config_path);
  const ModelParams params = build_params(cfg);
  const auto [ax, ay] = parse_pair(start_a_text, "--start-a");
  const auto [bx, by] = parse_pair(start_b_text, "--start-b");
  const std::vector<double> horizons = parse_double_list(horizons_text, "--horizons");
  const std::uint64_t seed = seed_flag ? *seed_flag : cfg.seed.value_or(0);

  TestFunction g = TestFunction::x();
  std::optional<LyapunovConfig> lcfg;
  if (g_name == "x") {
    g = TestFunction::x();
  } else if (g_name == "y") {
    g = TestFunction::y();
  } else if (g_name == "V") {
    g = TestFunction::v();
    lcfg = choose_pq(params);
  } else {
    throw ConfigError("--g must be one of x, y, V");
  }

  SimulateOptions opt;
  if (cfg.max_events) opt.max_events = *cfg.max_events;
  const ConvergenceReport rep =
      two_start_gap(params, SystemState{0.0, ax, ay}, SystemState{0.0, bx, by}, g, horizons,
                    replicates, RngContract{seed, 0}, lcfg, opt);

  std::ostringstream csv;
  csv << "horizon,gap,se_combined,mean_a,mean_b,se_a,se_b,significant,fitted_rate\n";
  for (std::size_t h = 0; h < rep.horizons.size(); ++h) {
    csv << format_double(rep.horizons[h]) << ',' << format_double(rep.gap[h]) << ','
        << format_double(rep.se_combined[h]) << ',' << format_double(rep.mean_a[h]) << ','
        << format_double(rep.mean_b[h]) << ',' << format_double(rep.se_a[h]) << ','
        << format_double(rep.se_b[h]) << ',' << (rep.significant[h] ? 1 : 0) << ','
        << (std::isnan(rep.fitted_rate) ? "" : format_double(rep.fitted_rate)) << '\n';
  }
  write_file(out_path, csv.str());
  return 0;
}

int run_minorize(const std::string& config_path, double t_end, const std::string& z_text,
                 std::uint64_t samples, int bins, std::optional<std::uint64_t> seed_flag,
                 const std::string& out_path) {
  const RunConfig cfg = parse_config(config_path);
  const ModelParams params = build_params(cfg);
  const auto [zx, zy] = parse_pair(z_text, "--z");
  const std::uint64_t seed = seed_flag ? *seed_flag : cfg.seed.value_or(0);

  const MinorizationReport rep = minorization_sample(params, SystemState{0.0, zx, zy}, t_end,
                                                     samples, bins, RngContract{seed, 0});

  json j;
  j["config"] = config_echo(params, seed);
  j["z"] = {zx, zy};
  j["T"] = t_end;
  j["samples"] = samples;
  j["bins"] = rep.bins;
  j["det_c"] = rep.det_c;
  j["w_lo"] = rep.w_lo;
  j["w_hi"] = rep.w_hi;
  json emp = json::array(), ana = json::array();
  for (int i = 0; i < rep.bins; ++i) {
    json emp_row = json::array(), ana_row = json::array();
    for (int jj = 0; jj < rep.bins; ++jj) {
      emp_row.push_back(rep.empirical_density[static_cast<std::size_t>(i) * rep.bins + jj]);
      ana_row.push_back(rep.analytic_density[static_cast<std::size_t>(i) * rep.bins + jj]);
    }
    emp.push_back(emp_row);
    ana.push_back(ana_row);
  }
  j["empirical_density"] = emp;
  j["analytic_density"] = ana;
  j["sup_rel_error_on_bulk"] = rep.sup_rel_error_on_bulk;
  j["bulk_threshold"] = rep.bulk_threshold;
  j["empirical_integral"] = rep.empirical_integral;
  j["analytic_integral"] = rep.analytic_integral;
  j["n_outside"] = rep.n_outside;
  write_file(out_path, j.dump(2) + "\n");
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& vary_text,
              const std::string& out_path) {
  const RunConfig base = parse_config(config_path);
  const std::vector<VarySpec> specs = parse_vary(vary_text);

  std::vector<std::vector<double>> grids;
  grids.reserve(specs.size());
  for (const VarySpec& s : specs) grids.push_back(s.values());

  std::ostringstream csv;
  for (const VarySpec& s : specs) csv << s.key << ',';
  csv << "valid,cond1,cond2,cond3,assumption1,assumption2,margin1,margin2,margin3,"
         "nu_equal,weight_det,spectral_radius,subcritical\n";

  std::vector<std::size_t> idx(specs.size(), 0);
  while (true) {
    RunConfig cfg = base;
    for (std::size_t k = 0; k < specs.size(); ++k)
      apply_vary(cfg, specs[k].key, grids[k][idx[k]]);
    for (std::size_t k = 0; k < specs.size(); ++k) csv << format_double(grids[k][idx[k]]) << ',';
    try {
      const ModelParams params = build_params(cfg);
      const AssumptionReport r = check_assumption_one(params);
      csv << 1 << ',' << r.cond1 << ',' << r.cond2 << ',' << r.cond3 << ',' << r.assumption1
          << ',' << r.assumption2 << ',' << format_double(r.margin1) << ','
          << format_double(r.margin2) << ',' << format_double(r.margin3) << ',' << r.nu_equal
          << ',' << format_double(r.weight_det) << ',' << format_double(r.spectral_radius) << ','
          << r.subcritical << '\n';
    } catch (const ValidationError&) {
      csv << 0 << ",,,,,,,,,,,,\n";
    }
    // odometer over the grid
    std::size_t k = 0;
    for (; k < specs.size(); ++k) {
      if (++idx[k] < grids[k].size()) break;
      idx[k] = 0;
    }
    if (k == specs.size()) break;
  }
  write_file(out_path, csv.str());
  return 0;
}

}  // namespace

int dispatch(int argc, char** argv) {
  CLI::App app{"Exact simulation and stability analysis of a two-population "
               "excitatory/inhibitory Hawkes system with exponential kernels"};
  app.require_subcommand(1);

  std::string check_config;
  auto* check = app.add_subcommand("check", "evaluate the stability checks; JSON to stdout");
  check->add_option("--config", check_config, "config file")->required();

  std::string sim_config, sim_out, sim_events;
  std::optional<double> sim_horizon, sim_sample_dt;
  std::optional<std::uint64_t> sim_seed;
  auto* sim = app.add_subcommand("simulate", "sample one exact trajectory to CSV");
  sim->add_option("--config", sim_config, "config file")->required();
  sim->add_option("--horizon", sim_horizon, "end time (overrides config)");
  sim->add_option("--seed", sim_seed, "RNG seed (overrides config)");
  sim->add_option("--sample-dt", sim_sample_dt, "state sampling grid step");
  sim->add_option("--out", sim_out, "states CSV path")->required();
  sim->add_option("--events", sim_events, "events CSV path");

  std::string drift_config, drift_out;
  double drift_extent = 50.0, drift_step = 0.25;
  std::optional<double> drift_kappa;
  auto* drift = app.add_subcommand("drift", "verify the drift inequality on a grid");
  drift->add_option("--config", drift_config, "config file")->required();
  drift->add_option("--extent", drift_extent, "grid extent (l1 radius)");
  drift->add_option("--step", drift_step, "grid step");
  drift->add_option("--kappa", drift_kappa, "drift rate (default half the asymptotic rate)");
  drift->add_option("--out", drift_out, "report JSON path")->required();

  std::string conv_config, conv_out, conv_a, conv_b, conv_horizons, conv_g = "x";
  std::uint64_t conv_replicates = 0;
  std::optional<std::uint64_t> conv_seed;
  auto* conv = app.add_subcommand("converge", "two-start mixing gap estimates to CSV");
  conv->add_option("--config", conv_config, "config file")->required();
  conv->add_option("--start-a", conv_a, "first start 'X,Y'")->required();
  conv->add_option("--start-b", conv_b, "second start 'X,Y'")->required();
  conv->add_option("--replicates", conv_replicates, "replicates per start (>= 100)")->required();
  conv->add_option("--horizons", conv_horizons, "comma-separated horizons")->required();
  conv->add_option("--g", conv_g, "test function: x, y or V");
  conv->add_option("--seed", conv_seed, "RNG seed (overrides config)");
  conv->add_option("--out", conv_out, "CSV path")->required();

  std::string minor_config, minor_out, minor_z;
  double minor_t = 0.0;
  std::uint64_t minor_samples = 0;
  int minor_bins = 8;
  std::optional<std::uint64_t> minor_seed;
  auto* minor = app.add_subcommand("minorize", "two-jump endpoint density check to JSON");
  minor->add_option("--config", minor_config, "config file")->required();
  minor->add_option("--T", minor_t, "window length")->required();
  minor->add_option("--z", minor_z, "start point 'X,Y'")->required();
  minor->add_option("--samples", minor_samples, "sample count")->required();
  minor->add_option("--bins", minor_bins, "histogram bins per axis");
  minor->add_option("--seed", minor_seed, "RNG seed (overrides config)");
  minor->add_option("--out", minor_out, "report JSON path")->required();

  std::string sweep_config, sweep_out, sweep_vary;
  auto* sweep = app.add_subcommand("sweep", "stability checks over a parameter grid to CSV");
  sweep->add_option("--config", sweep_config, "config file")->required();
  sweep->add_option("--vary", sweep_vary, "key=lo:hi:step[,key=...]")->required();
  sweep->add_option("--out", sweep_out, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (check->parsed()) return run_check(check_config);
    if (sim->parsed())
      return run_simulate(sim_config, sim_horizon, sim_seed, sim_sample_dt, sim_out, sim_events);
    if (drift->parsed()) return run_drift(drift_config, drift_extent, drift_step, drift_kappa, drift_out);
    if (conv->parsed())
      return run_converge(conv_config, conv_a, conv_b, conv_replicates, conv_horizons, conv_g,
                          conv_seed, conv_out);
    if (minor->parsed())
      return run_minorize(minor_config, minor_t, minor_z, minor_samples, minor_bins, minor_seed,
                          minor_out);
    if (sweep->parsed()) return run_sweep(sweep_config, sweep_vary, sweep_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}

int main(int argc, char** argv) { return dispatch(argc, argv); }
