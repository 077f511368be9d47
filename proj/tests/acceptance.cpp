// Acceptance suite: runs every release criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exits nonzero if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hawkes_ei/diagnostics.hpp"
#include "hawkes_ei/io.hpp"
#include "hawkes_ei/lyapunov.hpp"
#include "hawkes_ei/model.hpp"
#include "hawkes_ei/simulator.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace hawkes_ei;
using test_support::p0;
using test_support::p1;

namespace {

constexpr std::uint64_t kSeeds[5] = {100, 104, 108, 113, 123};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1. Balanced and non-degenerate yet supercritical.
Outcome separation_witness() {
  const AssumptionReport r = check_assumption_one(p0());
  std::ostringstream d;
  d << "rho=" << r.spectral_radius;
  return {r.assumption1 && r.assumption2 && std::abs(r.spectral_radius - 5.0) <= 1e-9 &&
              !r.subcritical,
          d.str()};
}

// 2. Offspring radius scales by C/eps while the balance conditions persist.
Outcome scaling_law() {
  const ModelParams base = p1();
  const double rho = spectral_radius(base);
  double worst = 0.0;
  bool balanced = true;
  for (double c : {1.5, 2.0, 10.0}) {
    for (double e : {1.0, 0.5, 0.1}) {
      const ModelParams scaled = scale_params(base, c, e);
      balanced = balanced && check_assumption_one(scaled).assumption1;
      const double expected = rho * c / e;
      worst = std::max(worst,
                       std::abs(spectral_radius(scaled) - expected) / expected);
    }
  }
  std::ostringstream d;
  d << "max rel err " << worst;
  return {balanced && worst <= 1e-12, d.str()};
}

// 3. Closed-form quadrant coefficients against the least-squares fit.
Outcome coefficient_oracle() {
  Rng rng({301, 0});
  std::vector<ModelParams> sets{p0()};
  for (int i = 0; i < 20; ++i) sets.push_back(test_support::random_balanced_params(rng));
  double worst = 0.0;
  for (const ModelParams& p : sets) {
    const LyapunovConfig cfg = choose_pq(p);
    for (Quadrant quad : {Quadrant::PP, Quadrant::PM, Quadrant::MP, Quadrant::MM}) {
      const QuadrantCoeffs closed = quadrant_drift_coeffs(quad, p, cfg);
      const NumericFit fit = fit_numeric_coeffs(quad, p, cfg);
      worst = std::max({worst, std::abs(fit.coeffs.a - closed.a) / std::abs(closed.a),
                        std::abs(fit.coeffs.b - closed.b) / std::abs(closed.b),
                        std::abs(fit.coeffs.d - closed.d) / std::abs(closed.d)});
    }
  }
  std::ostringstream d;
  d << "21 parameter sets, max rel err " << worst;
  return {worst <= 1e-6, d.str()};
}

// 4. The drift inequality holds outside some K <= 50 at kappa = 1.
Outcome drift_inequality() {
  const ModelParams p = p0();
  const LyapunovConfig cfg = choose_pq(p);
  try {
    const DriftReport rep = verify_drift(p, cfg, 50.0, 0.25, std::nullopt, 1.0);
    std::ostringstream d;
    d << "K=" << rep.K << " c=" << rep.c << " violations=" << rep.n_violations;
    return {rep.n_violations == 0 && rep.K <= 50.0, d.str()};
  } catch (const Error& e) {
    return {false, e.what()};
  }
}

// 5. Zero-coupling runs are exactly Poisson: KS on inter-event times, count
// within 4 sigma.
Outcome thinning_exactness() {
  const ModelParams z = test_support::zero_weight_params();
  double min_p = 1.0;
  double worst_count_dev = 0.0;
  for (std::uint64_t seed : kSeeds) {
    const Trajectory traj = simulate(z, SystemState{}, 1000.0, {seed, 0});
    worst_count_dev = std::max(
        worst_count_dev, std::abs(static_cast<double>(traj.events.size()) - 2000.0));
    for (Population pop : {Population::Plus, Population::Minus}) {
      std::vector<double> waits;
      double last = 0.0;
      for (const EventRecord& e : traj.events) {
        if (e.pop != pop) continue;
        waits.push_back(e.t - last);
        last = e.t;
      }
      const double ks = test_support::ks_statistic_exponential(waits, 1.0);
      min_p = std::min(min_p, test_support::kolmogorov_p_value(ks, waits.size()));
    }
  }
  std::ostringstream d;
  d << "min KS p " << min_p << ", max |count-2000| " << worst_count_dev;
  return {min_p > 0.01 && worst_count_dev <= 4.0 * std::sqrt(2000.0), d.str()};
}

// 6. Supercritical offspring radius, stable long-run averages.
Outcome supercritical_stability() {
  const ModelParams p = p0();
  const LyapunovConfig cfg = choose_pq(p);
  double worst = 0.0;
  try {
    for (std::uint64_t seed : kSeeds) {
      const ErgodicReport rep = ergodic_stats(p, cfg, 10000.0, {seed, 0}, 0.0);
      worst = std::max(worst,
                       std::abs(rep.second_half_avg_V - rep.time_avg_V) / rep.time_avg_V);
    }
  } catch (const ExplosionGuard& e) {
    return {false, std::string("explosion guard tripped: ") + e.what()};
  }
  std::ostringstream d;
  d << "max |second half - full| / full = " << worst;
  return {worst <= 0.10, d.str()};
}

// 7. Distant starts are indistinguishable in mean by horizon 20.
Outcome two_start_mixing() {
  const ConvergenceReport rep =
      two_start_gap(p0(), SystemState{0.0, 10.0, 10.0}, SystemState{0.0, -10.0, -10.0},
                    TestFunction::x(), {20.0}, 1000, {701, 0});
  std::ostringstream d;
  d << "gap " << rep.gap[0] << " vs 3*se " << 3.0 * rep.se_combined[0];
  return {rep.gap[0] <= 3.0 * rep.se_combined[0], d.str()};
}

// 8. Conditioned two-jump endpoint density matches the closed form.
Outcome minorization_density_check() {
  const MinorizationReport rep =
      minorization_sample(p0(), SystemState{}, 1.0, 1000000, 8, {801, 0});
  std::ostringstream d;
  d << "sup rel err " << rep.sup_rel_error_on_bulk << ", integrals "
    << rep.empirical_integral << "/" << rep.analytic_integral;
  return {rep.sup_rel_error_on_bulk <= 0.05 && std::abs(rep.empirical_integral - 1.0) <= 0.02 &&
              std::abs(rep.analytic_integral - 1.0) <= 0.02,
          d.str()};
}

// 9. Degenerate regime: the distance to the invariant line decays as e^{-t}.
Outcome degenerate_collapse() {
  const ModelParams p = test_support::degenerate_line_params();
  const auto series = h_distance_series(p, SystemState{0.0, 1.0, -1.0}, 20.0, {901, 0}, 0.05);
  const double d0 = series.front().distance;
  double worst = 0.0;
  for (const auto& pt : series) {
    const double expected = d0 * std::exp(-pt.t);
    worst = std::max(worst, std::abs(pt.distance - expected) / expected);
  }
  std::ostringstream d;
  d << series.size() << " samples, max rel err " << worst;
  return {worst <= 1e-9, d.str()};
}

// 10. The four-component split projects onto the planar process pathwise.
Outcome lifted_projection() {
  const ModelParams p = p0();
  SimulateOptions opt;
  opt.sample_dt = 0.25;
  const RngContract contract{1001, 0};
  const LiftedTrajectory lifted = simulate_lifted(p, LiftedState{}, 100.0, contract, opt);
  const Trajectory planar = simulate(p, SystemState{}, 100.0, contract, opt);
  if (lifted.events.size() != planar.events.size())
    return {false, "event sequences desynchronised"};
  double worst = 0.0;
  for (std::size_t i = 0; i < lifted.post_jump_states.size(); ++i) {
    worst = std::max(worst, std::abs(lifted.post_jump_states[i].proj_plus() -
                                     planar.post_jump_states[i].x_plus));
    worst = std::max(worst, std::abs(lifted.post_jump_states[i].proj_minus() -
                                     planar.post_jump_states[i].x_minus));
  }
  for (std::size_t i = 0; i < lifted.samples.size(); ++i) {
    worst = std::max(worst, std::abs(lifted.samples[i].proj_plus() - planar.samples[i].x_plus));
    worst =
        std::max(worst, std::abs(lifted.samples[i].proj_minus() - planar.samples[i].x_minus));
  }
  std::ostringstream d;
  d << lifted.events.size() << " events, max deviation " << worst;
  return {worst <= 1e-9, d.str()};
}

// 11. The CLI writes byte-identical CSVs for identical config + seed.
Outcome cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / "hawkes_ei_acceptance";
  fs::create_directories(dir);
  const std::string config = std::string(HAWKES_EI_CONFIG_DIR) + "/p0.txt";
  auto run = [&](const std::string& tag) {
    const std::string cmd = std::string(HAWKES_EI_CLI_PATH) + " simulate --config " + config +
                            " --horizon 200 --seed 99 --sample-dt 0.5 --out " +
                            (dir / ("s" + tag + ".csv")).string() + " --events " +
                            (dir / ("e" + tag + ".csv")).string() + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) && WEXITSTATUS(status) == 0;
  };
  if (!run("1") || !run("2")) return {false, "cli run failed"};
  const bool states_equal = read_file(dir / "s1.csv") == read_file(dir / "s2.csv");
  const bool events_equal = read_file(dir / "e1.csv") == read_file(dir / "e2.csv");
  const bool nonempty = read_file(dir / "e1.csv").size() > 100;
  return {states_equal && events_equal && nonempty,
          states_equal ? "byte-identical CSVs" : "CSVs differ"};
}

// 12. Closed-form regeneration event probability against a raw-measure
// Monte Carlo scatter.
Outcome event_probability() {
  const ModelParams p = p0();
  const double T = 0.5, M = 1.0;
  const std::uint64_t trials = 1000000;
  const double closed = event_E_probability(p, T, M);
  const double mc = test_support::event_e_mc(p, T, M, trials, {1201, 0});
  const double sigma = std::sqrt(closed * (1.0 - closed) / static_cast<double>(trials));
  std::ostringstream d;
  d << "closed " << closed << " mc " << mc << " (" << std::abs(mc - closed) / sigma
    << " sigma)";
  return {std::abs(mc - closed) <= 3.0 * sigma, d.str()};
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "separation witness", 1.0, separation_witness},
      {2, "scaling law", 1.0, scaling_law},
      {3, "drift coefficient oracle", 10.0, coefficient_oracle},
      {4, "drift inequality", 30.0, drift_inequality},
      {5, "thinning exactness", 5.0, thinning_exactness},
      {6, "supercritical-yet-stable simulation", 60.0, supercritical_stability},
      {7, "two-start mixing", 60.0, two_start_mixing},
      {8, "minorization density", 60.0, minorization_density_check},
      {9, "degenerate H-collapse", 5.0, degenerate_collapse},
      {10, "lifted-process projection", 5.0, lifted_projection},
      {11, "determinism", 5.0, cli_determinism},
      {12, "event-E probability", 30.0, event_probability},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = elapsed < c.budget_seconds;
    const bool pass = outcome.pass && in_budget;
    if (!pass) ++failures;
    std::printf("[%s] %2d. %-38s %7.2fs  %s%s\n", pass ? "PASS" : "FAIL", c.number, c.name,
                elapsed, outcome.detail.c_str(),
                in_budget ? "" : " (exceeded runtime budget)");
    std::fflush(stdout);
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all 12 criteria passed\n");
  return 0;
}
