#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "hawkes_ei/errors.hpp"
#include "hawkes_ei/model.hpp"
#include "hawkes_ei/rng.hpp"

namespace hawkes_ei {

enum class Population : std::uint8_t { Plus, Minus };

inline char population_char(Population p) { return p == Population::Plus ? '+' : '-'; }

// The pair of population potentials at a point in time.
struct SystemState {
  double t = 0.0;
  double x_plus = 0.0;
  double x_minus = 0.0;
};

// One accepted jump.
struct EventRecord {
  double t = 0.0;
  Population pop = Population::Plus;
  std::int64_t unit = 0;  // index within its population
};

// Four-component split of the potentials by source population: x_pp and x_mp
// decay at nu_plus and sum to x_plus, x_pm and x_mm decay at nu_minus and sum
// to x_minus.
struct LiftedState {
  double t = 0.0;
  double x_pp = 0.0;
  double x_pm = 0.0;
  double x_mp = 0.0;
  double x_mm = 0.0;

  double proj_plus() const { return x_pp + x_mp; }
  double proj_minus() const { return x_pm + x_mm; }
};

struct SimulateOptions {
  std::optional<double> sample_dt;           // record states on this grid
  std::uint64_t max_events = 100'000'000;    // explosion guard cap
};

// Deterministic decay over dt >= 0; exact exponentials, no discretisation.
inline SystemState flow(const SystemState& s, double dt, const ModelParams& p) {
  return {s.t + dt, s.x_plus * std::exp(-p.nu_plus * dt),
          s.x_minus * std::exp(-p.nu_minus * dt)};
}

inline LiftedState flow(const LiftedState& s, double dt, const ModelParams& p) {
  const double fp = std::exp(-p.nu_plus * dt);
  const double fm = std::exp(-p.nu_minus * dt);
  return {s.t + dt, s.x_pp * fp, s.x_pm * fm, s.x_mp * fp, s.x_mm * fm};
}

inline SystemState apply_jump(const SystemState& s, Population pop, const ModelParams& p) {
  if (pop == Population::Plus) {
    const double n = static_cast<double>(p.n_plus);
    return {s.t, s.x_plus + p.c_pp / n, s.x_minus + p.c_pm / n};
  }
  const double n = static_cast<double>(p.n_minus);
  return {s.t, s.x_plus + p.c_mp / n, s.x_minus + p.c_mm / n};
}

inline LiftedState apply_jump(const LiftedState& s, Population pop, const ModelParams& p) {
  LiftedState out = s;
  if (pop == Population::Plus) {
    const double n = static_cast<double>(p.n_plus);
    out.x_pp += p.c_pp / n;
    out.x_pm += p.c_pm / n;
  } else {
    const double n = static_cast<double>(p.n_minus);
    out.x_mp += p.c_mp / n;
    out.x_mm += p.c_mm / n;
  }
  return out;
}

// Per-unit jump rates a_i + max(potential, 0); plus units first.
struct Intensities {
  std::vector<double> per_unit;
  double total = 0.0;
};

inline Intensities intensities(const SystemState& s, const ModelParams& p) {
  Intensities out;
  out.per_unit.reserve(p.a_plus.size() + p.a_minus.size());
  const double ex = positive_part(s.x_plus);
  const double in = positive_part(s.x_minus);
  for (double a : p.a_plus) {
    out.per_unit.push_back(a + ex);
    out.total += out.per_unit.back();
  }
  for (double a : p.a_minus) {
    out.per_unit.push_back(a + in);
    out.total += out.per_unit.back();
  }
  return out;
}

template <class State>
struct BasicTrajectory {
  State initial_state{};
  State final_state{};
  std::vector<EventRecord> events;
  std::vector<State> post_jump_states;  // aligned with events
  std::vector<State> samples;           // grid states when sample_dt was set
  double max_acceptance_ratio = 0.0;
  std::uint64_t n_rejected = 0;
};

using Trajectory = BasicTrajectory<SystemState>;
using LiftedTrajectory = BasicTrajectory<LiftedState>;

namespace detail {

struct TwoDimOps {
  using State = SystemState;
  static State flowed(const State& s, double dt, const ModelParams& p) { return flow(s, dt, p); }
  static State jumped(const State& s, Population pop, const ModelParams& p) {
    return apply_jump(s, pop, p);
  }
  static double pot_plus(const State& s) { return s.x_plus; }
  static double pot_minus(const State& s) { return s.x_minus; }
};

struct LiftedOps {
  using State = LiftedState;
  static State flowed(const State& s, double dt, const ModelParams& p) { return flow(s, dt, p); }
  static State jumped(const State& s, Population pop, const ModelParams& p) {
    return apply_jump(s, pop, p);
  }
  static double pot_plus(const State& s) { return s.proj_plus(); }
  static double pot_minus(const State& s) { return s.proj_minus(); }
};

inline double total_rate(double pot_plus, double pot_minus, const ModelParams& p,
                         double base_plus, double base_minus) {
  return base_plus + static_cast<double>(p.n_plus) * positive_part(pot_plus) +
         base_minus + static_cast<double>(p.n_minus) * positive_part(pot_minus);
}

// Picks the jumping unit proportionally to the per-unit rates at the candidate
// state. threshold is u * total; the final unit absorbs the tail so a stray
// last-ulp mismatch between the walk and the precomputed total cannot fall
// through.
inline std::pair<Population, std::int64_t> select_unit(double pot_plus, double pot_minus,
                                                       const ModelParams& p, double threshold) {
  double acc = 0.0;
  const double ex = positive_part(pot_plus);
  for (std::size_t i = 0; i < p.a_plus.size(); ++i) {
    acc += p.a_plus[i] + ex;
    if (threshold <= acc) return {Population::Plus, static_cast<std::int64_t>(i)};
  }
  const double in = positive_part(pot_minus);
  for (std::size_t j = 0; j + 1 < p.a_minus.size(); ++j) {
    acc += p.a_minus[j] + in;
    if (threshold <= acc) return {Population::Minus, static_cast<std::int64_t>(j)};
  }
  return {Population::Minus, static_cast<std::int64_t>(p.a_minus.size()) - 1};
}

// Exact thinning. Each unit's rate is non-increasing along the flow (the
// positive part of the potential decays, the rest is constant), so the total
// rate at the start of an interval dominates the whole interval. Draw order
// per candidate is fixed: waiting time, acceptance uniform, then the
// unit-selection uniform only on acceptance. States between jumps are always
// computed by a single flow from the last post-jump anchor, so recorded
// samples carry no compounding round-off.
template <class Ops>
BasicTrajectory<typename Ops::State> run_thinning(const ModelParams& params,
                                                  typename Ops::State init, double horizon,
                                                  RngContract contract,
                                                  const SimulateOptions& opt) {
  using State = typename Ops::State;
  const double t0 = init.t;
  if (!(horizon > t0)) throw HorizonNonPositive("horizon must exceed the initial time");
  if (opt.sample_dt && !(*opt.sample_dt > 0.0))
    throw PreconditionError("sample_dt must be positive");

  Rng rng(contract);
  const double base_plus = params.baseline_sum_plus();
  const double base_minus = params.baseline_sum_minus();

  BasicTrajectory<State> out;
  out.initial_state = init;

  State anchor = init;
  double elapsed = 0.0;
  double lambda_bar =
      total_rate(Ops::pot_plus(anchor), Ops::pot_minus(anchor), params, base_plus, base_minus);

  const bool sampling = opt.sample_dt.has_value();
  const double dt_grid = opt.sample_dt.value_or(0.0);
  std::uint64_t grid_k = 0;
  // Emits grid states up to the limit; strict=true keeps a grid point that
  // coincides with an event time for the post-jump anchor.
  auto emit_samples = [&](double limit, bool strict) {
    if (!sampling) return;
    while (true) {
      const double tau = t0 + static_cast<double>(grid_k) * dt_grid;
      if (strict ? !(tau < limit) : !(tau <= limit)) break;
      out.samples.push_back(Ops::flowed(anchor, tau - anchor.t, params));
      ++grid_k;
    }
  };

  while (true) {
    const double wait = rng.exponential(lambda_bar);
    const double next_elapsed = elapsed + wait;
    const double t_cand = anchor.t + next_elapsed;
    if (t_cand > horizon) {
      emit_samples(horizon, false);
      out.final_state = Ops::flowed(anchor, horizon - anchor.t, params);
      break;
    }
    elapsed = next_elapsed;
    const State cand = Ops::flowed(anchor, elapsed, params);
    const double lambda_new =
        total_rate(Ops::pot_plus(cand), Ops::pot_minus(cand), params, base_plus, base_minus);
    const double ratio = lambda_new / lambda_bar;
    out.max_acceptance_ratio = std::max(out.max_acceptance_ratio, ratio);

    if (rng.uniform() <= ratio) {
      emit_samples(cand.t, true);
      const double threshold = rng.uniform() * lambda_new;
      const auto [pop, unit] =
          select_unit(Ops::pot_plus(cand), Ops::pot_minus(cand), params, threshold);
      if (out.events.size() >= opt.max_events) throw ExplosionGuard(opt.max_events, cand.t);
      out.events.push_back({cand.t, pop, unit});
      anchor = Ops::jumped(cand, pop, params);
      out.post_jump_states.push_back(anchor);
      elapsed = 0.0;
      lambda_bar = total_rate(Ops::pot_plus(anchor), Ops::pot_minus(anchor), params, base_plus,
                              base_minus);
    } else {
      ++out.n_rejected;
      lambda_bar = lambda_new;  // refreshed bound, still dominating
    }
  }
  return out;
}

}  // namespace detail

// Samples the process exactly on [init.t, horizon]. If sample_dt is set, the
// state is also recorded on the regular grid init.t + k*sample_dt via exact
// flow from the preceding jump.
inline Trajectory simulate(const ModelParams& params, SystemState init, double horizon,
                           RngContract contract, const SimulateOptions& opt = {}) {
  return detail::run_thinning<detail::TwoDimOps>(params, init, horizon, contract, opt);
}

// Same event law, driven by the identical draw sequence for a given contract,
// but evolving the four-component split. Projecting (x_pp + x_mp, x_pm + x_mm)
// reproduces the two-dimensional trajectory pathwise up to round-off.
inline LiftedTrajectory simulate_lifted(const ModelParams& params, LiftedState init,
                                        double horizon, RngContract contract,
                                        const SimulateOptions& opt = {}) {
  return detail::run_thinning<detail::LiftedOps>(params, init, horizon, contract, opt);
}

// Exact state at an arbitrary time: flow from the last jump at or before t.
// Reproduces recorded grid samples bit-for-bit.
inline SystemState state_at(const Trajectory& traj, double t, const ModelParams& params) {
  const SystemState* anchor = &traj.initial_state;
  // events are strictly increasing in t
  std::size_t lo = 0, hi = traj.events.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (traj.events[mid].t <= t)
      lo = mid + 1;
    else
      hi = mid;
  }
  if (lo > 0) anchor = &traj.post_jump_states[lo - 1];
  return flow(*anchor, t - anchor->t, params);
}

}  // namespace hawkes_ei
