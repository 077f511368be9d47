#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include "hawkes_ei/errors.hpp"
#include "hawkes_ei/lyapunov.hpp"
#include "hawkes_ei/model.hpp"
#include "hawkes_ei/rng.hpp"
#include "hawkes_ei/simulator.hpp"

namespace hawkes_ei {

namespace detail {

inline unsigned max_threads() {
  if (const char* env = std::getenv("HAWKES_EI_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

// Runs f(0..n-1); each index owns its output slot, so results are identical
// for any thread count. The first exception wins and is rethrown.
template <class F>
void parallel_for(std::uint64_t n, F&& f) {
  const std::uint64_t nt = std::min<std::uint64_t>(max_threads(), n);
  if (nt <= 1) {
    for (std::uint64_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::uint64_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(nt);
  for (std::uint64_t t = 0; t < nt; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

// Closed-form integral of exp(-lambda s) over [s1, s2].
inline double decay_integral(double lambda, double s1, double s2) {
  return (std::exp(-lambda * s1) - std::exp(-lambda * s2)) / lambda;
}

// Time integrals of x, x^2, y, y^2 and V over a window, accumulated segment by
// segment. Along one inter-jump segment both coordinates keep their sign, so
// the V branch is fixed and every term is an exact exponential integral.
struct SegmentIntegrals {
  double ix = 0.0, ixx = 0.0, iy = 0.0, iyy = 0.0, iv = 0.0;

  void add(const SystemState& anchor, double seg_end, double lo, double hi,
           const ModelParams& p, const LyapunovConfig& cfg) {
    const double u1 = std::max(lo, anchor.t);
    const double u2 = std::min(hi, seg_end);
    if (!(u2 > u1)) return;
    const double s1 = u1 - anchor.t;
    const double s2 = u2 - anchor.t;
    const double x0 = anchor.x_plus;
    const double y0 = anchor.x_minus;
    const double jx = decay_integral(p.nu_plus, s1, s2);
    const double jxx = decay_integral(2.0 * p.nu_plus, s1, s2);
    const double jy = decay_integral(p.nu_minus, s1, s2);
    const double jyy = decay_integral(2.0 * p.nu_minus, s1, s2);
    const double jxy = decay_integral(p.nu_plus + p.nu_minus, s1, s2);
    ix += x0 * jx;
    ixx += x0 * x0 * jxx;
    iy += y0 * jy;
    iyy += y0 * y0 * jyy;
    const QuadForm b = v_branch(quadrant_of(x0, y0), p, cfg);
    iv += b.xx * x0 * x0 * jxx + b.yy * y0 * y0 * jyy + b.xy * x0 * y0 * jxy;
  }
};

template <class F>
void for_each_segment(const Trajectory& traj, double horizon, F&& f) {
  const SystemState* anchor = &traj.initial_state;
  for (const auto& st : traj.post_jump_states) {
    f(*anchor, st.t);
    anchor = &st;
  }
  f(*anchor, horizon);
}

}  // namespace detail

struct MomentEstimate {
  double mean = 0.0;
  double variance = 0.0;
};

struct ErgodicReport {
  double time_avg_V = 0.0;         // average of V over [burn_in*T, T]
  double second_half_avg_V = 0.0;  // average over the second half of that window
  double max_abs_state = 0.0;      // sup of |x| + |y| along the path
  MomentEstimate x_plus_moments;
  MomentEstimate x_minus_moments;
  std::uint64_t n_events = 0;
  double window_start = 0.0;
  double window_end = 0.0;
};

// Simulates from the origin and computes time averages by exact
// piecewise-exponential integration between jumps; no quadrature error.
inline ErgodicReport ergodic_stats(const ModelParams& params, const LyapunovConfig& cfg,
                                   double horizon, RngContract contract,
                                   double burn_in_fraction,
                                   const SimulateOptions& opt = {}) {
  if (!(burn_in_fraction >= 0.0) || !(burn_in_fraction < 1.0))
    throw PreconditionError("burn_in_fraction must lie in [0, 1)");
  const Trajectory traj = simulate(params, SystemState{}, horizon, contract, opt);

  const double lo = burn_in_fraction * horizon;
  const double hi = horizon;
  const double mid = (lo + hi) / 2.0;

  detail::SegmentIntegrals full, second;
  double max_l1 = std::abs(traj.initial_state.x_plus) + std::abs(traj.initial_state.x_minus);
  detail::for_each_segment(traj, horizon, [&](const SystemState& anchor, double seg_end) {
    full.add(anchor, seg_end, lo, hi, params, cfg);
    second.add(anchor, seg_end, mid, hi, params, cfg);
    max_l1 = std::max(max_l1, std::abs(anchor.x_plus) + std::abs(anchor.x_minus));
  });

  const double w = hi - lo;
  const double wh = hi - mid;
  ErgodicReport out;
  out.time_avg_V = full.iv / w;
  out.second_half_avg_V = second.iv / wh;
  out.max_abs_state = max_l1;
  out.x_plus_moments.mean = full.ix / w;
  out.x_plus_moments.variance = full.ixx / w - out.x_plus_moments.mean * out.x_plus_moments.mean;
  out.x_minus_moments.mean = full.iy / w;
  out.x_minus_moments.variance =
      full.iyy / w - out.x_minus_moments.mean * out.x_minus_moments.mean;
  out.n_events = traj.events.size();
  out.window_start = lo;
  out.window_end = hi;
  return out;
}

enum class TestFnKind { X, Y, V, Box };

struct TestFunction {
  TestFnKind kind = TestFnKind::X;
  double box_x_lo = 0.0, box_x_hi = 0.0, box_y_lo = 0.0, box_y_hi = 0.0;

  static TestFunction x() { return {TestFnKind::X}; }
  static TestFunction y() { return {TestFnKind::Y}; }
  static TestFunction v() { return {TestFnKind::V}; }
  static TestFunction box(double x_lo, double x_hi, double y_lo, double y_hi) {
    return {TestFnKind::Box, x_lo, x_hi, y_lo, y_hi};
  }

  double eval(const SystemState& s, const ModelParams& params,
              const LyapunovConfig* cfg) const {
    switch (kind) {
      case TestFnKind::X: return s.x_plus;
      case TestFnKind::Y: return s.x_minus;
      case TestFnKind::V: return eval_v(s.x_plus, s.x_minus, *cfg, params);
      case TestFnKind::Box:
        return (s.x_plus >= box_x_lo && s.x_plus <= box_x_hi && s.x_minus >= box_y_lo &&
                s.x_minus <= box_y_hi)
                   ? 1.0
                   : 0.0;
    }
    return 0.0;
  }
};

struct ConvergenceReport {
  std::vector<double> horizons;
  std::vector<double> mean_a, mean_b;
  std::vector<double> se_a, se_b, se_combined;
  std::vector<double> gap;            // |mean_a - mean_b|
  std::vector<bool> significant;      // gap > 3 * se_combined
  double fitted_rate = std::numeric_limits<double>::quiet_NaN();  // slope of log gap vs T
};

// Estimates |E_a g(X_T) - E_b g(X_T)| per horizon from independent replicate
// pairs (streams 2k and 2k+1 off the base contract). The decay rate is fitted
// only over horizons where the gap clears 3 combined standard errors.
inline ConvergenceReport two_start_gap(const ModelParams& params, SystemState start_a,
                                       SystemState start_b, const TestFunction& g,
                                       const std::vector<double>& horizons,
                                       std::uint64_t replicates, RngContract base,
                                       const std::optional<LyapunovConfig>& cfg = {},
                                       const SimulateOptions& opt = {}) {
  if (replicates < 100) throw PreconditionError("two_start_gap needs at least 100 replicates");
  if (horizons.empty()) throw PreconditionError("two_start_gap needs at least one horizon");
  if (g.kind == TestFnKind::V && !cfg)
    throw PreconditionError("test function V needs a LyapunovConfig");

  const double t_max = *std::max_element(horizons.begin(), horizons.end());
  const std::size_t nh = horizons.size();
  const LyapunovConfig* cfg_ptr = cfg ? &*cfg : nullptr;

  std::vector<double> va(replicates * nh), vb(replicates * nh);
  detail::parallel_for(replicates, [&](std::uint64_t k) {
    const Trajectory ta =
        simulate(params, start_a, t_max, base.with_stream(base.stream_index + 2 * k), opt);
    const Trajectory tb =
        simulate(params, start_b, t_max, base.with_stream(base.stream_index + 2 * k + 1), opt);
    for (std::size_t h = 0; h < nh; ++h) {
      va[k * nh + h] = g.eval(state_at(ta, horizons[h], params), params, cfg_ptr);
      vb[k * nh + h] = g.eval(state_at(tb, horizons[h], params), params, cfg_ptr);
    }
  });

  ConvergenceReport out;
  out.horizons = horizons;
  const double r = static_cast<double>(replicates);
  for (std::size_t h = 0; h < nh; ++h) {
    double ma = 0.0, mb = 0.0;
    for (std::uint64_t k = 0; k < replicates; ++k) {
      ma += va[k * nh + h];
      mb += vb[k * nh + h];
    }
    ma /= r;
    mb /= r;
    double sa = 0.0, sb = 0.0;
    for (std::uint64_t k = 0; k < replicates; ++k) {
      sa += (va[k * nh + h] - ma) * (va[k * nh + h] - ma);
      sb += (vb[k * nh + h] - mb) * (vb[k * nh + h] - mb);
    }
    const double sea = std::sqrt(sa / (r - 1.0) / r);
    const double seb = std::sqrt(sb / (r - 1.0) / r);
    out.mean_a.push_back(ma);
    out.mean_b.push_back(mb);
    out.se_a.push_back(sea);
    out.se_b.push_back(seb);
    out.se_combined.push_back(std::sqrt(sea * sea + seb * seb));
    out.gap.push_back(std::abs(ma - mb));
    out.significant.push_back(out.gap.back() > 3.0 * out.se_combined.back());
  }

  // least-squares slope of log(gap) against T over the significant horizons
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t m = 0;
  for (std::size_t h = 0; h < nh; ++h) {
    if (!out.significant[h] || !(out.gap[h] > 0.0)) continue;
    const double lx = out.horizons[h];
    const double ly = std::log(out.gap[h]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m >= 2) {
    const double dm = static_cast<double>(m);
    out.fitted_rate = (dm * sxy - sx * sy) / (dm * sxx - sx * sx);
  }
  return out;
}

struct DistancePoint {
  double t = 0.0;
  double distance = 0.0;
};

// Distance of the state to the invariant line H = span{(c_pp, c_pm)} along an
// exact trajectory, in the degenerate regime (equal leakage rates, collinear
// coupling vectors). Both jump vectors lie in H, so the normal residual is
// only scaled by the flow; it is propagated in that decomposed form, which
// keeps the series accurate even when the residual has decayed far below the
// coordinate magnitudes.
inline std::vector<DistancePoint> h_distance_series(const ModelParams& params, SystemState init,
                                                    double horizon, RngContract contract,
                                                    double sample_dt,
                                                    const SimulateOptions& opt = {}) {
  if (params.nu_plus != params.nu_minus)
    throw NotDegenerate("h_distance_series requires nu_plus == nu_minus");
  if (params.c_pp == 0.0 && params.c_pm == 0.0)
    throw NotDegenerate("h_distance_series requires (c_pp, c_pm) != 0");
  if (coupling_determinant(params) != 0.0)
    throw NotDegenerate("h_distance_series requires collinear coupling vectors");
  if (!(sample_dt > 0.0)) throw PreconditionError("sample_dt must be positive");

  SimulateOptions run_opt = opt;
  run_opt.sample_dt.reset();
  const Trajectory traj = simulate(params, init, horizon, contract, run_opt);

  const double nu = params.nu_plus;
  const double norm = std::hypot(params.c_pm, params.c_pp);
  // Normal components of the two jump vectors, via the undivided determinant
  // forms: exactly zero under the collinearity precondition.
  const double jump_plus =
      (params.c_pp * params.c_pm - params.c_pm * params.c_pp) /
      (norm * static_cast<double>(params.n_plus));
  const double jump_minus =
      coupling_determinant(params) / (norm * static_cast<double>(params.n_minus));

  double residual = (-params.c_pm * init.x_plus + params.c_pp * init.x_minus) / norm;
  double anchor_t = init.t;
  std::size_t next_event = 0;

  std::vector<DistancePoint> out;
  for (std::uint64_t k = 0;; ++k) {
    const double tau = init.t + static_cast<double>(k) * sample_dt;
    if (tau > horizon) break;
    while (next_event < traj.events.size() && traj.events[next_event].t <= tau) {
      const EventRecord& ev = traj.events[next_event];
      residual = residual * std::exp(-nu * (ev.t - anchor_t)) +
                 (ev.pop == Population::Plus ? jump_plus : jump_minus);
      anchor_t = ev.t;
      ++next_event;
    }
    out.push_back({tau, std::abs(residual * std::exp(-nu * (tau - anchor_t)))});
  }
  return out;
}

struct MinorizationReport {
  int bins = 0;
  double w_lo = 0.0, w_hi = 1.0;           // pullback grid bounds, per axis
  std::vector<double> empirical_density;   // row-major bins x bins
  std::vector<double> analytic_density;
  double sup_rel_error_on_bulk = 0.0;
  double bulk_threshold = 0.0;             // 10% of the analytic maximum
  double empirical_integral = 0.0;
  double analytic_integral = 0.0;
  std::uint64_t n_outside = 0;             // samples off the grid (round-off only)
  double det_c = 0.0;
};

// Endpoint density of the conditioned two-jump construction at v; zero off the
// support z e^{-nu T} + C [e^{-nu T}, 1]^2.
inline double minorization_density(const ModelParams& p, const SystemState& z, double T,
                                   double vx, double vy) {
  const double nu = p.nu_plus;
  const double det = coupling_determinant(p);
  const double decay = std::exp(-nu * T);
  const double dx = vx - z.x_plus * decay;
  const double dy = vy - z.x_minus * decay;
  const double w1 = (p.c_mm * dx - p.c_mp * dy) / det;
  const double w2 = (-p.c_pm * dx + p.c_pp * dy) / det;
  if (w1 < decay || w1 > 1.0 || w2 < decay || w2 > 1.0) return 0.0;
  return 1.0 / (nu * nu * T * T * w1 * w2 * std::abs(det));
}

// Samples the conditioned endpoint Y_z(T) = z e^{-nu T} + W_+ (c_pp, c_pm)
// + W_- (c_mp, c_mm) with W = e^{-nu U}, U uniform on [0, T], and histograms
// the samples against the closed-form density. Binning happens on the
// pullback square [e^{-nu T}, 1]^2 (samples mapped back through C^{-1}), where
// the bins tile the support exactly and per-bin analytic masses are
// closed-form log ratios.
inline MinorizationReport minorization_sample(const ModelParams& params, const SystemState& z,
                                              double T, std::uint64_t samples, int bins,
                                              RngContract contract) {
  if (params.n_plus != 1 || params.n_minus != 1)
    throw PreconditionError("minorization_sample requires one unit per population");
  if (params.nu_plus != params.nu_minus)
    throw PreconditionError("minorization_sample requires nu_plus == nu_minus");
  if (!(T > 0.0)) throw PreconditionError("T must be positive");
  if (bins < 1 || samples < 1) throw PreconditionError("need bins >= 1 and samples >= 1");
  const double det = coupling_determinant(params);
  if (det == 0.0) throw SingularC("coupling matrix is singular; no two-jump density exists");

  const double nu = params.nu_plus;
  const double w_lo = std::exp(-nu * T);
  const double w_hi = 1.0;
  const double bw = (w_hi - w_lo) / bins;
  const double shift_x = z.x_plus * std::exp(-nu * T);
  const double shift_y = z.x_minus * std::exp(-nu * T);

  Rng rng(contract);
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(bins) * bins, 0);
  std::uint64_t outside = 0;
  for (std::uint64_t s = 0; s < samples; ++s) {
    const double w_plus = std::exp(-nu * (T * rng.uniform()));
    const double w_minus = std::exp(-nu * (T * rng.uniform()));
    const double vx = shift_x + w_plus * params.c_pp + w_minus * params.c_mp;
    const double vy = shift_y + w_plus * params.c_pm + w_minus * params.c_mm;
    // map back through C^{-1}
    const double dx = vx - shift_x;
    const double dy = vy - shift_y;
    const double w1 = (params.c_mm * dx - params.c_mp * dy) / det;
    const double w2 = (-params.c_pm * dx + params.c_pp * dy) / det;
    if (w1 < w_lo - 1e-9 || w1 > w_hi + 1e-9 || w2 < w_lo - 1e-9 || w2 > w_hi + 1e-9) {
      ++outside;
      continue;
    }
    const auto clamp_bin = [&](double w) {
      const auto i = static_cast<std::int64_t>((w - w_lo) / bw);
      return static_cast<std::size_t>(std::clamp<std::int64_t>(i, 0, bins - 1));
    };
    counts[clamp_bin(w1) * bins + clamp_bin(w2)] += 1;
  }

  MinorizationReport out;
  out.bins = bins;
  out.w_lo = w_lo;
  out.w_hi = w_hi;
  out.det_c = det;
  out.n_outside = outside;
  out.empirical_density.resize(counts.size());
  out.analytic_density.resize(counts.size());

  const double cell_area = bw * bw;
  const double total = static_cast<double>(samples);
  std::vector<double> log_ratio(static_cast<std::size_t>(bins));
  for (int i = 0; i < bins; ++i) {
    const double lo = w_lo + i * bw;
    const double hi = (i + 1 == bins) ? w_hi : w_lo + (i + 1) * bw;
    log_ratio[static_cast<std::size_t>(i)] = std::log(hi / lo);
  }
  const double nt2 = nu * T * nu * T;
  double max_density = 0.0;
  for (int i = 0; i < bins; ++i) {
    for (int j = 0; j < bins; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * bins + j;
      const double mass = log_ratio[static_cast<std::size_t>(i)] *
                          log_ratio[static_cast<std::size_t>(j)] / nt2;
      out.analytic_density[idx] = mass / cell_area;
      out.empirical_density[idx] = static_cast<double>(counts[idx]) / (total * cell_area);
      out.analytic_integral += mass;
      out.empirical_integral += static_cast<double>(counts[idx]) / total;
      max_density = std::max(max_density, out.analytic_density[idx]);
    }
  }
  out.bulk_threshold = 0.1 * max_density;
  for (std::size_t idx = 0; idx < counts.size(); ++idx) {
    if (out.analytic_density[idx] < out.bulk_threshold) continue;
    const double rel =
        std::abs(out.empirical_density[idx] - out.analytic_density[idx]) /
        out.analytic_density[idx];
    out.sup_rel_error_on_bulk = std::max(out.sup_rel_error_on_bulk, rel);
  }
  return out;
}

// Probability of the regeneration event: exactly one point under each
// baseline strip and none in the guard strips of width c_pp + M resp.
// c_pm + M, over the window [0, T]. Single-unit populations.
inline double event_E_probability(const ModelParams& params, double T, double M) {
  if (params.n_plus != 1 || params.n_minus != 1)
    throw PreconditionError("event_E_probability requires one unit per population");
  const double ap = params.a_plus[0];
  const double am = params.a_minus[0];
  const double plus_factor = ap * T * std::exp(-ap * T) * std::exp(-(params.c_pp + M) * T);
  const double minus_factor = am * T * std::exp(-am * T) * std::exp(-(params.c_pm + M) * T);
  return plus_factor * minus_factor;
}

}  // namespace hawkes_ei
