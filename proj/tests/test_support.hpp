#pragma once

// Shared fixtures and independent oracles for the test suites. The oracles
// (Riemann quadrature, KS statistic, Simpson integration, brute-force event
// probability) deliberately avoid the code paths they are used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "hawkes_ei/diagnostics.hpp"
#include "hawkes_ei/lyapunov.hpp"
#include "hawkes_ei/model.hpp"
#include "hawkes_ei/rng.hpp"
#include "hawkes_ei/simulator.hpp"

namespace test_support {

using namespace hawkes_ei;

// Balanced reference system: supercritical offspring matrix, stable dynamics.
inline ModelParams p0() {
  ModelParams p;
  p.n_plus = 1;
  p.n_minus = 1;
  p.c_pp = 1.0;
  p.c_pm = 4.0;
  p.c_mp = -4.0;
  p.c_mm = -1.0;
  p.nu_plus = 1.0;
  p.nu_minus = 1.0;
  p.a_plus = {1.0};
  p.a_minus = {1.0};
  return validate_params(p);
}

// Like p0 but with c_mm = -2: satisfies the balance conditions together with
// c_pp + c_mm < 0, so the whole scaling family stays balanced.
inline ModelParams p1() {
  ModelParams p = p0();
  p.c_mm = -2.0;
  return validate_params(p);
}

// Equal leakage rates and collinear coupling vectors (determinant exactly 0).
inline ModelParams degenerate_line_params() {
  ModelParams p;
  p.n_plus = 1;
  p.n_minus = 1;
  p.c_pp = 1.0;
  p.c_pm = 2.0;
  p.c_mp = -0.5;
  p.c_mm = -1.0;
  p.nu_plus = 1.0;
  p.nu_minus = 1.0;
  p.a_plus = {1.0};
  p.a_minus = {1.0};
  return validate_params(p);
}

inline ModelParams zero_weight_params() {
  ModelParams p;
  p.n_plus = 1;
  p.n_minus = 1;
  p.nu_plus = 1.0;
  p.nu_minus = 1.0;
  p.a_plus = {1.0};
  p.a_minus = {1.0};
  return validate_params(p);
}

// Valid signs and shapes, no further structure.
inline ModelParams random_valid_params(Rng& rng) {
  ModelParams p;
  p.n_plus = 1 + static_cast<std::int64_t>(rng.uniform() * 3.0);
  p.n_minus = 1 + static_cast<std::int64_t>(rng.uniform() * 3.0);
  p.c_pp = 3.0 * rng.uniform();
  p.c_pm = 6.0 * rng.uniform();
  p.c_mp = -6.0 * rng.uniform();
  p.c_mm = -3.0 * rng.uniform();
  p.nu_plus = 0.3 + 2.2 * rng.uniform();
  p.nu_minus = 0.3 + 2.2 * rng.uniform();
  for (std::int64_t i = 0; i < p.n_plus; ++i) p.a_plus.push_back(0.5 + 1.5 * rng.uniform());
  for (std::int64_t j = 0; j < p.n_minus; ++j) p.a_minus.push_back(0.5 + 1.5 * rng.uniform());
  return validate_params(p);
}

// Rejection-samples parameter sets satisfying the balance conditions.
inline ModelParams random_balanced_params(Rng& rng) {
  for (int tries = 0; tries < 100000; ++tries) {
    ModelParams p;
    p.n_plus = 1 + static_cast<std::int64_t>(rng.uniform() * 3.0);
    p.n_minus = 1 + static_cast<std::int64_t>(rng.uniform() * 3.0);
    p.c_pp = 3.0 * rng.uniform();
    p.c_pm = 0.2 + 5.8 * rng.uniform();
    p.c_mp = -(0.2 + 5.8 * rng.uniform());
    p.c_mm = -3.0 * rng.uniform();
    p.nu_plus = 0.3 + 2.2 * rng.uniform();
    p.nu_minus = 0.3 + 2.2 * rng.uniform();
    for (std::int64_t i = 0; i < p.n_plus; ++i) p.a_plus.push_back(0.5 + 1.5 * rng.uniform());
    for (std::int64_t j = 0; j < p.n_minus; ++j) p.a_minus.push_back(0.5 + 1.5 * rng.uniform());
    p = validate_params(p);
    if (check_assumption_one(p).assumption1) return p;
  }
  throw std::runtime_error("rejection sampling found no balanced parameter set");
}

// Balanced, equal leakage rates and c_pp + c_mm < 0 (the scaling family).
inline ModelParams random_balanced_equal_nu(Rng& rng) {
  for (int tries = 0; tries < 100000; ++tries) {
    ModelParams p = random_balanced_params(rng);
    p.nu_minus = p.nu_plus;
    if (p.c_pp + p.c_mm >= 0.0) continue;
    if (check_assumption_one(p).assumption1) return p;
  }
  throw std::runtime_error("rejection sampling found no equal-rate balanced set");
}

// --- Kolmogorov-Smirnov against Exponential(rate) ---------------------------

inline double ks_statistic_exponential(std::vector<double> samples, double rate) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = 1.0 - std::exp(-rate * samples[i]);
    d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - cdf));
  }
  return d;
}

// Asymptotic Kolmogorov tail probability with Stephens' finite-n correction.
inline double kolmogorov_p_value(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

// --- quadrature oracles ------------------------------------------------------

struct RiemannAverages {
  double avg_x = 0.0, avg_xx = 0.0, avg_y = 0.0, avg_yy = 0.0, avg_v = 0.0;
};

// Midpoint-rule time averages over [lo, hi], stepping at most dt and never
// across a jump. Quadrature-based counterpart of the exact segment integrals.
inline RiemannAverages riemann_averages(const Trajectory& traj, const ModelParams& params,
                                        const LyapunovConfig& cfg, double lo, double hi,
                                        double dt) {
  RiemannAverages acc;
  double weight = 0.0;
  auto add_segment = [&](const SystemState& anchor, double seg_end) {
    const double u1 = std::max(lo, anchor.t);
    const double u2 = std::min(hi, seg_end);
    if (!(u2 > u1)) return;
    const auto steps = static_cast<std::uint64_t>(std::ceil((u2 - u1) / dt));
    const double h = (u2 - u1) / static_cast<double>(steps);
    for (std::uint64_t i = 0; i < steps; ++i) {
      const double s = u1 + (static_cast<double>(i) + 0.5) * h - anchor.t;
      const SystemState mid = flow(anchor, s, params);
      acc.avg_x += mid.x_plus * h;
      acc.avg_xx += mid.x_plus * mid.x_plus * h;
      acc.avg_y += mid.x_minus * h;
      acc.avg_yy += mid.x_minus * mid.x_minus * h;
      acc.avg_v += eval_v(mid.x_plus, mid.x_minus, cfg, params) * h;
    }
    weight += u2 - u1;
  };
  const SystemState* anchor = &traj.initial_state;
  for (const auto& st : traj.post_jump_states) {
    add_segment(*anchor, st.t);
    anchor = &st;
  }
  add_segment(*anchor, hi);
  acc.avg_x /= weight;
  acc.avg_xx /= weight;
  acc.avg_y /= weight;
  acc.avg_yy /= weight;
  acc.avg_v /= weight;
  return acc;
}

// Composite Simpson on a rectangle; n even per axis.
template <class F>
double simpson2d(F&& f, double x0, double x1, double y0, double y1, int n = 200) {
  const double hx = (x1 - x0) / n;
  const double hy = (y1 - y0) / n;
  auto w = [n](int i) { return i == 0 || i == n ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0); };
  double sum = 0.0;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) sum += w(i) * w(j) * f(x0 + i * hx, y0 + j * hy);
  return sum * hx * hy / 9.0;
}

// --- rank statistics ---------------------------------------------------------

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t k = 0; k < order.size(); ++k) r[order[k]] = static_cast<double>(k + 1);
  return r;
}

inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::vector<double> rx = ranks(xs);
  const std::vector<double> ry = ranks(ys);
  const double n = static_cast<double>(xs.size());
  double mean = (n + 1.0) / 2.0;
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += (rx[i] - mean) * (ry[i] - mean);
    dx += (rx[i] - mean) * (rx[i] - mean);
    dy += (ry[i] - mean) * (ry[i] - mean);
  }
  return num / std::sqrt(dx * dy);
}

// --- brute-force oracle for the regeneration event ---------------------------

// Scatters raw Poisson points on [0,T] x [0, a + c + M) per population and
// classifies them by strip; no use of the closed-form factorisation.
inline double event_e_mc(const ModelParams& params, double T, double M, std::uint64_t trials,
                         RngContract contract) {
  Rng rng(contract);
  const double ap = params.a_plus[0];
  const double am = params.a_minus[0];
  std::uint64_t hits = 0;
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    bool ok = true;
    const double heights[2][2] = {{ap, params.c_pp + M}, {am, params.c_pm + M}};
    for (int pop = 0; pop < 2 && ok; ++pop) {
      const double total_height = heights[pop][0] + heights[pop][1];
      const std::uint64_t n = rng.poisson(T * total_height);
      std::uint64_t base = 0, guard = 0;
      for (std::uint64_t k = 0; k < n; ++k) {
        const double z = total_height * rng.uniform();
        if (z < heights[pop][0])
          ++base;
        else
          ++guard;
      }
      ok = base == 1 && guard == 0;
    }
    if (ok) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

}  // namespace test_support
