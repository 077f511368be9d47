#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "hawkes_ei/errors.hpp"
#include "hawkes_ei/model.hpp"

namespace hawkes_ei {

enum class Quadrant : std::uint8_t { PP, PM, MP, MM };

inline const char* quadrant_name(Quadrant q) {
  switch (q) {
    case Quadrant::PP: return "++";
    case Quadrant::PM: return "+-";
    case Quadrant::MP: return "-+";
    case Quadrant::MM: return "--";
  }
  return "?";
}

// Axis points go to the nonnegative branch; the function is continuous across
// branch boundaries, so the choice only pins down which (identical) value is
// computed.
inline Quadrant quadrant_of(double x, double y) {
  if (x >= 0.0) return y >= 0.0 ? Quadrant::PP : Quadrant::PM;
  return y >= 0.0 ? Quadrant::MP : Quadrant::MM;
}

// Constants of the piecewise-quadratic function V: branch x^2 coefficients are
// c_pm (x >= 0) and p (x < 0), y^2 coefficients are -c_mp (y >= 0) and q
// (y < 0), and every branch shares the cross coefficient -delta_star.
struct LyapunovConfig {
  double p = 1.0;
  double q = 1.0;
  double c_star_pp = 0.0;
  double c_star_mm = 0.0;
  double delta_star = 0.0;  // c_star_pp - c_star_mm
};

// Coefficients (x^2, y^2, xy) of one quadratic branch.
struct QuadForm {
  double xx = 0.0;
  double yy = 0.0;
  double xy = 0.0;

  double eval(double x, double y) const { return xx * x * x + yy * y * y + xy * x * y; }
};

inline QuadForm v_branch(Quadrant quad, const ModelParams& params, const LyapunovConfig& cfg) {
  const double xx = (quad == Quadrant::PP || quad == Quadrant::PM) ? params.c_pm : cfg.p;
  const double yy = (quad == Quadrant::PP || quad == Quadrant::MP) ? -params.c_mp : cfg.q;
  return {xx, yy, -cfg.delta_star};
}

inline double eval_v(double x, double y, const LyapunovConfig& cfg, const ModelParams& params) {
  return v_branch(quadrant_of(x, y), params, cfg).eval(x, y);
}

// Gradient of V. The branch x^2/y^2 coefficients enter multiplied by the
// coordinate that selects them, so the gradient is continuous everywhere.
inline std::pair<double, double> grad_v(double x, double y, const LyapunovConfig& cfg,
                                        const ModelParams& params) {
  const QuadForm b = v_branch(quadrant_of(x, y), params, cfg);
  return {2.0 * b.xx * x + b.xy * y, 2.0 * b.yy * y + b.xy * x};
}

// Deterministic constant selection. The p-condition caps p from above (taking
// half the cap), the q-condition and the discriminant condition bound q from
// below (taking twice the bound), so every inequality holds with a factor-2
// margin. Throws unless the balance conditions hold: without them V is not
// coercive and no choice works.
inline LyapunovConfig choose_pq(const ModelParams& params) {
  const AssumptionReport rep = check_assumption_one(params);
  if (!rep.assumption1) throw AssumptionViolated("balance conditions fail; V is not coercive");

  const EffectiveWeights w = effective_weights(params);
  LyapunovConfig cfg;
  cfg.c_star_pp = w.c_star_pp;
  cfg.c_star_mm = w.c_star_mm;
  cfg.delta_star = w.c_star_pp - w.c_star_mm;

  const double nu_sum = params.nu_plus + params.nu_minus;
  if (params.c_mp < 0.0) {
    const double p_max = -cfg.delta_star * (params.c_mm - nu_sum) / (-2.0 * params.c_mp);
    cfg.p = p_max / 2.0;
  } else {
    // Unreachable under the balance conditions (cond2 forces c_mp < 0); any
    // positive p satisfies the vacuous constraint.
    cfg.p = 1.0;
  }

  double q_min = cfg.delta_star * cfg.delta_star / (4.0 * cfg.p);
  if (params.c_pm > 0.0) {
    const double q_min1 = -cfg.delta_star * (nu_sum - params.c_pp) / (2.0 * params.c_pm);
    q_min = std::max(q_min, q_min1);
  }
  cfg.q = 2.0 * q_min;

  const bool p_ok = -cfg.delta_star * (params.c_mm - nu_sum) + 2.0 * cfg.p * params.c_mp > 0.0;
  const bool q_ok = cfg.delta_star * (nu_sum - params.c_pp) + 2.0 * cfg.q * params.c_pm > 0.0;
  const bool disc_ok = 4.0 * cfg.p * cfg.q > cfg.delta_star * cfg.delta_star;
  if (!(cfg.p > 0.0) || !(cfg.q > 0.0) || !p_ok || !q_ok || !disc_ok)
    throw Error("internal: p/q selection failed its own invariants");
  return cfg;
}

namespace detail {

inline double sum_rate_plus(double x, const ModelParams& p) {
  return p.baseline_sum_plus() + static_cast<double>(p.n_plus) * positive_part(x);
}
inline double sum_rate_minus(double y, const ModelParams& p) {
  return p.baseline_sum_minus() + static_cast<double>(p.n_minus) * positive_part(y);
}

template <class G>
double generator_apply_impl(const ModelParams& p, G&& g, double gx, double gy, double x,
                            double y) {
  const double np = static_cast<double>(p.n_plus);
  const double nm = static_cast<double>(p.n_minus);
  const double g0 = g(x, y);
  const double jump_plus = g(x + p.c_pp / np, y + p.c_pm / np) - g0;
  const double jump_minus = g(x + p.c_mp / nm, y + p.c_mm / nm) - g0;
  return -p.nu_plus * x * gx - p.nu_minus * y * gy + sum_rate_plus(x, p) * jump_plus +
         sum_rate_minus(y, p) * jump_minus;
}

}  // namespace detail

// Generator applied to g with analytically supplied partial derivatives.
template <class G>
double generator_apply_with_grad(const ModelParams& params, G&& g, double gx, double gy,
                                 double x, double y) {
  return detail::generator_apply_impl(params, std::forward<G>(g), gx, gy, x, y);
}

// Generator applied to a generic g; partials by central differences with step
// 1e-6 * max(1, |x|, |y|).
template <class G>
double generator_apply(const ModelParams& params, G&& g, double x, double y) {
  const double h = 1e-6 * std::max({1.0, std::abs(x), std::abs(y)});
  const double gx = (g(x + h, y) - g(x - h, y)) / (2.0 * h);
  const double gy = (g(x, y + h) - g(x, y - h)) / (2.0 * h);
  return detail::generator_apply_impl(params, std::forward<G>(g), gx, gy, x, y);
}

// Generator applied to V itself, using the exact piecewise gradient.
inline double generator_apply_v(const ModelParams& params, const LyapunovConfig& cfg, double x,
                                double y) {
  const auto [gx, gy] = grad_v(x, y, cfg, params);
  return detail::generator_apply_impl(
      params, [&](double u, double v) { return eval_v(u, v, cfg, params); }, gx, gy, x, y);
}

// Quadratic part of AV deep inside one quadrant: a x^2 + b xy + d y^2.
struct QuadrantCoeffs {
  Quadrant quadrant = Quadrant::PP;
  double a = 0.0;  // x^2
  double b = 0.0;  // xy
  double d = 0.0;  // y^2
};

// Closed forms for the quadratic part of AV in each quadrant, valid where no
// single jump crosses a branch boundary. In ++ they are exactly
// (c*_pp + c*_mm) times the V branch coefficients; the xy coefficients in +-
// and -+ are the expressions made positive by the p/q selection.
inline QuadrantCoeffs quadrant_drift_coeffs(Quadrant quad, const ModelParams& params,
                                            const LyapunovConfig& cfg) {
  const AssumptionReport rep = check_assumption_one(params);
  if (!rep.assumption1)
    throw AssumptionViolated("quadrant drift coefficients require the balance conditions");

  const double s = cfg.c_star_pp + cfg.c_star_mm;
  const double nu_sum = params.nu_plus + params.nu_minus;
  QuadrantCoeffs out;
  out.quadrant = quad;
  switch (quad) {
    case Quadrant::PP:
      out.a = params.c_pm * s;
      out.b = -cfg.delta_star * s;
      out.d = -params.c_mp * s;
      break;
    case Quadrant::PM:
      out.a = params.c_pm * s;
      out.b = cfg.delta_star * (nu_sum - params.c_pp) + 2.0 * cfg.q * params.c_pm;
      out.d = -2.0 * params.nu_minus * cfg.q;
      break;
    case Quadrant::MP:
      out.a = -2.0 * params.nu_plus * cfg.p;
      out.b = cfg.delta_star * (nu_sum - params.c_mm) + 2.0 * cfg.p * params.c_mp;
      out.d = -params.c_mp * s;
      break;
    case Quadrant::MM:
      out.a = -2.0 * params.nu_plus * cfg.p;
      out.b = cfg.delta_star * nu_sum;
      out.d = -2.0 * params.nu_minus * cfg.q;
      break;
  }
  return out;
}

// Base coordinate magnitude at which fit points are placed: far enough from
// both axes that no single jump leaves the quadrant.
inline double deep_interior_scale(const ModelParams& p) {
  const double np = static_cast<double>(p.n_plus);
  const double nm = static_cast<double>(p.n_minus);
  const double max_jump = std::max({std::abs(p.c_pp) / np, std::abs(p.c_pm) / np,
                                    std::abs(p.c_mp) / nm, std::abs(p.c_mm) / nm});
  return 10.0 * (max_jump + 1.0);
}

struct NumericFit {
  QuadrantCoeffs coeffs;
  double e = 0.0;   // x coefficient of the fitted remainder
  double f = 0.0;   // y coefficient
  double g0 = 0.0;  // constant
  double max_abs_residual = 0.0;
};

namespace detail {

// Solves the 6x6 system in place; Gaussian elimination with partial pivoting.
inline std::array<double, 6> solve6(std::array<std::array<double, 6>, 6> m,
                                    std::array<double, 6> rhs) {
  for (int col = 0; col < 6; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 6; ++r)
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    if (std::abs(m[pivot][col]) < 1e-12)
      throw SingularFit("degenerate point set in quadratic fit");
    std::swap(m[col], m[pivot]);
    std::swap(rhs[col], rhs[pivot]);
    for (int r = col + 1; r < 6; ++r) {
      const double factor = m[r][col] / m[col][col];
      for (int c = col; c < 6; ++c) m[r][c] -= factor * m[col][c];
      rhs[r] -= factor * rhs[col];
    }
  }
  std::array<double, 6> x{};
  for (int r = 5; r >= 0; --r) {
    double acc = rhs[r];
    for (int c = r + 1; c < 6; ++c) acc -= m[r][c] * x[c];
    x[r] = acc / m[r][r];
  }
  return x;
}

}  // namespace detail

// Independent numeric route to the quadrant coefficients: evaluates AV at
// twelve deep-interior points and least-squares fits a full quadratic
// a x^2 + b xy + d y^2 + e x + f y + g0. AV is exactly such a polynomial on
// the sampled region, so the fit recovers the closed forms to round-off.
inline NumericFit fit_numeric_coeffs(Quadrant quad, const ModelParams& params,
                                     const LyapunovConfig& cfg) {
  const double scale = deep_interior_scale(params);
  const double sx = (quad == Quadrant::PP || quad == Quadrant::PM) ? 1.0 : -1.0;
  const double sy = (quad == Quadrant::PP || quad == Quadrant::MP) ? 1.0 : -1.0;

  constexpr std::array<std::pair<double, double>, 12> multipliers{{{1.0, 1.0},
                                                                   {2.0, 1.0},
                                                                   {1.0, 2.0},
                                                                   {2.0, 2.0},
                                                                   {3.0, 1.0},
                                                                   {1.0, 3.0},
                                                                   {3.0, 2.0},
                                                                   {2.0, 3.0},
                                                                   {3.0, 3.0},
                                                                   {1.5, 1.5},
                                                                   {2.5, 1.25},
                                                                   {1.25, 2.75}}};

  // Fit in axis units of `scale` to keep the normal matrix well conditioned.
  std::array<std::array<double, 6>, 6> normal{};
  std::array<double, 6> rhs{};
  std::array<double, 12> values{};
  for (std::size_t k = 0; k < multipliers.size(); ++k) {
    const double u = sx * multipliers[k].first;
    const double v = sy * multipliers[k].second;
    const double av = generator_apply_v(params, cfg, u * scale, v * scale);
    values[k] = av;
    const std::array<double, 6> row{u * u, u * v, v * v, u, v, 1.0};
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) normal[i][j] += row[i] * row[j];
      rhs[i] += row[i] * av;
    }
  }
  const std::array<double, 6> beta = detail::solve6(normal, rhs);

  NumericFit out;
  out.coeffs.quadrant = quad;
  out.coeffs.a = beta[0] / (scale * scale);
  out.coeffs.b = beta[1] / (scale * scale);
  out.coeffs.d = beta[2] / (scale * scale);
  out.e = beta[3] / scale;
  out.f = beta[4] / scale;
  out.g0 = beta[5];
  for (std::size_t k = 0; k < multipliers.size(); ++k) {
    const double u = sx * multipliers[k].first;
    const double v = sy * multipliers[k].second;
    const double fitted = beta[0] * u * u + beta[1] * u * v + beta[2] * v * v + beta[3] * u +
                          beta[4] * v + beta[5];
    out.max_abs_residual = std::max(out.max_abs_residual, std::abs(fitted - values[k]));
  }
  return out;
}

struct DriftViolation {
  double x = 0.0;
  double y = 0.0;
  double excess = 0.0;  // AV + kappa V at the point
};

// One verified drift triple: AV <= -kappa V outside the l1-ball of radius K,
// with c bounding AV + kappa V inside it. A report is acceptable when
// violations is empty.
struct DriftReport {
  double kappa = 0.0;
  double c = 0.0;
  double K = 0.0;
  std::vector<DriftViolation> violations;  // exterior points with AV + kappa V > 0
  std::uint64_t n_violations = 0;
  double grid_extent = 0.0;
  double grid_step = 0.0;
};

// Sweeps AV + kappa V over the lattice {(i h, j h) : |i h| + |j h| <= extent}.
// With an explicit K the report lists every exterior violation; without one, K
// doubles from 1 until the exterior is clean (DriftFailed if none of
// K = 1, 2, 4, ... < extent works). kappa defaults to |c*_pp + c*_mm| / 2.
inline DriftReport verify_drift(const ModelParams& params, const LyapunovConfig& cfg,
                                double grid_extent, double grid_step,
                                std::optional<double> k_candidate = {},
                                std::optional<double> kappa_candidate = {}) {
  const AssumptionReport rep = check_assumption_one(params);
  if (!rep.assumption1)
    throw AssumptionViolated("drift verification requires the balance conditions");
  if (!(grid_extent > 0.0) || !(grid_step > 0.0))
    throw PreconditionError("grid extent and step must be positive");
  if (k_candidate && !(grid_extent > *k_candidate && *k_candidate > 0.0))
    throw PreconditionError("need grid_extent > K_candidate > 0");

  const double kappa = kappa_candidate.value_or(std::abs(cfg.c_star_pp + cfg.c_star_mm) / 2.0);

  struct GridPoint {
    double x, y, l1, value;
  };
  std::vector<GridPoint> points;
  const auto n = static_cast<std::int64_t>(grid_extent / grid_step);
  points.reserve(static_cast<std::size_t>((2 * n + 1) * (2 * n + 1)));
  for (std::int64_t i = -n; i <= n; ++i) {
    const double x = static_cast<double>(i) * grid_step;
    for (std::int64_t j = -n; j <= n; ++j) {
      const double y = static_cast<double>(j) * grid_step;
      const double l1 = std::abs(x) + std::abs(y);
      if (l1 > grid_extent) continue;
      const double value = generator_apply_v(params, cfg, x, y) + kappa * eval_v(x, y, cfg, params);
      points.push_back({x, y, l1, value});
    }
  }

  auto build_report = [&](double K) {
    DriftReport out;
    out.kappa = kappa;
    out.K = K;
    out.grid_extent = grid_extent;
    out.grid_step = grid_step;
    double interior_sup = 0.0;
    for (const GridPoint& gp : points) {
      if (gp.l1 <= K) {
        interior_sup = std::max(interior_sup, gp.value);
      } else if (gp.value > 0.0) {
        ++out.n_violations;
        if (out.violations.size() < 1000) out.violations.push_back({gp.x, gp.y, gp.value});
      }
    }
    out.c = interior_sup;  // already clamped at 0 by initialisation
    return out;
  };

  if (k_candidate) return build_report(*k_candidate);

  for (double K = 1.0; K < grid_extent; K *= 2.0) {
    bool clean = true;
    bool exterior_nonempty = false;
    for (const GridPoint& gp : points) {
      if (gp.l1 > K) {
        exterior_nonempty = true;
        if (gp.value > 0.0) {
          clean = false;
          break;
        }
      }
    }
    if (clean && exterior_nonempty) return build_report(K);
  }
  // Doubling overshot: take the outermost violating radius itself, so the
  // exterior is clean by construction if any valid K below the extent exists.
  double k_needed = 0.0;
  for (const GridPoint& gp : points)
    if (gp.value > 0.0) k_needed = std::max(k_needed, gp.l1);
  if (k_needed > 0.0 && k_needed < grid_extent) return build_report(k_needed);
  throw DriftFailed("no violation-free K below the grid extent; raise the extent or lower kappa");
}

}  // namespace hawkes_ei
