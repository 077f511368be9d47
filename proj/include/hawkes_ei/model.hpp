#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "hawkes_ei/errors.hpp"

namespace hawkes_ei {

inline double positive_part(double x) { return x > 0.0 ? x : 0.0; }

// Parameters of the two-population system: an excitatory group "+" of n_plus
// units and an inhibitory group "-" of n_minus units. Population potentials
// decay exponentially at rates nu_plus / nu_minus; a jump of a "+" unit adds
// (c_pp/n_plus, c_pm/n_plus) to the potentials, a "-" jump adds
// (c_mp/n_minus, c_mm/n_minus). Each unit fires at its baseline plus the
// positive part of its population potential.
//
// Immutable after validation; safe to share across threads.
struct ModelParams {
  std::int64_t n_plus = 1;
  std::int64_t n_minus = 1;
  double c_pp = 0.0;  // + self-coupling, >= 0
  double c_pm = 0.0;  // + -> - coupling, >= 0
  double c_mp = 0.0;  // - -> + coupling, <= 0
  double c_mm = 0.0;  // - self-coupling, <= 0
  double nu_plus = 1.0;
  double nu_minus = 1.0;
  std::vector<double> a_plus;   // per-unit baseline rates, each > 0
  std::vector<double> a_minus;

  double baseline_sum_plus() const {
    return std::accumulate(a_plus.begin(), a_plus.end(), 0.0);
  }
  double baseline_sum_minus() const {
    return std::accumulate(a_minus.begin(), a_minus.end(), 0.0);
  }
};

// Net per-event growth rates after subtracting leakage. c_star_mm < 0 for
// every valid parameter set.
struct EffectiveWeights {
  double c_star_pp = 0.0;
  double c_star_mm = 0.0;
};

// The 2x2 offspring matrix; row-major entries, all >= 0.
struct WeightMatrix {
  double a11 = 0.0, a12 = 0.0;
  double a21 = 0.0, a22 = 0.0;
};

// Outcome of the stability checks. cond1..cond3 are the three balance
// inequalities; margin1..margin3 are their raw slacks (> 0 iff the condition
// holds), exposed so callers can judge how close a parameter set sits to the
// boundary. assumption2 is the non-degeneracy check; weight_det is the
// determinant of [[c_pp, c_mp], [c_pm, c_mm]] (decisive when nu_equal).
struct AssumptionReport {
  bool cond1 = false;
  bool cond2 = false;
  bool cond3 = false;
  bool assumption1 = false;
  bool assumption2 = false;
  double margin1 = 0.0;
  double margin2 = 0.0;
  double margin3 = 0.0;
  bool nu_equal = false;
  double weight_det = 0.0;
  double spectral_radius = 0.0;
  bool subcritical = false;
};

// Checks the sign, positivity and shape constraints and returns the record
// unchanged. Throws, naming the first violated constraint, in the order:
// counts, weight signs, leakage rates, baseline lengths, baseline values.
inline ModelParams validate_params(ModelParams raw) {
  if (raw.n_plus < 1) throw NonPositiveRate("n_plus");
  if (raw.n_minus < 1) throw NonPositiveRate("n_minus");
  if (!(raw.c_pp >= 0.0)) throw SignViolation("c_pp", ">= 0");
  if (!(raw.c_pm >= 0.0)) throw SignViolation("c_pm", ">= 0");
  if (!(raw.c_mp <= 0.0)) throw SignViolation("c_mp", "<= 0");
  if (!(raw.c_mm <= 0.0)) throw SignViolation("c_mm", "<= 0");
  if (!(raw.nu_plus > 0.0) || !std::isfinite(raw.nu_plus)) throw NonPositiveRate("nu_plus");
  if (!(raw.nu_minus > 0.0) || !std::isfinite(raw.nu_minus)) throw NonPositiveRate("nu_minus");
  if (raw.a_plus.size() != static_cast<std::size_t>(raw.n_plus))
    throw LengthMismatch("a_plus", static_cast<std::size_t>(raw.n_plus), raw.a_plus.size());
  if (raw.a_minus.size() != static_cast<std::size_t>(raw.n_minus))
    throw LengthMismatch("a_minus", static_cast<std::size_t>(raw.n_minus), raw.a_minus.size());
  for (double a : raw.a_plus)
    if (!(a > 0.0) || !std::isfinite(a)) throw NonPositiveRate("a_plus");
  for (double a : raw.a_minus)
    if (!(a > 0.0) || !std::isfinite(a)) throw NonPositiveRate("a_minus");
  return raw;
}

inline EffectiveWeights effective_weights(const ModelParams& p) {
  return {p.c_pp - p.nu_plus, p.c_mm - p.nu_minus};
}

inline WeightMatrix weight_matrix(const ModelParams& p) {
  return {p.c_pp / p.nu_plus, std::abs(p.c_mp) / p.nu_plus,
          p.c_pm / p.nu_minus, std::abs(p.c_mm) / p.nu_minus};
}

// Largest eigenvalue modulus of a 2x2 matrix via the closed form. A complex
// pair has modulus sqrt(det); nonnegative matrices always land in the real
// branch.
inline double spectral_radius(const WeightMatrix& m) {
  const double t = m.a11 + m.a22;
  const double d = m.a11 * m.a22 - m.a12 * m.a21;
  const double disc = t * t - 4.0 * d;
  if (disc >= 0.0) {
    const double root = std::sqrt(disc);
    return std::max(std::abs((t + root) / 2.0), std::abs((t - root) / 2.0));
  }
  return std::sqrt(d);
}

inline double spectral_radius(const ModelParams& p) {
  return spectral_radius(weight_matrix(p));
}

// det [[c_pp, c_mp], [c_pm, c_mm]]: the two coupling vectors are linearly
// dependent exactly when this vanishes.
inline double coupling_determinant(const ModelParams& p) {
  return p.c_pp * p.c_mm - p.c_mp * p.c_pm;
}

// True iff nu_plus != nu_minus, or the coupling vectors (c_pp, c_pm) and
// (c_mp, c_mm) are linearly independent. Comparisons are exact; near-singular
// determinants are the caller's concern (the CLI warns).
inline bool check_assumption_two(const ModelParams& p) {
  if (p.nu_plus != p.nu_minus) return true;
  return coupling_determinant(p) != 0.0;
}

// Evaluates the three balance inequalities (strictly; equality fails) along
// with the non-degeneracy check and the offspring spectral radius.
inline AssumptionReport check_assumption_one(const ModelParams& p) {
  const EffectiveWeights w = effective_weights(p);
  const double delta = w.c_star_pp - w.c_star_mm;
  AssumptionReport r;
  r.margin1 = -(w.c_star_pp + w.c_star_mm);
  r.margin2 = 4.0 * p.c_pm * std::abs(p.c_mp) - delta * delta;
  r.margin3 = delta;
  r.cond1 = r.margin1 > 0.0;
  r.cond2 = r.margin2 > 0.0;
  r.cond3 = r.margin3 > 0.0;
  r.assumption1 = r.cond1 && r.cond2 && r.cond3;
  r.nu_equal = p.nu_plus == p.nu_minus;
  r.weight_det = coupling_determinant(p);
  r.assumption2 = check_assumption_two(p);
  r.spectral_radius = spectral_radius(p);
  r.subcritical = r.spectral_radius < 1.0;
  return r;
}

// Multiplies the four coupling weights by c and both leakage rates by eps;
// counts and baselines are untouched. The offspring matrix scales by c/eps.
inline ModelParams scale_params(const ModelParams& p, double c, double eps) {
  if (!(c > 0.0) || !std::isfinite(c)) throw Error("scale factor C must be > 0");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw Error("scale factor eps must be > 0");
  ModelParams out = p;
  out.c_pp *= c;
  out.c_pm *= c;
  out.c_mp *= c;
  out.c_mm *= c;
  out.nu_plus *= eps;
  out.nu_minus *= eps;
  return validate_params(out);
}

}  // namespace hawkes_ei
