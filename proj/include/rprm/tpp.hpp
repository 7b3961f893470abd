#pragma once

#include <cmath>
#include <limits>

#include "rprm/rng.hpp"
#include "rprm/tape.hpp"
#include "rprm/util.hpp"

// Exponential-form conditional intensity over the gap since the last event:
//
//   lambda(delta) = exp(a + w * delta),    a = v_t . h + b_t,  w = w_t
//
// with closed-form cumulative hazard, inter-event log density, survival
// function, expected-gap quadrature and exact inverse-CDF sampling. For
// w < 0 the hazard saturates at exp(a)/|w|, leaving a finite probability
// (the defect mass) that no further event ever occurs.
namespace rprm::tpp {

// Below this |w| the hazard switches to a 3-term Taylor expansion; the
// branches agree to ~1e-10 at the crossover.
inline constexpr double kTaylorW = 1e-8;

struct GapDistribution {
  double a = 0.0;  // log intensity at delta = 0
  double w = 0.0;  // slope of the log intensity, 1/days
};

// Integral of the intensity over [0, delta].
inline double cumulative_hazard(const GapDistribution& gd, double delta) {
  require(delta >= 0, "cumulative_hazard: delta must be >= 0");
  const double wd = gd.w * delta;
  if (std::fabs(gd.w) >= kTaylorW)
    return (std::exp(gd.a + wd) - std::exp(gd.a)) / gd.w;
  return delta * std::exp(gd.a) * (1.0 + wd / 2.0 + wd * wd / 6.0);
}

inline double intensity(const GapDistribution& gd, double delta) {
  require(delta >= 0, "intensity: delta must be >= 0");
  const double v = std::exp(gd.a + gd.w * delta);
  if (!std::isfinite(v)) fail("intensity overflow: exp argument too large");
  return v;
}

inline double log_density(const GapDistribution& gd, double delta) {
  require(delta > 0, "log_density: delta must be > 0");
  return (gd.a + gd.w * delta) - cumulative_hazard(gd, delta);
}

inline double survival(const GapDistribution& gd, double delta) {
  return std::exp(-cumulative_hazard(gd, delta));
}

// P(no further event ever); nonzero only for decaying intensity (w < 0).
inline double defect_mass(const GapDistribution& gd) {
  if (gd.w >= 0) return 0.0;
  return std::exp(-std::exp(gd.a) / std::fabs(gd.w));
}

struct QuadratureConfig {
  int panels = 16;
  int nodes_per_panel = 16;  // 256 nodes total by default
  double survival_cutoff = 1e-12;
};

struct GapMoments {
  double mean = 0.0;    // conditional mean given that an event occurs
  double defect = 0.0;  // probability that no event ever occurs
  bool no_event = false;  // set when the defect swallows (almost) all mass
};

namespace detail {

// 16-point Gauss-Legendre rule on [-1, 1], positive half (symmetric).
inline constexpr double kGL16X[8] = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
    0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499};
inline constexpr double kGL16W[8] = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};

// Smallest s with survival(s) - defect <= cutoff, found by doubling then
// bisection; robust across the whole (a, w) range.
inline double truncation_point(const GapDistribution& gd, double defect, double cutoff) {
  auto g = [&](double s) { return survival(gd, s) - defect; };
  double hi = 1.0;
  int guard = 0;
  while (g(hi) > cutoff && guard++ < 4000) hi *= 2.0;
  if (g(hi) > cutoff) return hi;  // hazard grows absurdly slowly; cap
  double lo = 0.0;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > cutoff)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

}  // namespace detail

// Expected gap E[delta | an event occurs], reported with the defect mass.
//
// The mean integral int_0^inf s f(s) ds is evaluated in its tail form
// int_0^s_max (S(s) - S_inf) ds, mapped onto u = exp(-s) and integrated by
// composite Gauss-Legendre panels over [exp(-s_max), 1].
inline GapMoments expected_gap(const GapDistribution& gd, const QuadratureConfig& cfg = {}) {
  require(cfg.panels >= 1 && cfg.nodes_per_panel == 16,
          "quadrature config: panels >= 1 and 16 nodes per panel supported");
  GapMoments out;
  out.defect = defect_mass(gd);
  const double event_mass = 1.0 - out.defect;
  if (event_mass < 1e-300) {
    out.no_event = true;
    out.mean = std::numeric_limits<double>::infinity();
    return out;
  }
  const double s_max = detail::truncation_point(gd, out.defect, cfg.survival_cutoff);
  const double u_min = std::exp(-s_max);  // may underflow to 0; nodes stay interior
  const double width = (1.0 - u_min) / double(cfg.panels);
  double integral = 0.0;
  for (int p = 0; p < cfg.panels; ++p) {
    const double lo = u_min + width * double(p);
    const double c = lo + 0.5 * width;
    const double hw = 0.5 * width;
    double acc = 0.0;
    for (int k = 0; k < 8; ++k) {
      for (int sign = -1; sign <= 1; sign += 2) {
        const double u = c + double(sign) * hw * detail::kGL16X[k];
        const double s = -std::log(u);
        acc += detail::kGL16W[k] * (survival(gd, s) - out.defect) / u;
      }
    }
    integral += acc * hw;
  }
  if (!std::isfinite(integral))
    fail("expected_gap: quadrature failed to produce a finite value");
  out.mean = integral / event_mass;
  return out;
}

// Median of the gap distribution; +inf when the defect mass is >= 1/2 so
// that no finite median exists.
inline double median_gap(const GapDistribution& gd) {
  constexpr double kLn2 = 0.6931471805599453;
  if (gd.w < 0 && defect_mass(gd) >= 0.5) return std::numeric_limits<double>::infinity();
  if (std::fabs(gd.w) < 1e-15) return kLn2 * std::exp(-gd.a);
  return std::log1p(gd.w * kLn2 * std::exp(-gd.a)) / gd.w;
}

struct GapSample {
  double delta = 0.0;
  bool event = true;  // false: the no-event outcome (possible when w < 0)
};

// Exact inverse-CDF sampling: solve Lambda(delta) = E with E ~ Exp(1).
inline GapSample sample_gap(const GapDistribution& gd, Rng& rng) {
  const double e = rng.exponential();
  const double x = gd.w * e * std::exp(-gd.a);
  if (gd.w < 0 && x <= -1.0) return GapSample{0.0, false};
  GapSample s;
  if (std::fabs(gd.w) < 1e-15)
    s.delta = e * std::exp(-gd.a);
  else
    s.delta = std::log1p(x) / gd.w;
  return s;
}

// Tape expression for log f(delta) used by the training losses. Mirrors
// log_density() (same Taylor branch) but with the exp arguments clamped to
// [clamp_lo, clamp_hi]; clamp events are counted on the tape.
inline Var log_density_expr(Tape& t, Var a, Var w, double delta, double clamp_lo = -40.0,
                            double clamp_hi = 40.0) {
  require(delta > 0, "log_density_expr: delta must be > 0");
  const double w_val = t.value(w);
  const Var wd = t.scale(w, delta);
  const Var log_lambda = t.add(a, wd);
  Var hazard;
  if (std::fabs(w_val) >= kTaylorW) {
    const Var e1 = t.exp(t.clamp(log_lambda, clamp_lo, clamp_hi));
    const Var e2 = t.exp(t.clamp(a, clamp_lo, clamp_hi));
    hazard = t.div(t.sub(e1, e2), w);
  } else {
    const Var ea = t.exp(t.clamp(a, clamp_lo, clamp_hi));
    const Var poly =
        t.offset(t.add(t.scale(wd, 0.5), t.scale(t.mul(wd, wd), 1.0 / 6.0)), 1.0);
    hazard = t.scale(t.mul(ea, poly), delta);
  }
  return t.sub(log_lambda, hazard);
}

}  // namespace rprm::tpp
