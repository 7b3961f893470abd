// Independent reference implementations used as oracles by the tests.
// Nothing here may call into the code paths it is checking.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

// Adaptive Simpson quadrature with absolute tolerance.
inline double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                          double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-12, int depth = 60) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

// One-sample Kolmogorov-Smirnov statistic against a CDF.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = double(samples.size());
  double d = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::fabs(double(i + 1) / n - f));
    d = std::max(d, std::fabs(double(i) / n - f));
  }
  return d;
}

// Asymptotic critical value at the 1% level.
inline double ks_critical_1pct(size_t n) { return 1.62762 / std::sqrt(double(n)); }

struct MeanErr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline MeanErr mean_stderr(const std::vector<double>& xs) {
  MeanErr out;
  if (xs.empty()) return out;
  double sum = 0;
  for (double x : xs) sum += x;
  out.mean = sum / double(xs.size());
  double sq = 0;
  for (double x : xs) sq += (x - out.mean) * (x - out.mean);
  out.stderr_ = std::sqrt(sq / double(xs.size())) / std::sqrt(double(xs.size()));
  return out;
}

// Scalar (d = 1) LSTM step written out by hand, used against the vector
// implementation.
struct ScalarLstm {
  double wt_i, u_i, b_i;
  double wt_f, u_f, b_f;
  double wt_o, u_o, b_o;
  double wt_g, u_g, b_g;
};

inline void scalar_lstm_step(const ScalarLstm& p, double x, double& h, double& c) {
  auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double i = sigmoid(p.wt_i * x + p.u_i * h + p.b_i);
  const double f = sigmoid(p.wt_f * x + p.u_f * h + p.b_f);
  const double o = sigmoid(p.wt_o * x + p.u_o * h + p.b_o);
  const double g = std::tanh(p.wt_g * x + p.u_g * h + p.b_g);
  c = f * c + i * g;
  h = o * std::tanh(c);
}

}  // namespace oracles
