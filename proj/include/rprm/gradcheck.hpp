#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "rprm/param_store.hpp"

namespace rprm {

struct GradCheckSlot {
  std::string name;
  double max_rel_err = 0.0;
  int worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckSlot> slots;
  double max_rel_err = 0.0;

  bool pass(double tolerance) const { return max_rel_err < tolerance; }

  std::string summary(double tolerance) const {
    std::string out;
    char line[256];
    for (const auto& s : slots) {
      std::snprintf(line, sizeof(line), "%-16s max_rel_err=%.3e  %s\n", s.name.c_str(),
                    s.max_rel_err, s.max_rel_err < tolerance ? "ok" : "FAIL");
      out += line;
    }
    return out;
  }
};

// Central-difference check of reverse-mode gradients.
//
// `eval(with_grad)` must evaluate the loss at the store's current parameters
// and, when with_grad is true, accumulate gradients into the store. The
// numeric estimate (f(x+h) - f(x-h)) / 2h is compared elementwise with a
// max(|analytic|, |numeric|, 1e-8) denominator.
inline GradCheckReport grad_check(ParameterStore& store,
                                  const std::function<double(bool)>& eval, double h) {
  store.zero_grad();
  eval(true);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(size_t(store.num_slots()));
  for (const auto& s : store.slots()) analytic.push_back(s.grad);
  store.zero_grad();

  GradCheckReport report;
  for (int i = 0; i < store.num_slots(); ++i) {
    Slot& s = store.slot(i);
    GradCheckSlot r;
    r.name = s.name;
    for (size_t k = 0; k < s.value.size(); ++k) {
      const double x0 = s.value[k];
      s.value[k] = x0 + h;
      const double fp = eval(false);
      s.value[k] = x0 - h;
      const double fm = eval(false);
      s.value[k] = x0;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[size_t(i)][k];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(a - numeric) / denom;
      if (rel > r.max_rel_err) {
        r.max_rel_err = rel;
        r.worst_index = int(k);
        r.analytic = a;
        r.numeric = numeric;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, r.max_rel_err);
    report.slots.push_back(std::move(r));
  }
  return report;
}

}  // namespace rprm
