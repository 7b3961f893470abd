#pragma once

#include <cmath>
#include <vector>

#include "rprm/param_store.hpp"
#include "rprm/util.hpp"

namespace rprm {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-slot first/second moment accumulators for Adam.
struct OptimizerState {
  AdamConfig cfg;
  long step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  void init(const ParameterStore& store, const AdamConfig& c = {}) {
    cfg = c;
    step = 0;
    m.clear();
    v.clear();
    for (const auto& s : store.slots()) {
      m.emplace_back(s.value.size(), 0.0);
      v.emplace_back(s.value.size(), 0.0);
    }
  }

  bool initialized_for(const ParameterStore& store) const {
    if (int(m.size()) != store.num_slots()) return false;
    for (int i = 0; i < store.num_slots(); ++i)
      if (m[size_t(i)].size() != store.slot(i).value.size()) return false;
    return true;
  }
};

// Standard bias-corrected Adam update. Consumes the accumulated gradients
// (they are cleared afterwards) and verifies the updated parameters are
// finite.
inline void adam_step(ParameterStore& store, OptimizerState& opt) {
  require(opt.initialized_for(store), "optimizer state does not match store");
  opt.step += 1;
  const double b1 = opt.cfg.beta1, b2 = opt.cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, double(opt.step));
  const double bc2 = 1.0 - std::pow(b2, double(opt.step));
  for (int i = 0; i < store.num_slots(); ++i) {
    Slot& s = store.slot(i);
    auto& mi = opt.m[size_t(i)];
    auto& vi = opt.v[size_t(i)];
    for (size_t k = 0; k < s.value.size(); ++k) {
      const double g = s.grad[k];
      mi[k] = b1 * mi[k] + (1.0 - b1) * g;
      vi[k] = b2 * vi[k] + (1.0 - b2) * g * g;
      const double mhat = mi[k] / bc1;
      const double vhat = vi[k] / bc2;
      s.value[k] -= opt.cfg.lr * mhat / (std::sqrt(vhat) + opt.cfg.eps);
      if (!std::isfinite(s.value[k]))
        fail("non-finite parameter after optimizer step in slot '" + s.name + "'");
      s.grad[k] = 0.0;
    }
  }
}

// Global-norm gradient clipping; returns true when clipping fired.
inline bool clip_grad_norm(ParameterStore& store, double max_norm) {
  if (max_norm <= 0) return false;
  const double norm = std::sqrt(store.grad_sq_norm());
  if (norm <= max_norm || norm == 0.0) return false;
  store.scale_grad(max_norm / norm);
  return true;
}

}  // namespace rprm
