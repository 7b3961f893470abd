#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "rprm/rng.hpp"
#include "rprm/util.hpp"

namespace rprm {

struct Shape {
  int rows = 1;
  int cols = 1;
  int size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

// One named trainable slot: a scalar, vector or matrix of 64-bit reals with
// a same-shaped gradient accumulator.
struct Slot {
  std::string name;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
};

class ParameterStore {
 public:
  int add(const std::string& name, Shape shape) {
    require(!name.empty(), "slot name must be non-empty");
    require(shape.rows >= 1 && shape.cols >= 1, "slot shape must be positive: " + name);
    require(index_.find(name) == index_.end(), "duplicate slot name: " + name);
    Slot s;
    s.name = name;
    s.shape = shape;
    s.value.assign(size_t(shape.size()), 0.0);
    s.grad.assign(size_t(shape.size()), 0.0);
    slots_.push_back(std::move(s));
    const int id = int(slots_.size()) - 1;
    index_[name] = id;
    return id;
  }

  int add_scalar(const std::string& name, double v = 0.0) {
    const int id = add(name, Shape{1, 1});
    slots_[size_t(id)].value[0] = v;
    return id;
  }

  int add_vector(const std::string& name, int n) { return add(name, Shape{n, 1}); }

  int add_matrix(const std::string& name, int rows, int cols) {
    return add(name, Shape{rows, cols});
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  int id(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown slot: " + name);
    return it->second;
  }

  Slot& slot(int id) { return slots_.at(size_t(id)); }
  const Slot& slot(int id) const { return slots_.at(size_t(id)); }
  Slot& at(const std::string& name) { return slot(id(name)); }
  const Slot& at(const std::string& name) const { return slot(id(name)); }

  int num_slots() const { return int(slots_.size()); }

  size_t num_params() const {
    size_t n = 0;
    for (const auto& s : slots_) n += s.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& s : slots_)
      std::fill(s.grad.begin(), s.grad.end(), 0.0);
  }

  double grad_sq_norm() const {
    double acc = 0;
    for (const auto& s : slots_)
      for (double g : s.grad) acc += g * g;
    return acc;
  }

  void scale_grad(double c) {
    for (auto& s : slots_)
      for (double& g : s.grad) g *= c;
  }

  void check_finite(const std::string& when) const {
    for (const auto& s : slots_)
      for (double v : s.value)
        if (!std::isfinite(v)) fail("non-finite value in slot '" + s.name + "' " + when);
  }

  std::vector<std::vector<double>> snapshot_values() const {
    std::vector<std::vector<double>> snap;
    snap.reserve(slots_.size());
    for (const auto& s : slots_) snap.push_back(s.value);
    return snap;
  }

  void restore_values(const std::vector<std::vector<double>>& snap) {
    require(snap.size() == slots_.size(), "snapshot/store slot count mismatch");
    for (size_t i = 0; i < slots_.size(); ++i) {
      require(snap[i].size() == slots_[i].value.size(), "snapshot shape mismatch: " + slots_[i].name);
      slots_[i].value = snap[i];
    }
  }

  const std::vector<Slot>& slots() const { return slots_; }
  std::vector<Slot>& slots() { return slots_; }

 private:
  std::vector<Slot> slots_;
  std::map<std::string, int> index_;
};

// Uniform init in [-scale, scale]; the default matches small-weight
// initialization for the recurrent cells and heads.
inline void init_uniform(ParameterStore& store, int slot_id, Rng& rng, double scale = 0.1) {
  for (double& v : store.slot(slot_id).value) v = rng.uniform(-scale, scale);
}

// Resamples every slot uniformly. Gradient checks run at such points: the
// training init is small enough that some deep slots have gradients below
// what central differences can resolve in double precision.
inline void randomize_all(ParameterStore& store, Rng& rng, double scale) {
  for (auto& s : store.slots())
    for (double& v : s.value) v = rng.uniform(-scale, scale);
}

}  // namespace rprm
