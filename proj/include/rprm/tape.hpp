#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rprm/param_store.hpp"
#include "rprm/util.hpp"

namespace rprm {

// Reverse-mode differentiation tape over scalar/vector/matrix nodes.
//
// A Tape is built fresh per loss evaluation (one sequence), owns flat value
// and gradient buffers, and on backward() accumulates leaf gradients
// additively into the bound ParameterStore. Gradients therefore sum across
// backward() calls until ParameterStore::zero_grad() clears them.
class Tape {
 public:
  enum class Op : uint8_t {
    kLeaf,
    kConst,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kNeg,
    kScale,
    kOffset,
    kExp,
    kLog,
    kTanh,
    kSigmoid,
    kSoftplus,
    kClamp,
    kMatVec,
    kMatTVec,
    kDot,
    kSum,
    kLogSumExp,
    kSparseDot,
    kEmbed,
  };

  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  explicit Tape(ParameterStore* store = nullptr) : store_(store) { reset_leaf_cache(); }

  void bind(ParameterStore* store) {
    store_ = store;
    reset_leaf_cache();
  }

  void clear() {
    nodes_.clear();
    vals_.clear();
    grads_.clear();
    aux_.clear();
    sparse_.clear();
    spans_.clear();
    reset_leaf_cache();
  }

  long clamp_events() const { return clamp_events_; }
  void reset_clamp_events() { clamp_events_ = 0; }

  // --- node constructors -------------------------------------------------

  Var leaf(int slot_id) {
    require(store_ != nullptr, "tape has no bound parameter store");
    if (slot_id < int(leaf_cache_.size()) && leaf_cache_[size_t(slot_id)] >= 0)
      return Var{leaf_cache_[size_t(slot_id)]};
    const Slot& s = store_->slot(slot_id);
    const int id = new_node(Op::kLeaf, s.shape.rows, s.shape.cols, -1, -1);
    std::copy(s.value.begin(), s.value.end(), val(id));
    nodes_[size_t(id)].aux_i = slot_id;
    finish(id);
    if (slot_id >= int(leaf_cache_.size())) leaf_cache_.resize(size_t(slot_id) + 1, -1);
    leaf_cache_[size_t(slot_id)] = id;
    return Var{id};
  }

  Var leaf(const std::string& name) { return leaf(store_->id(name)); }

  Var constant(double v) {
    const int id = new_node(Op::kConst, 1, 1, -1, -1);
    val(id)[0] = v;
    finish(id);
    return Var{id};
  }

  Var constant(const double* data, int n) {
    const int id = new_node(Op::kConst, n, 1, -1, -1);
    std::copy(data, data + n, val(id));
    finish(id);
    return Var{id};
  }

  Var zeros(int n) {
    const int id = new_node(Op::kConst, n, 1, -1, -1);
    finish(id);
    return Var{id};
  }

  Var add(Var a, Var b) { return binary(Op::kAdd, a, b); }
  Var sub(Var a, Var b) { return binary(Op::kSub, a, b); }
  Var mul(Var a, Var b) { return binary(Op::kMul, a, b); }
  Var div(Var a, Var b) { return binary(Op::kDiv, a, b); }

  Var neg(Var a) { return unary(Op::kNeg, a); }
  Var exp(Var a) { return unary(Op::kExp, a); }
  Var log(Var a) { return unary(Op::kLog, a); }
  Var tanh(Var a) { return unary(Op::kTanh, a); }
  Var sigmoid(Var a) { return unary(Op::kSigmoid, a); }
  Var softplus(Var a) { return unary(Op::kSoftplus, a); }

  Var scale(Var a, double c) {
    const int id = unary_raw(Op::kScale, a);
    nodes_[size_t(id)].aux_i = push_aux({c});
    const double* x = val(nodes_[size_t(id)].a);
    double* y = val(id);
    for (int i = 0; i < len(id); ++i) y[i] = x[i] * c;
    finish(id);
    return Var{id};
  }

  Var offset(Var a, double c) {
    const int id = unary_raw(Op::kOffset, a);
    nodes_[size_t(id)].aux_i = push_aux({c});
    const double* x = val(nodes_[size_t(id)].a);
    double* y = val(id);
    for (int i = 0; i < len(id); ++i) y[i] = x[i] + c;
    finish(id);
    return Var{id};
  }

  // Clamps values to [lo, hi]; out-of-range inputs are counted as clamp
  // events and receive zero gradient.
  Var clamp(Var a, double lo, double hi) {
    const int id = unary_raw(Op::kClamp, a);
    nodes_[size_t(id)].aux_i = push_aux({lo, hi});
    const double* x = val(nodes_[size_t(id)].a);
    double* y = val(id);
    for (int i = 0; i < len(id); ++i) {
      double v = x[i];
      if (v < lo) {
        v = lo;
        ++clamp_events_;
      } else if (v > hi) {
        v = hi;
        ++clamp_events_;
      }
      y[i] = v;
    }
    finish(id);
    return Var{id};
  }

  // m: r x c matrix, v: length-c vector -> length-r vector.
  Var matvec(Var m, Var v) {
    const int rows = node(m).rows, cols = node(m).cols;
    require(cols == len(v.id), "matvec: dimension mismatch");
    const int id = new_node(Op::kMatVec, rows, 1, m.id, v.id);
    const double* M = val(m.id);
    const double* x = val(v.id);
    double* y = val(id);
    for (int r = 0; r < rows; ++r) {
      double acc = 0;
      const double* row = M + size_t(r) * cols;
      for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
      y[r] = acc;
    }
    finish(id);
    return Var{id};
  }

  // m: r x c matrix, v: length-r vector -> length-c vector (m^T v).
  Var mat_t_vec(Var m, Var v) {
    const int rows = node(m).rows, cols = node(m).cols;
    require(rows == len(v.id), "mat_t_vec: dimension mismatch");
    const int id = new_node(Op::kMatTVec, cols, 1, m.id, v.id);
    const double* M = val(m.id);
    const double* x = val(v.id);
    double* y = val(id);
    std::fill(y, y + cols, 0.0);
    for (int r = 0; r < rows; ++r) {
      const double* row = M + size_t(r) * cols;
      const double xr = x[r];
      for (int c = 0; c < cols; ++c) y[c] += row[c] * xr;
    }
    finish(id);
    return Var{id};
  }

  Var dot(Var a, Var b) {
    require(len(a.id) == len(b.id), "dot: length mismatch");
    const int id = new_node(Op::kDot, 1, 1, a.id, b.id);
    const double* x = val(a.id);
    const double* y = val(b.id);
    double acc = 0;
    for (int i = 0; i < len(a.id); ++i) acc += x[i] * y[i];
    val(id)[0] = acc;
    finish(id);
    return Var{id};
  }

  Var sum(Var a) {
    const int id = new_node(Op::kSum, 1, 1, a.id, -1);
    const double* x = val(a.id);
    double acc = 0;
    for (int i = 0; i < len(a.id); ++i) acc += x[i];
    val(id)[0] = acc;
    finish(id);
    return Var{id};
  }

  // Stable log-sum-exp with max subtraction.
  Var logsumexp(Var a) {
    const int id = new_node(Op::kLogSumExp, 1, 1, a.id, -1);
    const double* x = val(a.id);
    const int n = len(a.id);
    double m = x[0];
    for (int i = 1; i < n; ++i) m = std::max(m, x[i]);
    double acc = 0;
    for (int i = 0; i < n; ++i) acc += std::exp(x[i] - m);
    val(id)[0] = m + std::log(acc);
    finish(id);
    return Var{id};
  }

  // sum_k w_k * v[idx_k] over a sparse list of (index, weight) entries.
  Var sparse_dot(Var v, const std::vector<std::pair<int, double>>& entries) {
    const int id = new_node(Op::kSparseDot, 1, 1, v.id, -1);
    nodes_[size_t(id)].aux_i = push_span(entries, len(v.id));
    const double* x = val(v.id);
    double acc = 0;
    for (const auto& [k, w] : entries) acc += w * x[k];
    val(id)[0] = acc;
    finish(id);
    return Var{id};
  }

  // m: e x V matrix; returns sum_k w_k * m[:, idx_k] (an e-vector).
  // An empty entry list yields the zero vector.
  Var embed(Var m, const std::vector<std::pair<int, double>>& entries) {
    const int rows = node(m).rows, cols = node(m).cols;
    const int id = new_node(Op::kEmbed, rows, 1, m.id, -1);
    nodes_[size_t(id)].aux_i = push_span(entries, cols);
    const double* M = val(m.id);
    double* y = val(id);
    std::fill(y, y + rows, 0.0);
    for (const auto& [k, w] : entries)
      for (int r = 0; r < rows; ++r) y[r] += w * M[size_t(r) * cols + k];
    finish(id);
    return Var{id};
  }

  // --- access --------------------------------------------------------------

  double value(Var v) const {
    require(len(v.id) == 1, "value(): node is not scalar");
    return vals_[size_t(node(v).ofs)];
  }

  const double* data(Var v) const { return vals_.data() + node(v).ofs; }
  int length(Var v) const { return len(v.id); }

  // --- backward ------------------------------------------------------------

  void backward(Var loss) {
    require(loss.valid() && len(loss.id) == 1, "backward(): loss must be a scalar node");
    grads_.assign(vals_.size(), 0.0);
    grads_[size_t(node(loss).ofs)] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
      const Node& n = nodes_[size_t(id)];
      const double* g = grads_.data() + n.ofs;
      const int nlen = n.rows * n.cols;
      switch (n.op) {
        case Op::kConst:
          break;
        case Op::kLeaf: {
          Slot& s = store_->slot(n.aux_i);
          for (int i = 0; i < nlen; ++i) s.grad[size_t(i)] += g[i];
          break;
        }
        case Op::kAdd:
          spread(n.a, g, nlen, +1.0);
          spread(n.b, g, nlen, +1.0);
          break;
        case Op::kSub:
          spread(n.a, g, nlen, +1.0);
          spread(n.b, g, nlen, -1.0);
          break;
        case Op::kMul: {
          spread_scaled(n.a, n.b, g, nlen);
          spread_scaled(n.b, n.a, g, nlen);
          break;
        }
        case Op::kDiv: {
          // out = a / b
          const double* vb = val_c(n.b);
          const double* va = val_c(n.a);
          const int la = len(n.a), lb = len(n.b);
          double* ga = grads_.data() + nodes_[size_t(n.a)].ofs;
          double* gb = grads_.data() + nodes_[size_t(n.b)].ofs;
          for (int i = 0; i < nlen; ++i) {
            const double bi = vb[lb == 1 ? 0 : i];
            const double ai = va[la == 1 ? 0 : i];
            ga[la == 1 ? 0 : i] += g[i] / bi;
            gb[lb == 1 ? 0 : i] += -g[i] * ai / (bi * bi);
          }
          break;
        }
        case Op::kNeg:
          spread(n.a, g, nlen, -1.0);
          break;
        case Op::kScale: {
          const double c = aux_[size_t(n.aux_i)];
          double* ga = grads_.data() + nodes_[size_t(n.a)].ofs;
          for (int i = 0; i < nlen; ++i) ga[i] += c * g[i];
          break;
        }
        case Op::kOffset: {
          double* ga = grads_.data() + nodes_[size_t(n.a)].ofs;
          for (int i = 0; i < nlen; ++i) ga[i] += g[i];
          break;
        }
        case Op::kExp: {
          const double* out = val_c(id);
          double* ga = grads_.data() + nodes_[size_t(n.a)].ofs;
          for (int i = 0; i < nlen; ++i) ga[i] += g[i] * out[i];
          break;
        }
        case Op::kLog: {
          const double* xa = val_c(n.a);
          double* ga = grads_.data() + nodes_[size_t(n.a)].ofs;
          for (int i = 0; i < nlen; ++i) ga[i] += g[i] / xa[i];
          break;
        }
        case Op::kTanh: {
          const double* out = val_c(id);
          double* ga = grads_.data() + nodes_[size_t(n.a)].ofs;
          for (int i = 0; i < nlen; ++i) ga[i] += g[i] * (1.0 - out[i] * out[i]);
          break;
        }
        case Op::kSigmoid: {
          const double* out = val_c(id);
          double* ga = grads_.data() + nodes_[size_t(n.a)].ofs;
          for (int i = 0; i < nlen; ++i) ga[i] += g[i] * out[i] * (1.0 - out[i]);
          break;
        }
        case Op::kSoftplus: {
          const double* xa = val_c(n.a);
          double* ga = grads_.data() + nodes_[size_t(n.a)].ofs;
          for (int i = 0; i < nlen; ++i) ga[i] += g[i] * stable_sigmoid(xa[i]);
          break;
        }
        case Op::kClamp: {
          const double lo = aux_[size_t(n.aux_i)];
          const double hi = aux_[size_t(n.aux_i) + 1];
          const double* xa = val_c(n.a);
          double* ga = grads_.data() + nodes_[size_t(n.a)].ofs;
          for (int i = 0; i < nlen; ++i)
            if (xa[i] >= lo && xa[i] <= hi) ga[i] += g[i];
          break;
        }
        case Op::kMatVec: {
          const Node& nm = nodes_[size_t(n.a)];
          const double* M = val_c(n.a);
          const double* x = val_c(n.b);
          double* gm = grads_.data() + nm.ofs;
          double* gx = grads_.data() + nodes_[size_t(n.b)].ofs;
          for (int r = 0; r < nm.rows; ++r) {
            const double gr = g[r];
            if (gr == 0.0) continue;
            const double* row = M + size_t(r) * nm.cols;
            double* grow = gm + size_t(r) * nm.cols;
            for (int c = 0; c < nm.cols; ++c) {
              grow[c] += gr * x[c];
              gx[c] += gr * row[c];
            }
          }
          break;
        }
        case Op::kMatTVec: {
          const Node& nm = nodes_[size_t(n.a)];
          const double* M = val_c(n.a);
          const double* x = val_c(n.b);
          double* gm = grads_.data() + nm.ofs;
          double* gx = grads_.data() + nodes_[size_t(n.b)].ofs;
          for (int r = 0; r < nm.rows; ++r) {
            const double xr = x[r];
            const double* row = M + size_t(r) * nm.cols;
            double* grow = gm + size_t(r) * nm.cols;
            double acc = 0;
            for (int c = 0; c < nm.cols; ++c) {
              grow[c] += xr * g[c];
              acc += row[c] * g[c];
            }
            gx[r] += acc;
          }
          break;
        }
        case Op::kDot: {
          const double* xa = val_c(n.a);
          const double* xb = val_c(n.b);
          double* ga = grads_.data() + nodes_[size_t(n.a)].ofs;
          double* gb = grads_.data() + nodes_[size_t(n.b)].ofs;
          const double g0 = g[0];
          for (int i = 0; i < len(n.a); ++i) {
            ga[i] += g0 * xb[i];
            gb[i] += g0 * xa[i];
          }
          break;
        }
        case Op::kSum: {
          double* ga = grads_.data() + nodes_[size_t(n.a)].ofs;
          const double g0 = g[0];
          for (int i = 0; i < len(n.a); ++i) ga[i] += g0;
          break;
        }
        case Op::kLogSumExp: {
          const double* xa = val_c(n.a);
          const double out = val_c(id)[0];
          double* ga = grads_.data() + nodes_[size_t(n.a)].ofs;
          const double g0 = g[0];
          for (int i = 0; i < len(n.a); ++i) ga[i] += g0 * std::exp(xa[i] - out);
          break;
        }
        case Op::kSparseDot: {
          double* ga = grads_.data() + nodes_[size_t(n.a)].ofs;
          const double g0 = g[0];
          const auto& sp = spans_[size_t(n.aux_i)];
          for (int k = 0; k < sp.len; ++k) {
            const auto& e = sparse_[size_t(sp.ofs + k)];
            ga[e.first] += g0 * e.second;
          }
          break;
        }
        case Op::kEmbed: {
          const Node& nm = nodes_[size_t(n.a)];
          double* gm = grads_.data() + nm.ofs;
          const auto& sp = spans_[size_t(n.aux_i)];
          for (int k = 0; k < sp.len; ++k) {
            const auto& e = sparse_[size_t(sp.ofs + k)];
            for (int r = 0; r < nm.rows; ++r)
              gm[size_t(r) * nm.cols + e.first] += e.second * g[r];
          }
          break;
        }
      }
    }
  }

  static const char* op_name(Op op) {
    switch (op) {
      case Op::kLeaf: return "leaf";
      case Op::kConst: return "const";
      case Op::kAdd: return "add";
      case Op::kSub: return "sub";
      case Op::kMul: return "mul";
      case Op::kDiv: return "div";
      case Op::kNeg: return "neg";
      case Op::kScale: return "scale";
      case Op::kOffset: return "offset";
      case Op::kExp: return "exp";
      case Op::kLog: return "log";
      case Op::kTanh: return "tanh";
      case Op::kSigmoid: return "sigmoid";
      case Op::kSoftplus: return "softplus";
      case Op::kClamp: return "clamp";
      case Op::kMatVec: return "matvec";
      case Op::kMatTVec: return "mat_t_vec";
      case Op::kDot: return "dot";
      case Op::kSum: return "sum";
      case Op::kLogSumExp: return "logsumexp";
      case Op::kSparseDot: return "sparse_dot";
      case Op::kEmbed: return "embed";
    }
    return "?";
  }

 private:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    int rows = 1;
    int cols = 1;
    int ofs = 0;
    int aux_i = -1;
  };

  struct Span {
    int ofs = 0;
    int len = 0;
  };

  static double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  }

  const Node& node(Var v) const {
    require(v.valid() && v.id < int(nodes_.size()), "invalid tape variable");
    return nodes_[size_t(v.id)];
  }

  int len(int id) const {
    const Node& n = nodes_[size_t(id)];
    return n.rows * n.cols;
  }

  double* val(int id) { return vals_.data() + nodes_[size_t(id)].ofs; }
  const double* val_c(int id) const { return vals_.data() + nodes_[size_t(id)].ofs; }

  int new_node(Op op, int rows, int cols, int a, int b) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.rows = rows;
    n.cols = cols;
    n.ofs = int(vals_.size());
    vals_.resize(vals_.size() + size_t(rows) * size_t(cols), 0.0);
    nodes_.push_back(n);
    return int(nodes_.size()) - 1;
  }

  void finish(int id) {
    const double* x = val_c(id);
    for (int i = 0; i < len(id); ++i)
      if (!std::isfinite(x[i]))
        fail(std::string("non-finite value produced by op '") + op_name(nodes_[size_t(id)].op) + "'");
  }

  int unary_raw(Op op, Var a) {
    const Node& na = node(a);
    return new_node(op, na.rows, na.cols, a.id, -1);
  }

  Var unary(Op op, Var a) {
    const int id = unary_raw(op, a);
    const double* x = val(nodes_[size_t(id)].a);
    double* y = val(id);
    const int n = len(id);
    switch (op) {
      case Op::kNeg:
        for (int i = 0; i < n; ++i) y[i] = -x[i];
        break;
      case Op::kExp:
        for (int i = 0; i < n; ++i) y[i] = std::exp(x[i]);
        break;
      case Op::kLog:
        for (int i = 0; i < n; ++i) y[i] = std::log(x[i]);
        break;
      case Op::kTanh:
        for (int i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
        break;
      case Op::kSigmoid:
        for (int i = 0; i < n; ++i) y[i] = stable_sigmoid(x[i]);
        break;
      case Op::kSoftplus:
        for (int i = 0; i < n; ++i) y[i] = std::log1p(std::exp(-std::abs(x[i]))) + std::max(x[i], 0.0);
        break;
      default:
        fail("unary(): bad op");
    }
    finish(id);
    return Var{id};
  }

  // Elementwise binary with scalar broadcast on either side.
  Var binary(Op op, Var a, Var b) {
    const int la = len(a.id), lb = len(b.id);
    require(la == lb || la == 1 || lb == 1, "binary op: shape mismatch");
    const Node& big = la >= lb ? node(a) : node(b);
    const int id = new_node(op, big.rows, big.cols, a.id, b.id);
    const double* xa = val(a.id);
    const double* xb = val(b.id);
    double* y = val(id);
    const int n = len(id);
    for (int i = 0; i < n; ++i) {
      const double u = xa[la == 1 ? 0 : i];
      const double v = xb[lb == 1 ? 0 : i];
      switch (op) {
        case Op::kAdd: y[i] = u + v; break;
        case Op::kSub: y[i] = u - v; break;
        case Op::kMul: y[i] = u * v; break;
        case Op::kDiv: y[i] = u / v; break;
        default: fail("binary(): bad op");
      }
    }
    finish(id);
    return Var{id};
  }

  // g * sign flows into parent `p` (handles scalar broadcast by summing).
  void spread(int p, const double* g, int n, double sign) {
    double* gp = grads_.data() + nodes_[size_t(p)].ofs;
    if (len(p) == 1) {
      double acc = 0;
      for (int i = 0; i < n; ++i) acc += g[i];
      gp[0] += sign * acc;
    } else {
      for (int i = 0; i < n; ++i) gp[i] += sign * g[i];
    }
  }

  // d(a*b)/da = b: flows g * val(other) into parent `p`.
  void spread_scaled(int p, int other, const double* g, int n) {
    double* gp = grads_.data() + nodes_[size_t(p)].ofs;
    const double* vo = val_c(other);
    const int lo = len(other);
    if (len(p) == 1) {
      double acc = 0;
      for (int i = 0; i < n; ++i) acc += g[i] * vo[lo == 1 ? 0 : i];
      gp[0] += acc;
    } else {
      for (int i = 0; i < n; ++i) gp[i] += g[i] * vo[lo == 1 ? 0 : i];
    }
  }

  int push_aux(std::initializer_list<double> values) {
    const int ofs = int(aux_.size());
    aux_.insert(aux_.end(), values);
    return ofs;
  }

  int push_span(const std::vector<std::pair<int, double>>& entries, int limit) {
    for (const auto& [k, w] : entries) {
      require(k >= 0 && k < limit, "sparse index out of range");
      (void)w;
    }
    Span sp{int(sparse_.size()), int(entries.size())};
    sparse_.insert(sparse_.end(), entries.begin(), entries.end());
    spans_.push_back(sp);
    return int(spans_.size()) - 1;
  }

  void reset_leaf_cache() {
    leaf_cache_.assign(store_ ? size_t(store_->num_slots()) : 0, -1);
  }

  std::vector<Node> nodes_;
  std::vector<double> vals_;
  std::vector<double> grads_;
  std::vector<double> aux_;
  std::vector<std::pair<int, double>> sparse_;
  std::vector<Span> spans_;
  std::vector<int> leaf_cache_;
  ParameterStore* store_ = nullptr;
  long clamp_events_ = 0;
};

using Var = Tape::Var;

}  // namespace rprm
