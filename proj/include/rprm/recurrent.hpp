#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "rprm/corpus.hpp"
#include "rprm/param_store.hpp"
#include "rprm/tape.hpp"

namespace rprm {

// One shared LSTM cell serves all model variants. Text-aware variants feed
// [time_feature, embed . bow] into the gates; time-only variants have no
// embedding block at all, which realizes "text features zeroed" exactly.
struct CellDims {
  int d = 64;          // hidden size
  int e = 64;          // BoW embedding size (ignored when !uses_text)
  int vocab = 0;       // vocabulary size V
  bool uses_text = true;
};

namespace cellnames {
inline const char* kGates = "ifog";
inline std::string time_w(char g) { return std::string("cell.W") + g + "_t"; }
inline std::string embed_w(char g) { return std::string("cell.W") + g + "_e"; }
inline std::string rec_w(char g) { return std::string("cell.U") + g; }
inline std::string bias(char g) { return std::string("cell.b") + g; }
}  // namespace cellnames

// Registers the cell's trainable slots. Weights are uniform in
// [-0.1, 0.1], biases start at zero.
inline void add_cell_params(ParameterStore& store, const CellDims& dims, Rng& rng) {
  require(dims.d >= 1, "hidden size must be >= 1");
  if (dims.uses_text) {
    require(dims.e >= 1 && dims.vocab >= 1, "embedding dims must be >= 1");
    init_uniform(store, store.add_matrix("cell.embed", dims.e, dims.vocab), rng);
  }
  for (char g : std::string(cellnames::kGates)) {
    init_uniform(store, store.add_vector(cellnames::time_w(g), dims.d), rng);
    if (dims.uses_text)
      init_uniform(store, store.add_matrix(cellnames::embed_w(g), dims.d, dims.e), rng);
    init_uniform(store, store.add_matrix(cellnames::rec_w(g), dims.d, dims.d), rng);
    store.add_vector(cellnames::bias(g), dims.d);
  }
}

// Event featurization: the log-transformed inter-event gap plus the
// frequency-normalized BoW counts (counts / max(total, 1)).
struct EventFeatures {
  double time_feature = 0.0;
  std::vector<std::pair<int, double>> bow_normalized;
};

inline double time_feature(double gap_days) {
  require(gap_days >= 0, "negative inter-event gap");
  return std::log1p(gap_days);
}

inline std::vector<std::pair<int, double>> normalized_bow(const BowVector& bow) {
  std::vector<std::pair<int, double>> out;
  out.reserve(bow.counts.size());
  const double total = double(std::max(bow.total_words, 1));
  for (const auto& [idx, c] : bow.counts) out.emplace_back(idx, double(c) / total);
  return out;
}

inline EventFeatures featurize(const Review& review, double prev_time) {
  EventFeatures f;
  f.time_feature = time_feature(review.time_days - prev_time);
  f.bow_normalized = normalized_bow(review.bow);
  return f;
}

// --- tape path -------------------------------------------------------------

struct CellVars {
  Var embed;
  Var wt[4];  // time-feature weights per gate
  Var we[4];  // embedding-block weights per gate
  Var u[4];   // recurrent weights per gate
  Var b[4];   // biases per gate
  bool uses_text = false;
};

inline CellVars cell_leaves(Tape& t, const ParameterStore& store, bool uses_text) {
  CellVars v;
  v.uses_text = uses_text;
  if (uses_text) v.embed = t.leaf(store.id("cell.embed"));
  for (int k = 0; k < 4; ++k) {
    const char g = cellnames::kGates[k];
    v.wt[k] = t.leaf(store.id(cellnames::time_w(g)));
    if (uses_text) v.we[k] = t.leaf(store.id(cellnames::embed_w(g)));
    v.u[k] = t.leaf(store.id(cellnames::rec_w(g)));
    v.b[k] = t.leaf(store.id(cellnames::bias(g)));
  }
  return v;
}

struct LstmState {
  Var h;
  Var c;
};

inline LstmState lstm_step(Tape& t, const CellVars& cell, const EventFeatures& f,
                           const LstmState& prev) {
  Var emb;
  if (cell.uses_text) emb = t.embed(cell.embed, f.bow_normalized);
  Var pre[4];
  for (int k = 0; k < 4; ++k) {
    Var acc = t.add(t.scale(cell.wt[k], f.time_feature), t.matvec(cell.u[k], prev.h));
    if (cell.uses_text) acc = t.add(acc, t.matvec(cell.we[k], emb));
    pre[k] = t.add(acc, cell.b[k]);
  }
  const Var gi = t.sigmoid(pre[0]);
  const Var gf = t.sigmoid(pre[1]);
  const Var go = t.sigmoid(pre[2]);
  const Var cand = t.tanh(pre[3]);
  LstmState next;
  next.c = t.add(t.mul(gf, prev.c), t.mul(gi, cand));
  next.h = t.mul(go, t.tanh(next.c));
  return next;
}

// Hidden states h_1..h_N for a sequence; h_0 is the zero state and the
// first event's gap is defined as zero.
inline std::vector<LstmState> unroll(Tape& t, const CellVars& cell, int hidden_dim,
                                     std::span<const Review> reviews) {
  std::vector<LstmState> states;
  states.reserve(reviews.size());
  LstmState state{t.zeros(hidden_dim), t.zeros(hidden_dim)};
  double prev_time = reviews.empty() ? 0.0 : reviews[0].time_days;
  for (const Review& r : reviews) {
    state = lstm_step(t, cell, featurize(r, prev_time), state);
    prev_time = r.time_days;
    states.push_back(state);
  }
  return states;
}

// --- value-only path (prediction, simulation) ------------------------------

struct PlainState {
  std::vector<double> h;
  std::vector<double> c;
};

inline PlainState zero_state(int d) {
  return PlainState{std::vector<double>(size_t(d), 0.0), std::vector<double>(size_t(d), 0.0)};
}

inline void lstm_step_values(const ParameterStore& store, const CellDims& dims,
                             const EventFeatures& f, PlainState& state) {
  const int d = dims.d;
  std::vector<double> emb;
  if (dims.uses_text) {
    emb.assign(size_t(dims.e), 0.0);
    const auto& m = store.at("cell.embed");
    for (const auto& [idx, w] : f.bow_normalized)
      for (int r = 0; r < dims.e; ++r) emb[size_t(r)] += w * m.value[size_t(r) * size_t(dims.vocab) + size_t(idx)];
  }
  auto sigmoid = [](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  };
  std::vector<double> gate(size_t(4) * size_t(d), 0.0);
  for (int k = 0; k < 4; ++k) {
    const char g = cellnames::kGates[k];
    const auto& wt = store.at(cellnames::time_w(g)).value;
    const auto& u = store.at(cellnames::rec_w(g)).value;
    const auto& b = store.at(cellnames::bias(g)).value;
    for (int r = 0; r < d; ++r) {
      double acc = wt[size_t(r)] * f.time_feature + b[size_t(r)];
      for (int c2 = 0; c2 < d; ++c2) acc += u[size_t(r) * size_t(d) + size_t(c2)] * state.h[size_t(c2)];
      gate[size_t(k) * size_t(d) + size_t(r)] = acc;
    }
    if (dims.uses_text) {
      const auto& we = store.at(cellnames::embed_w(g)).value;
      for (int r = 0; r < d; ++r) {
        double acc = 0;
        for (int c2 = 0; c2 < dims.e; ++c2)
          acc += we[size_t(r) * size_t(dims.e) + size_t(c2)] * emb[size_t(c2)];
        gate[size_t(k) * size_t(d) + size_t(r)] += acc;
      }
    }
  }
  for (int r = 0; r < d; ++r) {
    const double gi = sigmoid(gate[size_t(r)]);
    const double gf = sigmoid(gate[size_t(d) + size_t(r)]);
    const double go = sigmoid(gate[size_t(2 * d) + size_t(r)]);
    const double cand = std::tanh(gate[size_t(3 * d) + size_t(r)]);
    state.c[size_t(r)] = gf * state.c[size_t(r)] + gi * cand;
    state.h[size_t(r)] = go * std::tanh(state.c[size_t(r)]);
  }
}

inline PlainState unroll_values(const ParameterStore& store, const CellDims& dims,
                                std::span<const Review> reviews) {
  PlainState state = zero_state(dims.d);
  double prev_time = reviews.empty() ? 0.0 : reviews[0].time_days;
  for (const Review& r : reviews) {
    lstm_step_values(store, dims, featurize(r, prev_time), state);
    prev_time = r.time_days;
  }
  return state;
}

}  // namespace rprm
