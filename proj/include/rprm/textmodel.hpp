#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rprm/corpus.hpp"
#include "rprm/param_store.hpp"
#include "rprm/tape.hpp"

namespace rprm {

// Dynamic text head: a review's words are drawn independently from
// softmax(h^T R + b) conditioned on the hidden state that precedes the
// review. The BoW log likelihood is the multinomial log mass without the
// combinatorial coefficient (constant in the parameters).

inline void add_text_head(ParameterStore& store, int d, int vocab, Rng& rng) {
  require(d >= 1 && vocab >= 1, "text head dims must be >= 1");
  init_uniform(store, store.add_matrix("text.R", d, vocab), rng);
  init_uniform(store, store.add_vector("text.b", vocab), rng);
}

// Log softmax of h^T R + b, computed with max subtraction.
inline std::vector<double> word_log_probs(const ParameterStore& store,
                                          const std::vector<double>& h) {
  const auto& R = store.at("text.R");
  const auto& b = store.at("text.b");
  const int d = R.shape.rows, v = R.shape.cols;
  require(int(h.size()) == d, "word_log_probs: hidden size mismatch");
  std::vector<double> logits(b.value.begin(), b.value.end());
  for (int i = 0; i < d; ++i) {
    const double hi = h[size_t(i)];
    const double* row = R.value.data() + size_t(i) * size_t(v);
    for (int k = 0; k < v; ++k) logits[size_t(k)] += hi * row[k];
  }
  double m = logits[0];
  for (double x : logits) m = std::max(m, x);
  double acc = 0;
  for (double x : logits) acc += std::exp(x - m);
  const double lse = m + std::log(acc);
  for (double& x : logits) x -= lse;
  return logits;
}

inline double bow_log_likelihood(const ParameterStore& store, const std::vector<double>& h,
                                 const BowVector& bow) {
  if (bow.empty()) return 0.0;
  const std::vector<double> logp = word_log_probs(store, h);
  double acc = 0;
  for (const auto& [idx, c] : bow.counts) {
    require(idx >= 0 && idx < int(logp.size()), "bow_log_likelihood: index out of range");
    acc += double(c) * logp[size_t(idx)];
  }
  return acc;
}

// --- tape path -------------------------------------------------------------

struct TextHeadVars {
  Var R;
  Var b;
};

inline TextHeadVars text_head_leaves(Tape& t, const ParameterStore& store) {
  return TextHeadVars{t.leaf(store.id("text.R")), t.leaf(store.id("text.b"))};
}

inline Var word_logits_expr(Tape& t, const TextHeadVars& head, Var h) {
  return t.add(t.mat_t_vec(head.R, h), head.b);
}

// sum_k c_k log p_k = sum_k c_k logit_k - M * logsumexp(logits).
// An empty BoW contributes exactly zero.
inline Var bow_log_likelihood_expr(Tape& t, const TextHeadVars& head, Var h,
                                   const BowVector& bow) {
  if (bow.empty()) return t.constant(0.0);
  const Var logits = word_logits_expr(t, head, h);
  std::vector<std::pair<int, double>> entries;
  entries.reserve(bow.counts.size());
  for (const auto& [idx, c] : bow.counts) entries.emplace_back(idx, double(c));
  const Var hit = t.sparse_dot(logits, entries);
  const Var norm = t.scale(t.logsumexp(logits), double(bow.total_words));
  return t.sub(hit, norm);
}

}  // namespace rprm
