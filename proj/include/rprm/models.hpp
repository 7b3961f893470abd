#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rprm/checkpoint.hpp"
#include "rprm/corpus.hpp"
#include "rprm/recurrent.hpp"
#include "rprm/tape.hpp"
#include "rprm/textmodel.hpp"
#include "rprm/tpp.hpp"

namespace rprm {

// The four model variants share one recurrent cell; they differ in whether
// the cell sees the review text and in the head that scores the next gap:
//
//   rprm      text input, exponential-form intensity head, text head
//   lstm-bow  text input, exponential gap head,            text head
//   rpp       time only,  exponential-form intensity head
//   lstm      time only,  exponential gap head
enum class Variant { kRprm, kLstmBow, kRpp, kLstm };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kRprm: return "rprm";
    case Variant::kLstmBow: return "lstm-bow";
    case Variant::kRpp: return "rpp";
    case Variant::kLstm: return "lstm";
  }
  return "?";
}

inline Variant variant_from_name(const std::string& name) {
  if (name == "rprm") return Variant::kRprm;
  if (name == "lstm-bow") return Variant::kLstmBow;
  if (name == "rpp") return Variant::kRpp;
  if (name == "lstm") return Variant::kLstm;
  fail("unknown model variant: '" + name + "' (expected rprm|lstm-bow|rpp|lstm)");
}

inline bool variant_uses_text(Variant v) {
  return v == Variant::kRprm || v == Variant::kLstmBow;
}
inline bool variant_has_intensity_head(Variant v) {
  return v == Variant::kRprm || v == Variant::kRpp;
}

struct ModelConfig {
  Variant variant = Variant::kRprm;
  int hidden_dim = 64;
  int embed_dim = 64;
  int vocab = 0;
  // When set, the exponential head's output is read as the mean of the gap
  // distribution instead of its rate.
  bool lambda_is_mean = false;
  double clamp_lo = -40.0;
  double clamp_hi = 40.0;
};

inline constexpr double kMinExpHeadRate = 1e-6;

struct Model {
  ModelConfig cfg;
  ParameterStore store;
  // Empirical review word-count distribution from training, used by
  // simulate() to draw review lengths.
  std::vector<std::pair<int, long>> review_length_hist;

  bool uses_text_input() const { return variant_uses_text(cfg.variant); }
  bool has_text_head() const { return variant_uses_text(cfg.variant); }
  bool has_intensity_head() const { return variant_has_intensity_head(cfg.variant); }

  CellDims cell_dims() const {
    return CellDims{cfg.hidden_dim, cfg.embed_dim, cfg.vocab, uses_text_input()};
  }
};

// Builds a freshly initialized model. w_t starts slightly negative so the
// initial survival integral is well-conditioned.
inline Model make_model(const ModelConfig& cfg, uint64_t seed) {
  require(cfg.vocab >= 1, "model requires a vocabulary size >= 1");
  Model m;
  m.cfg = cfg;
  Rng rng = derive_rng(seed, 0xC0DE);
  add_cell_params(m.store, m.cell_dims(), rng);
  if (m.has_intensity_head()) {
    init_uniform(m.store, m.store.add_vector("head.vt", cfg.hidden_dim), rng);
    m.store.add_scalar("head.wt", -0.1);
    m.store.add_scalar("head.bt", 0.0);
  } else {
    init_uniform(m.store, m.store.add_matrix("head.W1", cfg.hidden_dim, cfg.hidden_dim), rng);
    m.store.add_vector("head.b1", cfg.hidden_dim);
    init_uniform(m.store, m.store.add_vector("head.w2", cfg.hidden_dim), rng);
    m.store.add_scalar("head.b2", 0.0);
  }
  if (m.has_text_head()) add_text_head(m.store, cfg.hidden_dim, cfg.vocab, rng);
  return m;
}

// --- loss ------------------------------------------------------------------

enum class LossParts { kAll, kTimeOnly, kTextOnly };

// Negative log likelihood of a sequence: for each step j = 1..N-1 the gap
// to review j+1 is scored under the variant's gap distribution at h_j, and
// (for text models) review j+1's BoW under the text head at h_j. Terms are
// summed, not averaged.
inline Var sequence_loss_expr(Tape& t, const Model& m, std::span<const Review> reviews,
                              LossParts parts = LossParts::kAll) {
  require(reviews.size() >= 2, "sequence_loss requires at least 2 reviews");
  const auto cell = cell_leaves(t, m.store, m.uses_text_input());
  // The last review's own state conditions nothing; stop the unroll early.
  const auto states = unroll(t, cell, m.cfg.hidden_dim, reviews.first(reviews.size() - 1));

  Var vt, wt, bt, w1, b1, w2, b2;
  if (m.has_intensity_head()) {
    vt = t.leaf(m.store.id("head.vt"));
    wt = t.leaf(m.store.id("head.wt"));
    bt = t.leaf(m.store.id("head.bt"));
  } else {
    w1 = t.leaf(m.store.id("head.W1"));
    b1 = t.leaf(m.store.id("head.b1"));
    w2 = t.leaf(m.store.id("head.w2"));
    b2 = t.leaf(m.store.id("head.b2"));
  }
  std::optional<TextHeadVars> text;
  if (m.has_text_head() && parts != LossParts::kTimeOnly) text = text_head_leaves(t, m.store);

  Var total = t.constant(0.0);
  for (size_t j = 0; j + 1 < reviews.size(); ++j) {
    const double delta = reviews[j + 1].time_days - reviews[j].time_days;
    require(delta > 0, "sequence gaps must be strictly positive");
    const Var h = states[j].h;
    if (parts != LossParts::kTextOnly) {
      Var time_term;
      if (m.has_intensity_head()) {
        const Var a = t.add(t.dot(vt, h), bt);
        time_term = tpp::log_density_expr(t, a, wt, delta, m.cfg.clamp_lo, m.cfg.clamp_hi);
      } else {
        const Var z = t.add(t.dot(w2, t.tanh(t.add(t.matvec(w1, h), b1))), b2);
        const Var lam = t.offset(t.softplus(z), kMinExpHeadRate);
        if (m.cfg.lambda_is_mean)
          time_term = t.sub(t.neg(t.log(lam)), t.div(t.constant(delta), lam));
        else
          time_term = t.sub(t.log(lam), t.scale(lam, delta));
      }
      total = t.add(total, time_term);
    }
    if (text)
      total = t.add(total, bow_log_likelihood_expr(t, *text, h, reviews[j + 1].bow));
  }
  return t.neg(total);
}

struct LossEval {
  double value = 0.0;
  long clamp_events = 0;
};

// Evaluates (and optionally backpropagates) the sequence NLL. Gradients
// accumulate into the model's store until cleared.
inline LossEval eval_sequence_loss(Model& m, std::span<const Review> reviews, bool with_grad,
                                   LossParts parts = LossParts::kAll) {
  Tape t(&m.store);
  const Var loss = sequence_loss_expr(t, m, reviews, parts);
  if (with_grad) t.backward(loss);
  return LossEval{t.value(loss), t.clamp_events()};
}

inline double sequence_loss(Model& m, const ItemSequence& seq,
                            LossParts parts = LossParts::kAll) {
  return eval_sequence_loss(m, seq.reviews, false, parts).value;
}

// --- prediction -------------------------------------------------------------

inline tpp::GapDistribution gap_distribution(const Model& m, const std::vector<double>& h) {
  require(m.has_intensity_head(), "gap_distribution: variant has no intensity head");
  const auto& vt = m.store.at("head.vt").value;
  double a = m.store.at("head.bt").value[0];
  for (size_t i = 0; i < vt.size(); ++i) a += vt[i] * h[i];
  return tpp::GapDistribution{a, m.store.at("head.wt").value[0]};
}

// Positive rate of the exponential gap head (value path).
inline double exp_head_rate_output(const Model& m, const std::vector<double>& h) {
  require(!m.has_intensity_head(), "exp_head_rate_output: variant has an intensity head");
  const int d = m.cfg.hidden_dim;
  const auto& w1 = m.store.at("head.W1").value;
  const auto& b1 = m.store.at("head.b1").value;
  const auto& w2 = m.store.at("head.w2").value;
  double z = m.store.at("head.b2").value[0];
  for (int r = 0; r < d; ++r) {
    double acc = b1[size_t(r)];
    for (int c = 0; c < d; ++c) acc += w1[size_t(r) * size_t(d) + size_t(c)] * h[size_t(c)];
    z += w2[size_t(r)] * std::tanh(acc);
  }
  const double softplus = std::log1p(std::exp(-std::fabs(z))) + std::max(z, 0.0);
  return softplus + kMinExpHeadRate;
}

enum class PointEstimate { kMean, kMedian };

// Expected (or median) next gap in days, with the no-event defect mass for
// decaying-intensity states.
inline tpp::GapMoments predict_next_gap_moments(const Model& m,
                                                std::span<const Review> prefix,
                                                PointEstimate estimate = PointEstimate::kMean,
                                                const tpp::QuadratureConfig& quad = {}) {
  require(!prefix.empty(), "prediction requires a non-empty prefix");
  const PlainState state = unroll_values(m.store, m.cell_dims(), prefix);
  tpp::GapMoments out;
  if (m.has_intensity_head()) {
    const auto gd = gap_distribution(m, state.h);
    if (estimate == PointEstimate::kMean) return tpp::expected_gap(gd, quad);
    out.defect = tpp::defect_mass(gd);
    out.mean = tpp::median_gap(gd);
    out.no_event = !std::isfinite(out.mean);
    return out;
  }
  const double rate_or_mean = exp_head_rate_output(m, state.h);
  const double mean = m.cfg.lambda_is_mean ? rate_or_mean : 1.0 / rate_or_mean;
  out.mean = estimate == PointEstimate::kMean ? mean : mean * 0.6931471805599453;
  return out;
}

inline double predict_next_gap(const Model& m, std::span<const Review> prefix,
                               PointEstimate estimate = PointEstimate::kMean,
                               const tpp::QuadratureConfig& quad = {}) {
  return predict_next_gap_moments(m, prefix, estimate, quad).mean;
}

// Word probabilities for the next review. Time-only variants have no text
// distribution and raise an unsupported-capability error.
inline std::vector<double> predict_next_text(const Model& m, std::span<const Review> prefix) {
  if (!m.has_text_head())
    fail(std::string("variant '") + variant_name(m.cfg.variant) + "' does not support text prediction");
  require(!prefix.empty(), "prediction requires a non-empty prefix");
  const PlainState state = unroll_values(m.store, m.cell_dims(), prefix);
  std::vector<double> probs = word_log_probs(m.store, state.h);
  for (double& p : probs) p = std::exp(p);
  return probs;
}

// --- simulation ------------------------------------------------------------

struct SimEvent {
  double time_days = 0.0;
  BowVector bow;
};

inline int sample_review_length(const std::vector<std::pair<int, long>>& hist, Rng& rng) {
  long total = 0;
  for (const auto& [len, count] : hist) total += count;
  if (total <= 0) return 0;
  long r = long(rng.below(uint64_t(total)));
  for (const auto& [len, count] : hist) {
    r -= count;
    if (r < 0) return len;
  }
  return hist.back().first;
}

// Samples events forward from the end of the prefix until `horizon` days
// have elapsed or the process dies out (w < 0 defect). Review texts are
// drawn i.i.d. from the text head; time-only variants emit empty BoWs.
inline std::vector<SimEvent> simulate(const Model& m, std::span<const Review> prefix,
                                      double horizon, Rng& rng) {
  require(horizon >= 0, "horizon must be >= 0");
  PlainState state = prefix.empty() ? zero_state(m.cfg.hidden_dim)
                                    : unroll_values(m.store, m.cell_dims(), prefix);
  double now = prefix.empty() ? 0.0 : prefix.back().time_days;
  const double t_end = now + horizon;
  std::vector<SimEvent> events;
  while (true) {
    double gap = 0.0;
    if (m.has_intensity_head()) {
      const auto s = tpp::sample_gap(gap_distribution(m, state.h), rng);
      if (!s.event) break;
      gap = s.delta;
    } else {
      const double out = exp_head_rate_output(m, state.h);
      gap = rng.exponential(m.cfg.lambda_is_mean ? 1.0 / out : out);
    }
    const double t_next = now + gap;
    if (t_next > t_end) break;
    SimEvent ev;
    ev.time_days = t_next;
    const int len = sample_review_length(m.review_length_hist, rng);
    if (m.has_text_head() && len > 0) {
      std::vector<double> probs = word_log_probs(m.store, state.h);
      for (double& p : probs) p = std::exp(p);
      std::map<int, int> counts;
      for (int k = 0; k < len; ++k) {
        double u = rng.uniform();
        int idx = 0;
        for (; idx + 1 < int(probs.size()); ++idx) {
          u -= probs[size_t(idx)];
          if (u <= 0) break;
        }
        counts[idx] += 1;
      }
      ev.bow.counts.assign(counts.begin(), counts.end());
      for (const auto& [i, c] : ev.bow.counts) ev.bow.total_words += c;
    }
    Review as_review{ev.time_days, ev.bow};
    lstm_step_values(m.store, m.cell_dims(), featurize(as_review, now), state);
    now = t_next;
    events.push_back(std::move(ev));
  }
  return events;
}

// --- checkpoint glue ---------------------------------------------------------

inline nlohmann::json model_meta(const Model& m) {
  nlohmann::json meta;
  meta["variant"] = variant_name(m.cfg.variant);
  meta["hidden_dim"] = m.cfg.hidden_dim;
  meta["embed_dim"] = m.cfg.embed_dim;
  meta["vocab"] = m.cfg.vocab;
  meta["lambda_is_mean"] = m.cfg.lambda_is_mean;
  meta["clamp_lo"] = m.cfg.clamp_lo;
  meta["clamp_hi"] = m.cfg.clamp_hi;
  meta["review_length_hist"] = m.review_length_hist;
  return meta;
}

inline Model model_from_checkpoint(Checkpoint&& ck) {
  Model m;
  m.cfg.variant = variant_from_name(ck.meta.at("variant").get<std::string>());
  m.cfg.hidden_dim = ck.meta.at("hidden_dim").get<int>();
  m.cfg.embed_dim = ck.meta.at("embed_dim").get<int>();
  m.cfg.vocab = ck.meta.at("vocab").get<int>();
  m.cfg.lambda_is_mean = ck.meta.at("lambda_is_mean").get<bool>();
  m.cfg.clamp_lo = ck.meta.at("clamp_lo").get<double>();
  m.cfg.clamp_hi = ck.meta.at("clamp_hi").get<double>();
  m.review_length_hist =
      ck.meta.at("review_length_hist").get<std::vector<std::pair<int, long>>>();
  m.store = std::move(ck.store);
  // Sanity: the slot set a fresh model of this shape would have must exist.
  for (const auto& name : {std::string("cell.Wi_t"), std::string("cell.Ui"), std::string("cell.bi")})
    require(m.store.has(name), "checkpoint is missing cell slot " + name);
  if (m.has_intensity_head())
    require(m.store.has("head.wt"), "checkpoint is missing intensity head");
  else
    require(m.store.has("head.W1"), "checkpoint is missing exponential head");
  if (m.has_text_head()) require(m.store.has("text.R"), "checkpoint is missing text head");
  return m;
}

inline void save_model(const std::string& path, const Model& m,
                       const OptimizerState* opt = nullptr) {
  save_checkpoint(path, m.store, opt, model_meta(m));
}

inline Model load_model(const std::string& path, OptimizerState* opt_out = nullptr) {
  Checkpoint ck = load_checkpoint(path);
  if (opt_out && ck.opt) *opt_out = std::move(*ck.opt);
  return model_from_checkpoint(std::move(ck));
}

inline std::vector<std::pair<int, long>> compute_review_length_hist(
    const std::vector<ItemSequence>& seqs) {
  std::map<int, long> counts;
  for (const auto& seq : seqs)
    for (const auto& r : seq.reviews) counts[r.bow.total_words] += 1;
  return std::vector<std::pair<int, long>>(counts.begin(), counts.end());
}

}  // namespace rprm
