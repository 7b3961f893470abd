#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rprm/models.hpp"
#include "rprm/util.hpp"

namespace rprm {

// ---------------------------------------------------------------------------
// Scalar metrics
// ---------------------------------------------------------------------------

inline double rmse(std::span<const double> predictions, std::span<const double> targets) {
  require(predictions.size() == targets.size(), "rmse: length mismatch");
  require(!predictions.empty(), "rmse: empty inputs");
  double acc = 0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    acc += d * d;
  }
  return std::sqrt(acc / double(predictions.size()));
}

// 1 - SS_res / SS_tot with SS_tot about the target mean.
inline double r_squared(std::span<const double> predictions, std::span<const double> targets) {
  require(predictions.size() == targets.size(), "r_squared: length mismatch");
  require(predictions.size() >= 2, "r_squared: needs at least 2 points");
  double mean = 0;
  for (double y : targets) mean += y;
  mean /= double(targets.size());
  double ss_res = 0, ss_tot = 0;
  for (size_t i = 0; i < targets.size(); ++i) {
    ss_res += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
    ss_tot += (targets[i] - mean) * (targets[i] - mean);
  }
  require(ss_tot > 0, "r_squared: targets have zero variance");
  return 1.0 - ss_res / ss_tot;
}

// One scored review for the perplexity metrics.
struct ScoredReview {
  double sum_log_prob = 0.0;  // sum over the review's words of log p(w | h)
  int words = 0;              // M_j
  int history = 0;            // |H_j|, the number of reviews before this one
};

// Literal double-normalized predictive perplexity:
//   exp{ -(1/T) sum_j (1/|H_j|) * (sum_i log p(w_i)) / M_j }.
inline double predictive_perplexity_paper(const std::vector<ScoredReview>& reviews) {
  require(!reviews.empty(), "predictive_perplexity_paper: no scored reviews");
  double acc = 0;
  for (const auto& r : reviews) {
    require(r.words >= 1, "predictive_perplexity_paper: review with zero words must be excluded");
    require(r.history >= 1, "predictive_perplexity_paper: history must be >= 1");
    acc += (r.sum_log_prob / double(r.words)) / double(r.history);
  }
  return std::exp(-acc / double(reviews.size()));
}

// Conventional per-word perplexity: exp(-loglik / words).
inline double predictive_perplexity_perword(double total_log_likelihood, long total_words) {
  require(total_words >= 1, "predictive_perplexity_perword: needs at least one word");
  return std::exp(-total_log_likelihood / double(total_words));
}

// ---------------------------------------------------------------------------
// Test-set evaluation
// ---------------------------------------------------------------------------

struct MetricReport {
  std::string model;
  double rmse = 0.0;
  double r2 = 0.0;
  std::optional<double> pp_paper;    // absent for time-only variants
  std::optional<double> pp_perword;  // absent for time-only variants
  long n_predictions = 0;
  long n_reviews_scored = 0;
  long n_words = 0;
  long n_empty_reviews_excluded = 0;  // zero-word reviews excluded from perplexity

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["model"] = model;
    j["rmse"] = rmse;
    j["r2"] = r2;
    j["pp_paper"] = pp_paper ? nlohmann::json(*pp_paper) : nlohmann::json(nullptr);
    j["pp_perword"] = pp_perword ? nlohmann::json(*pp_perword) : nlohmann::json(nullptr);
    j["n_predictions"] = n_predictions;
    j["n_reviews_scored"] = n_reviews_scored;
    j["n_words"] = n_words;
    j["n_empty_reviews_excluded"] = n_empty_reviews_excluded;
    return j;
  }
};

// Teacher-forced evaluation: for each test sequence, reviews 2..N are
// predicted from the true prefix. Gap predictions are pooled into RMSE/R^2;
// text models additionally score each review's BoW for the perplexities.
// Read-only over the model parameters.
inline MetricReport evaluate(const Model& m, const std::vector<ItemSequence>& test_set,
                             const tpp::QuadratureConfig& quad = {}) {
  require(!test_set.empty(), "evaluate: empty test set");
  MetricReport report;
  report.model = variant_name(m.cfg.variant);
  std::vector<double> preds, targets;
  std::vector<ScoredReview> scored;
  double total_ll = 0;
  long total_words = 0;
  const CellDims dims = m.cell_dims();
  for (const auto& seq : test_set) {
    if (seq.size() < 2) continue;
    PlainState state = zero_state(m.cfg.hidden_dim);
    double prev_time = seq.reviews[0].time_days;
    for (int j = 0; j + 1 < seq.size(); ++j) {
      const Review& current = seq.reviews[size_t(j)];
      lstm_step_values(m.store, dims, featurize(current, prev_time), state);
      prev_time = current.time_days;
      const Review& next = seq.reviews[size_t(j) + 1];

      double gap_pred;
      if (m.has_intensity_head())
        gap_pred = tpp::expected_gap(gap_distribution(m, state.h), quad).mean;
      else {
        const double out = exp_head_rate_output(m, state.h);
        gap_pred = m.cfg.lambda_is_mean ? out : 1.0 / out;
      }
      preds.push_back(gap_pred);
      targets.push_back(next.time_days - current.time_days);

      if (m.has_text_head()) {
        if (next.bow.total_words == 0) {
          report.n_empty_reviews_excluded += 1;
        } else {
          ScoredReview s;
          s.words = next.bow.total_words;
          s.history = j + 1;
          s.sum_log_prob = bow_log_likelihood(m.store, state.h, next.bow);
          total_ll += s.sum_log_prob;
          total_words += s.words;
          scored.push_back(s);
        }
      }
    }
  }
  require(!preds.empty(), "evaluate: no sequence with >= 2 reviews");
  report.n_predictions = long(preds.size());
  report.rmse = rmse(preds, targets);
  report.r2 = r_squared(preds, targets);
  if (m.has_text_head() && !scored.empty()) {
    report.n_reviews_scored = long(scored.size());
    report.n_words = total_words;
    report.pp_paper = predictive_perplexity_paper(scored);
    report.pp_perword = predictive_perplexity_perword(total_ll, total_words);
  }
  return report;
}

// Plain-text comparison table across variants; time-only models show "-"
// in the perplexity columns.
inline std::string render_comparison_table(const std::vector<MetricReport>& reports) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %12s %10s %18s %18s\n", "Model", "RMSE", "R2",
                "Pred. Perplexity", "Per-word PP");
  out += line;
  out += std::string(72, '-') + "\n";
  for (const auto& r : reports) {
    std::string pp = "-", ppw = "-";
    char buf[64];
    if (r.pp_paper) {
      std::snprintf(buf, sizeof(buf), "%.4f", *r.pp_paper);
      pp = buf;
    }
    if (r.pp_perword) {
      std::snprintf(buf, sizeof(buf), "%.4f", *r.pp_perword);
      ppw = buf;
    }
    std::snprintf(line, sizeof(line), "%-10s %12.4f %10.4f %18s %18s\n", r.model.c_str(),
                  r.rmse, r.r2, pp.c_str(), ppw.c_str());
    out += line;
  }
  return out;
}

}  // namespace rprm
