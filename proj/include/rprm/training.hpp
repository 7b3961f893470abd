#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "rprm/log.hpp"
#include "rprm/models.hpp"
#include "rprm/optimizer.hpp"
#include "rprm/util.hpp"

namespace rprm {

// Flat key = value training configuration ('#' starts a comment). Unknown
// keys are rejected so typos cannot silently fall back to defaults.
struct TrainConfig {
  Variant variant = Variant::kRprm;
  int hidden_dim = 64;
  int embed_dim = 64;
  AdamConfig adam;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 5;
  uint64_t seed = 0;
  double grad_clip = 5.0;
  double clamp_lo = -40.0;
  double clamp_hi = 40.0;
  double val_fraction = 0.1;
  bool lambda_is_mean = false;
  int max_seq_events = 500;

  ModelConfig model_config(int vocab) const {
    ModelConfig mc;
    mc.variant = variant;
    mc.hidden_dim = hidden_dim;
    mc.embed_dim = embed_dim;
    mc.vocab = vocab;
    mc.lambda_is_mean = lambda_is_mean;
    mc.clamp_lo = clamp_lo;
    mc.clamp_hi = clamp_hi;
    return mc;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["variant"] = variant_name(variant);
    j["hidden_dim"] = hidden_dim;
    j["embed_dim"] = embed_dim;
    j["learning_rate"] = adam.lr;
    j["adam_beta1"] = adam.beta1;
    j["adam_beta2"] = adam.beta2;
    j["adam_eps"] = adam.eps;
    j["batch_size"] = batch_size;
    j["max_epochs"] = max_epochs;
    j["patience"] = patience;
    j["seed"] = seed;
    j["grad_clip"] = grad_clip;
    j["clamp_lo"] = clamp_lo;
    j["clamp_hi"] = clamp_hi;
    j["val_fraction"] = val_fraction;
    j["lambda_is_mean"] = lambda_is_mean;
    j["max_seq_events"] = max_seq_events;
    return j;
  }
};

inline TrainConfig parse_train_config(const std::string& text) {
  TrainConfig cfg;
  size_t pos = 0;
  int lineno = 0;
  while (pos <= text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const size_t eq = line.find('=');
    require(eq != std::string::npos, "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "variant") cfg.variant = variant_from_name(value);
      else if (key == "hidden_dim") cfg.hidden_dim = std::stoi(value);
      else if (key == "embed_dim") cfg.embed_dim = std::stoi(value);
      else if (key == "learning_rate") cfg.adam.lr = std::stod(value);
      else if (key == "adam_beta1") cfg.adam.beta1 = std::stod(value);
      else if (key == "adam_beta2") cfg.adam.beta2 = std::stod(value);
      else if (key == "adam_eps") cfg.adam.eps = std::stod(value);
      else if (key == "batch_size") cfg.batch_size = std::stoi(value);
      else if (key == "max_epochs") cfg.max_epochs = std::stoi(value);
      else if (key == "patience") cfg.patience = std::stoi(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "grad_clip") cfg.grad_clip = std::stod(value);
      else if (key == "clamp_lo") cfg.clamp_lo = std::stod(value);
      else if (key == "clamp_hi") cfg.clamp_hi = std::stod(value);
      else if (key == "val_fraction") cfg.val_fraction = std::stod(value);
      else if (key == "lambda_is_mean") cfg.lambda_is_mean = (value == "true" || value == "1");
      else if (key == "max_seq_events") cfg.max_seq_events = std::stoi(value);
      else fail("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      fail("config line " + std::to_string(lineno) + ": bad value for '" + key + "'");
    }
    if (end == text.size()) break;
  }
  require(cfg.hidden_dim >= 1 && cfg.embed_dim >= 1, "config: dimensions must be >= 1");
  require(cfg.adam.lr > 0, "config: learning_rate must be > 0");
  require(cfg.batch_size >= 1 && cfg.max_epochs >= 1 && cfg.patience >= 1,
          "config: batch_size, max_epochs and patience must be >= 1");
  return cfg;
}

struct EpochRow {
  int epoch = 0;
  double train_nll = 0.0;
  double val_nll = 0.0;
  double wall_seconds = 0.0;
  long clamp_events = 0;
  long clip_events = 0;
};

struct TrainReport {
  std::vector<EpochRow> epochs;
  int best_epoch = -1;
  double best_val_nll = 0.0;
  long truncated_sequences = 0;
  bool aborted = false;
  std::string abort_reason;

  nlohmann::json row_json(const EpochRow& r) const {
    nlohmann::json j;
    j["epoch"] = r.epoch;
    j["train_nll"] = r.train_nll;
    j["val_nll"] = r.val_nll;
    j["wall_seconds"] = r.wall_seconds;
    j["clamp_events"] = r.clamp_events;
    j["clip_events"] = r.clip_events;
    return j;
  }
};

// Fields pinned by seed + config + data (wall time excluded).
inline bool deterministic_fields_equal(const TrainReport& a, const TrainReport& b) {
  if (a.epochs.size() != b.epochs.size() || a.best_epoch != b.best_epoch) return false;
  for (size_t i = 0; i < a.epochs.size(); ++i) {
    const auto& x = a.epochs[i];
    const auto& y = b.epochs[i];
    if (x.epoch != y.epoch || x.train_nll != y.train_nll || x.val_nll != y.val_nll ||
        x.clamp_events != y.clamp_events || x.clip_events != y.clip_events)
      return false;
  }
  return true;
}

struct TrainResult {
  Model model;
  OptimizerState opt;
  TrainReport report;
};

// Mean per-sequence negative log-likelihood; read-only over the parameters.
inline double evaluate_nll(Model& m, const std::vector<ItemSequence>& data) {
  require(!data.empty(), "evaluate_nll: empty dataset");
  double total = 0;
  long count = 0;
  for (const auto& seq : data) {
    if (seq.size() < 2) continue;
    total += eval_sequence_loss(m, seq.reviews, false).value;
    count += 1;
  }
  require(count > 0, "evaluate_nll: no sequence has >= 2 reviews");
  return total / double(count);
}

// Maximum-likelihood training: whole-sequence batches, Adam with global
// gradient-norm clipping, early stopping on validation NLL. The returned
// model carries the parameters of the best validation epoch. Deterministic
// given config + data + seed.
inline TrainResult train(const TrainConfig& cfg, const std::vector<ItemSequence>& train_set,
                         const std::vector<ItemSequence>& val_set, int vocab_size) {
  std::vector<const ItemSequence*> usable;
  for (const auto& s : train_set)
    if (s.size() >= 2) usable.push_back(&s);
  require(!usable.empty(), "train: no training sequence has >= 2 reviews");
  require(!val_set.empty(), "train: empty validation set");

  TrainResult result;
  result.model = make_model(cfg.model_config(vocab_size), cfg.seed);
  result.model.review_length_hist = compute_review_length_hist(train_set);
  result.opt.init(result.model.store, cfg.adam);
  Model& model = result.model;
  TrainReport& report = result.report;

  auto best_values = model.store.snapshot_values();
  OptimizerState best_opt = result.opt;
  double best_val = std::numeric_limits<double>::infinity();
  int epochs_since_best = 0;

  Rng shuffle_rng = derive_rng(cfg.seed, 0x5EED);
  std::vector<size_t> order(usable.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[size_t(shuffle_rng.below(i + 1))]);

    double epoch_loss = 0;
    long epoch_clamp = 0, epoch_clip = 0;
    auto snapshot = model.store.snapshot_values();
    bool failed = false;
    std::string failure;

    for (size_t start = 0; start < order.size() && !failed; start += size_t(cfg.batch_size)) {
      const size_t stop = std::min(order.size(), start + size_t(cfg.batch_size));
      model.store.zero_grad();
      double batch_loss = 0;
      try {
        for (size_t k = start; k < stop; ++k) {
          const ItemSequence& seq = *usable[order[k]];
          std::span<const Review> reviews(seq.reviews);
          if (cfg.max_seq_events > 0 && int(reviews.size()) > cfg.max_seq_events) {
            reviews = reviews.subspan(0, size_t(cfg.max_seq_events));
            report.truncated_sequences += 1;
          }
          const LossEval ev = eval_sequence_loss(model, reviews, true);
          batch_loss += ev.value;
          epoch_clamp += ev.clamp_events;
        }
        if (!std::isfinite(batch_loss)) fail("non-finite batch loss");
        const double inv = 1.0 / double(stop - start);
        model.store.scale_grad(inv);
        if (clip_grad_norm(model.store, cfg.grad_clip)) epoch_clip += 1;
        adam_step(model.store, result.opt);
        epoch_loss += batch_loss;
      } catch (const std::exception& e) {
        failed = true;
        failure = e.what();
      }
    }

    if (failed) {
      report.aborted = true;
      report.abort_reason = failure;
      if (std::isfinite(best_val)) {
        model.store.restore_values(best_values);
        result.opt = best_opt;
      } else {
        model.store.restore_values(snapshot);
      }
      log_warn("training aborted at epoch " + std::to_string(epoch) + ": " + failure);
      break;
    }

    EpochRow row;
    row.epoch = epoch;
    row.train_nll = epoch_loss / double(order.size());
    row.val_nll = evaluate_nll(model, val_set);
    row.clamp_events = epoch_clamp;
    row.clip_events = epoch_clip;
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(row);

    if (row.val_nll < best_val) {
      best_val = row.val_nll;
      best_values = model.store.snapshot_values();
      best_opt = result.opt;
      report.best_epoch = epoch;
      epochs_since_best = 0;
    } else {
      epochs_since_best += 1;
      if (epochs_since_best >= cfg.patience) break;
    }
  }

  if (std::isfinite(best_val)) {
    model.store.restore_values(best_values);
    result.opt = best_opt;
    report.best_val_nll = best_val;
  }
  if (report.truncated_sequences > 0)
    log_warn("training truncated " + std::to_string(report.truncated_sequences) +
             " long sequence evaluation(s) to " + std::to_string(cfg.max_seq_events) + " events");
  return result;
}

// Seeded item-level validation carve-out used by the CLI; falls back to the
// training set itself when there are too few items to split.
inline std::pair<std::vector<ItemSequence>, std::vector<ItemSequence>> make_validation_split(
    const std::vector<ItemSequence>& data, double val_fraction, uint64_t seed) {
  if (data.size() < 2 || val_fraction <= 0.0) return {data, data};
  auto [val, train_part] = split(data, std::min(0.5, val_fraction), seed);
  return {train_part, val};
}

}  // namespace rprm
