// Command-line entry point: preprocess, synth, train, evaluate, predict,
// simulate and gradcheck subcommands over the rprm library.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rprm/checkpoint.hpp"
#include "rprm/corpus.hpp"
#include "rprm/dataset.hpp"
#include "rprm/evaluation.hpp"
#include "rprm/gradcheck.hpp"
#include "rprm/log.hpp"
#include "rprm/models.hpp"
#include "rprm/synth.hpp"
#include "rprm/training.hpp"
#include "rprm/tpp.hpp"
#include "rprm/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Every file-producing run leaves a manifest (config snapshot, seed, code
// version) next to its outputs.
void write_manifest(const std::string& path, const std::string& subcommand, const json& options,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  json j;
  j["tool"] = "rprm";
  j["version"] = rprm::kVersion;
  j["subcommand"] = subcommand;
  j["options"] = options;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  rprm::write_file(path, j.dump(2) + "\n");
}

std::string sibling_path(const std::string& out, const std::string& suffix) {
  return out + suffix;
}

// data.jsonl -> data.train.jsonl / data.test.jsonl
std::pair<std::string, std::string> split_paths(const std::string& out) {
  const fs::path p(out);
  const std::string stem = (p.parent_path() / p.stem()).string();
  const std::string ext = p.extension().string();
  return {stem + ".train" + ext, stem + ".test" + ext};
}

std::unordered_set<std::string> resolve_stopwords(const std::string& spec) {
  if (spec == "builtin") return rprm::builtin_stopwords();
  if (spec == "none") return {};
  std::unordered_set<std::string> out;
  for (const auto& line : rprm::split(rprm::read_file(spec), '\n')) {
    const std::string tok = rprm::trim(line);
    if (!tok.empty()) out.insert(tok);
  }
  return out;
}

// --- preprocess -------------------------------------------------------------

struct PreprocessArgs {
  std::string input, business_file, category, from, to, epoch, stopwords = "builtin", out;
  int vocab_size = 2000;
  int min_reviews = 5;
  double split_fraction = 0.0;
  uint64_t split_seed = 0;
};

int run_preprocess(const PreprocessArgs& a) {
  const double from_days = rprm::parse_datetime_days_or_fail(a.from, "--from");
  double to_days = rprm::parse_datetime_days_or_fail(a.to, "--to");
  if (rprm::trim(a.to).size() == 10) to_days += 86399.0 / 86400.0;  // whole end day
  const std::string epoch = a.epoch.empty() ? a.from : a.epoch;
  const double epoch_days = rprm::parse_datetime_days_or_fail(epoch, "--epoch");

  std::unordered_map<std::string, std::string> business_map;
  if (!a.business_file.empty()) business_map = rprm::load_business_categories(a.business_file);

  rprm::IngestStats ingest_stats;
  const auto raws = rprm::ingest(a.input, from_days, to_days, a.category, ingest_stats,
                                 a.business_file.empty() ? nullptr : &business_map);

  // Items that will survive the minimum-length filter, before any split.
  std::map<std::string, long> reviews_per_item;
  for (const auto& r : raws) reviews_per_item[r.item_id] += 1;
  std::vector<std::string> survivors;
  for (const auto& [id, n] : reviews_per_item)
    if (n >= a.min_reviews) survivors.push_back(id);
  rprm::require(!survivors.empty(), "preprocess: no item has >= " + std::to_string(a.min_reviews) +
                                        " reviews in the window");

  // Vocabulary corpus: training items only when a split is requested.
  std::unordered_set<std::string> train_ids(survivors.begin(), survivors.end());
  std::unordered_set<std::string> test_ids;
  if (a.split_fraction > 0.0) {
    rprm::require(survivors.size() >= 2, "preprocess: need >= 2 items to split");
    const auto parts = rprm::split_item_ids(survivors, a.split_fraction, a.split_seed);
    train_ids = parts.first;
    test_ids = parts.second;
  }
  std::vector<std::vector<std::string>> docs;
  for (const auto& r : raws)
    if (train_ids.count(r.item_id)) docs.push_back(rprm::tokenize(r.text));

  rprm::Dataset ds;
  ds.epoch = epoch;
  ds.vocab = rprm::build_vocabulary(docs, a.vocab_size, resolve_stopwords(a.stopwords));
  rprm::AssembleStats assemble_stats;
  ds.sequences =
      rprm::assemble_sequences(raws, ds.vocab, epoch_days, a.min_reviews, assemble_stats);

  rprm::save_dataset(a.out, ds);
  std::vector<std::string> outputs = {a.out};

  if (a.split_fraction > 0.0) {
    const auto [train_path, test_path] = split_paths(a.out);
    rprm::Dataset train_ds, test_ds;
    train_ds.vocab = test_ds.vocab = ds.vocab;
    train_ds.epoch = test_ds.epoch = ds.epoch;
    for (const auto& seq : ds.sequences) {
      if (train_ids.count(seq.item_id))
        train_ds.sequences.push_back(seq);
      else
        test_ds.sequences.push_back(seq);
    }
    rprm::save_dataset(train_path, train_ds);
    rprm::save_dataset(test_path, test_ds);
    outputs.push_back(train_path);
    outputs.push_back(test_path);
    rprm::log_info("split: " + std::to_string(train_ds.sequences.size()) + " train / " +
                   std::to_string(test_ds.sequences.size()) + " test items");
  }

  const std::string stats_path = sibling_path(a.out, ".stats.json");
  rprm::write_file(stats_path,
                   rprm::dataset_stats(ds, &ingest_stats, &assemble_stats).dump(2) + "\n");
  outputs.push_back(stats_path);

  json options;
  options["input"] = a.input;
  options["business_file"] = a.business_file;
  options["category"] = a.category;
  options["from"] = a.from;
  options["to"] = a.to;
  options["epoch"] = epoch;
  options["vocab_size"] = a.vocab_size;
  options["min_reviews"] = a.min_reviews;
  options["stopwords"] = a.stopwords;
  options["split"] = a.split_fraction;
  options["seed"] = a.split_seed;
  write_manifest(sibling_path(a.out, ".manifest.json"), "preprocess", options, {a.input}, outputs);

  std::cout << "preprocess: " << ds.sequences.size() << " items, vocabulary " << ds.vocab.size()
            << ", stats " << stats_path << "\n";
  return 0;
}

// --- synth -------------------------------------------------------------------

struct SynthArgs {
  std::string kind = "poisson";
  std::string out;
  rprm::synth::SynthSpec spec;
  double split_fraction = 0.0;
  uint64_t split_seed = 0;
};

int run_synth(const SynthArgs& a) {
  rprm::synth::SynthSpec spec = a.spec;
  spec.kind = rprm::synth::kind_from_name(a.kind);
  const rprm::Dataset ds = rprm::synth::generate(spec);
  rprm::save_dataset(a.out, ds);
  std::vector<std::string> outputs = {a.out};
  if (a.split_fraction > 0.0) {
    const auto [train_seqs, test_seqs] = rprm::split(ds.sequences, a.split_fraction, a.split_seed);
    const auto [train_path, test_path] = split_paths(a.out);
    rprm::Dataset part;
    part.vocab = ds.vocab;
    part.epoch = ds.epoch;
    part.sequences = train_seqs;
    rprm::save_dataset(train_path, part);
    part.sequences = test_seqs;
    rprm::save_dataset(test_path, part);
    outputs.push_back(train_path);
    outputs.push_back(test_path);
  }
  json options;
  options["kind"] = a.kind;
  options["rate"] = spec.rate;
  options["mu"] = spec.mu;
  options["alpha"] = spec.alpha;
  options["beta"] = spec.beta;
  options["fast_mean"] = spec.fast_mean_days;
  options["slow_mean"] = spec.slow_mean_days;
  options["vocab_size"] = spec.vocab_size;
  options["sequences"] = spec.sequences;
  options["events"] = spec.events_per_sequence;
  options["horizon"] = spec.horizon_days;
  options["words_per_review"] = spec.words_per_review;
  options["seed"] = spec.seed;
  options["split"] = a.split_fraction;
  options["split_seed"] = a.split_seed;
  write_manifest(sibling_path(a.out, ".manifest.json"), "synth", options, {}, outputs);
  std::cout << "synth: wrote " << ds.sequences.size() << " sequences to " << a.out << "\n";
  return 0;
}

// --- train --------------------------------------------------------------------

struct TrainArgs {
  std::string config_path, data, variant, out;
  std::optional<uint64_t> seed;
  std::optional<double> lr;
  std::optional<int> epochs, batch, hidden, embed, patience;
};

int run_train(const TrainArgs& a) {
  rprm::TrainConfig cfg;
  if (!a.config_path.empty()) cfg = rprm::parse_train_config(rprm::read_file(a.config_path));
  if (!a.variant.empty()) cfg.variant = rprm::variant_from_name(a.variant);
  if (a.seed) cfg.seed = *a.seed;
  if (a.lr) cfg.adam.lr = *a.lr;
  if (a.epochs) cfg.max_epochs = *a.epochs;
  if (a.batch) cfg.batch_size = *a.batch;
  if (a.hidden) cfg.hidden_dim = *a.hidden;
  if (a.embed) cfg.embed_dim = *a.embed;
  if (a.patience) cfg.patience = *a.patience;

  const rprm::Dataset ds = rprm::load_dataset(a.data);
  rprm::require(!ds.sequences.empty(), "train: dataset has no sequences");
  const auto [train_part, val_part] =
      rprm::make_validation_split(ds.sequences, cfg.val_fraction, cfg.seed);

  fs::create_directories(a.out);
  const auto result = rprm::train(cfg, train_part, val_part, ds.vocab.size());

  const std::string ckpt_path = (fs::path(a.out) / "checkpoint.json").string();
  rprm::save_model(ckpt_path, result.model, &result.opt);

  std::string log_text;
  for (const auto& row : result.report.epochs) log_text += result.report.row_json(row).dump() + "\n";
  const std::string log_path = (fs::path(a.out) / "train_log.jsonl").string();
  rprm::write_file(log_path, log_text);

  json options = cfg.to_json();
  options["data"] = a.data;
  write_manifest((fs::path(a.out) / "manifest.json").string(), "train", options, {a.data},
                 {ckpt_path, log_path});

  if (result.report.aborted) {
    std::cerr << "train: aborted (" << result.report.abort_reason
              << "); last good checkpoint written to " << ckpt_path << "\n";
    return 1;
  }
  std::cout << "train: best epoch " << result.report.best_epoch << " val_nll "
            << result.report.best_val_nll << " -> " << ckpt_path << "\n";
  return 0;
}

// --- evaluate -------------------------------------------------------------------

struct EvaluateArgs {
  std::vector<std::string> checkpoints;
  std::string data, out, table;
};

int run_evaluate(const EvaluateArgs& a) {
  const rprm::Dataset ds = rprm::load_dataset(a.data);
  std::vector<rprm::MetricReport> reports;
  std::string jsonl;
  for (const auto& path : a.checkpoints) {
    rprm::Model model = rprm::load_model(path);
    rprm::require(model.cfg.vocab == ds.vocab.size(),
                  "evaluate: checkpoint vocabulary " + std::to_string(model.cfg.vocab) +
                      " does not match dataset vocabulary " + std::to_string(ds.vocab.size()));
    rprm::MetricReport r = rprm::evaluate(model, ds.sequences);
    jsonl += r.to_json().dump() + "\n";
    reports.push_back(std::move(r));
  }
  rprm::write_file(a.out, jsonl);
  const std::string table_path = a.table.empty() ? sibling_path(a.out, ".table.txt") : a.table;
  const std::string table = rprm::render_comparison_table(reports);
  rprm::write_file(table_path, table);
  json options;
  options["checkpoints"] = a.checkpoints;
  options["data"] = a.data;
  write_manifest(sibling_path(a.out, ".manifest.json"), "evaluate", options, a.checkpoints,
                 {a.out, table_path});
  std::cout << table;
  return 0;
}

// --- predict ---------------------------------------------------------------------

struct PredictArgs {
  std::string checkpoint, data, item, estimate = "mean";
  int prefix = 0;
  int top_k = 5;
};

int run_predict(const PredictArgs& a) {
  rprm::Model model = rprm::load_model(a.checkpoint);
  const rprm::Dataset ds = rprm::load_dataset(a.data);
  rprm::require(model.cfg.vocab == ds.vocab.size(), "predict: checkpoint/dataset vocabulary mismatch");
  const rprm::ItemSequence* seq = nullptr;
  for (const auto& s : ds.sequences)
    if (s.item_id == a.item) seq = &s;
  if (!seq) rprm::fail("predict: item '" + a.item + "' not found in dataset");
  const int n = a.prefix > 0 ? std::min(a.prefix, seq->size()) : seq->size();
  const std::span<const rprm::Review> prefix(seq->reviews.data(), size_t(n));

  const auto estimate =
      a.estimate == "median" ? rprm::PointEstimate::kMedian : rprm::PointEstimate::kMean;
  const auto moments = rprm::predict_next_gap_moments(model, prefix, estimate);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.6g", moments.mean);
  std::cout << "item " << a.item << " prefix_reviews " << n << "\n";
  std::cout << (a.estimate == "median" ? "median" : "expected") << "_next_gap_days " << buf << "\n";
  if (moments.defect > 0) {
    std::snprintf(buf, sizeof(buf), "%.6g", moments.defect);
    std::cout << "no_event_probability " << buf << "\n";
  }
  if (model.has_text_head()) {
    const auto probs = rprm::predict_next_text(model, prefix);
    std::vector<int> idx(probs.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = int(i);
    std::sort(idx.begin(), idx.end(), [&](int x, int y) {
      if (probs[size_t(x)] != probs[size_t(y)]) return probs[size_t(x)] > probs[size_t(y)];
      return x < y;
    });
    std::cout << "top_words\n";
    for (int k = 0; k < std::min<int>(a.top_k, int(idx.size())); ++k) {
      std::snprintf(buf, sizeof(buf), "%.6g", probs[size_t(idx[size_t(k)])]);
      std::cout << "  " << ds.vocab.tokens[size_t(idx[size_t(k)])] << " " << buf << "\n";
    }
  } else {
    std::cout << "top_words unavailable (variant " << rprm::variant_name(model.cfg.variant)
              << " has no text head)\n";
  }
  return 0;
}

// --- simulate ---------------------------------------------------------------------

struct SimulateArgs {
  std::string checkpoint, data, item, out;
  int prefix = 0;
  double horizon = 0.0;
  uint64_t seed = 0;
};

int run_simulate(const SimulateArgs& a) {
  rprm::Model model = rprm::load_model(a.checkpoint);
  const rprm::Dataset ds = rprm::load_dataset(a.data);
  rprm::require(model.cfg.vocab == ds.vocab.size(),
                "simulate: checkpoint/dataset vocabulary mismatch");
  std::span<const rprm::Review> prefix;
  if (!a.item.empty()) {
    const rprm::ItemSequence* seq = nullptr;
    for (const auto& s : ds.sequences)
      if (s.item_id == a.item) seq = &s;
    if (!seq) rprm::fail("simulate: item '" + a.item + "' not found in dataset");
    const int n = a.prefix > 0 ? std::min(a.prefix, seq->size()) : seq->size();
    prefix = std::span<const rprm::Review>(seq->reviews.data(), size_t(n));
  }
  rprm::Rng rng(a.seed);
  const auto events = rprm::simulate(model, prefix, a.horizon, rng);
  std::string out;
  for (const auto& ev : events) {
    json j;
    j["t"] = ev.time_days;
    json bow = json::array();
    for (const auto& [idx, c] : ev.bow.counts) bow.push_back({idx, c});
    j["bow"] = std::move(bow);
    out += j.dump() + "\n";
  }
  rprm::write_file(a.out, out);
  json options;
  options["checkpoint"] = a.checkpoint;
  options["data"] = a.data;
  options["item"] = a.item;
  options["prefix"] = a.prefix;
  options["horizon"] = a.horizon;
  options["seed"] = a.seed;
  write_manifest(sibling_path(a.out, ".manifest.json"), "simulate", options,
                 {a.checkpoint, a.data}, {a.out});
  std::cout << "simulate: wrote " << events.size() << " events to " << a.out << "\n";
  return 0;
}

// --- gradcheck --------------------------------------------------------------------

struct GradcheckArgs {
  int hidden = 4, embed = 4, vocab = 10, events = 3;
  uint64_t seed = 0;
  double tolerance = 1e-5;
  double step = 1e-5;
};

rprm::ItemSequence random_sequence(int events, int vocab, uint64_t seed) {
  rprm::Rng rng(seed);
  rprm::ItemSequence seq;
  seq.item_id = "gradcheck";
  double t = 0;
  for (int j = 0; j < events; ++j) {
    t += rng.uniform(0.5, 3.0);
    rprm::Review r;
    r.time_days = t;
    const int words = 1 + int(rng.below(3));
    std::map<int, int> counts;
    for (int k = 0; k < words; ++k) counts[int(rng.below(uint64_t(vocab)))] += 1;
    for (const auto& [idx, c] : counts) {
      r.bow.counts.emplace_back(idx, c);
      r.bow.total_words += c;
    }
    seq.reviews.push_back(std::move(r));
  }
  return seq;
}

int run_gradcheck(const GradcheckArgs& a) {
  const rprm::ItemSequence seq = random_sequence(a.events, a.vocab, a.seed * 7 + 3);
  bool all_ok = true;
  std::printf("%-10s %-16s %14s  %s\n", "variant", "slot", "max_rel_err", "status");
  for (const auto variant : {rprm::Variant::kRprm, rprm::Variant::kLstmBow, rprm::Variant::kRpp,
                             rprm::Variant::kLstm}) {
    rprm::ModelConfig mc;
    mc.variant = variant;
    mc.hidden_dim = a.hidden;
    mc.embed_dim = a.embed;
    mc.vocab = a.vocab;
    rprm::Model model = rprm::make_model(mc, a.seed);
    // The FD comparison runs at a resampled parameter point; the training
    // init leaves some slot gradients below FD resolution.
    rprm::Rng point_rng(a.seed + 1000);
    rprm::randomize_all(model.store, point_rng, 0.7);
    auto eval = [&](bool with_grad) {
      return rprm::eval_sequence_loss(model, seq.reviews, with_grad).value;
    };
    const auto report = rprm::grad_check(model.store, eval, a.step);
    for (const auto& slot : report.slots) {
      const bool ok = slot.max_rel_err < a.tolerance;
      all_ok = all_ok && ok;
      std::printf("%-10s %-16s %14.3e  %s\n", rprm::variant_name(variant), slot.name.c_str(),
                  slot.max_rel_err, ok ? "pass" : "FAIL");
    }
  }
  std::printf("gradcheck %s (tolerance %.1e)\n", all_ok ? "PASS" : "FAIL", a.tolerance);
  return all_ok ? 0 : 1;
}

std::string is_date_validator(const std::string& s) {
  if (!rprm::parse_datetime_days(s)) return "not a valid date: " + s;
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recurrent marked temporal point process over review streams"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  auto* cmd_pre = app.add_subcommand("preprocess", "ingest raw reviews into a dataset");
  cmd_pre->add_option("--input", pre.input, "line-delimited review records")->required();
  cmd_pre->add_option("--business-file", pre.business_file, "business_id -> categories records");
  cmd_pre->add_option("--category", pre.category, "keep only this category label");
  cmd_pre->add_option("--from", pre.from, "window start date")->required()->check(is_date_validator);
  cmd_pre->add_option("--to", pre.to, "window end date (inclusive)")->required()->check(is_date_validator);
  cmd_pre->add_option("--epoch", pre.epoch, "epoch date for day offsets (default: --from)")
      ->check(is_date_validator);
  cmd_pre->add_option("--vocab-size", pre.vocab_size, "vocabulary size")->check(CLI::PositiveNumber);
  cmd_pre->add_option("--min-reviews", pre.min_reviews, "minimum reviews per item")
      ->check(CLI::PositiveNumber);
  cmd_pre->add_option("--stopwords", pre.stopwords, "builtin | none | path to list");
  cmd_pre->add_option("--split", pre.split_fraction, "train fraction for an item-level split")
      ->check(CLI::Range(0.0, 1.0));
  cmd_pre->add_option("--split-seed", pre.split_seed, "split seed");
  cmd_pre->add_option("--out", pre.out, "output dataset path")->required();
  cmd_pre->callback([&] { std::exit(run_preprocess(pre)); });

  SynthArgs sy;
  auto* cmd_sy = app.add_subcommand("synth", "generate a synthetic dataset");
  cmd_sy->add_option("--kind", sy.kind, "poisson | hawkes | markdep")
      ->required()
      ->check(CLI::IsMember({"poisson", "hawkes", "markdep"}));
  cmd_sy->add_option("--rate", sy.spec.rate, "poisson rate per day");
  cmd_sy->add_option("--mu", sy.spec.mu, "hawkes base rate");
  cmd_sy->add_option("--alpha", sy.spec.alpha, "hawkes jump size");
  cmd_sy->add_option("--beta", sy.spec.beta, "hawkes decay rate");
  cmd_sy->add_option("--fast-mean", sy.spec.fast_mean_days, "gap mean after the fast token");
  cmd_sy->add_option("--slow-mean", sy.spec.slow_mean_days, "gap mean after the slow token");
  cmd_sy->add_option("--vocab-size", sy.spec.vocab_size, "synthetic vocabulary size");
  cmd_sy->add_option("--sequences", sy.spec.sequences, "number of sequences");
  cmd_sy->add_option("--events", sy.spec.events_per_sequence, "events per sequence (0: use horizon)");
  cmd_sy->add_option("--horizon", sy.spec.horizon_days, "horizon in days when --events 0");
  cmd_sy->add_option("--words", sy.spec.words_per_review, "words per review");
  cmd_sy->add_option("--seed", sy.spec.seed, "generator seed");
  cmd_sy->add_option("--split", sy.split_fraction, "train fraction for an item-level split")
      ->check(CLI::Range(0.0, 1.0));
  cmd_sy->add_option("--split-seed", sy.split_seed, "split seed");
  cmd_sy->add_option("--out", sy.out, "output dataset path")->required();
  cmd_sy->callback([&] { std::exit(run_synth(sy)); });

  TrainArgs tr;
  auto* cmd_tr = app.add_subcommand("train", "maximum-likelihood training");
  cmd_tr->add_option("--config", tr.config_path, "key = value training config");
  cmd_tr->add_option("--data", tr.data, "training dataset")->required();
  cmd_tr->add_option("--variant", tr.variant, "rprm | lstm-bow | rpp | lstm")
      ->check(CLI::IsMember({"rprm", "lstm-bow", "rpp", "lstm"}));
  cmd_tr->add_option("--seed", tr.seed, "seed override");
  cmd_tr->add_option("--lr", tr.lr, "learning rate override");
  cmd_tr->add_option("--epochs", tr.epochs, "max epochs override");
  cmd_tr->add_option("--batch", tr.batch, "batch size override");
  cmd_tr->add_option("--hidden", tr.hidden, "hidden size override");
  cmd_tr->add_option("--embed", tr.embed, "embedding size override");
  cmd_tr->add_option("--patience", tr.patience, "early-stopping patience override");
  cmd_tr->add_option("--out", tr.out, "output directory")->required();
  cmd_tr->callback([&] { std::exit(run_train(tr)); });

  EvaluateArgs ev;
  auto* cmd_ev = app.add_subcommand("evaluate", "compute RMSE / R^2 / perplexity on a dataset");
  cmd_ev->add_option("--checkpoint", ev.checkpoints, "model checkpoint (repeatable)")->required();
  cmd_ev->add_option("--data", ev.data, "evaluation dataset")->required();
  cmd_ev->add_option("--out", ev.out, "metrics output (JSON lines)")->required();
  cmd_ev->add_option("--table", ev.table, "comparison table path (default: <out>.table.txt)");
  cmd_ev->callback([&] { std::exit(run_evaluate(ev)); });

  PredictArgs pr;
  auto* cmd_pr = app.add_subcommand("predict", "predict the next gap and review words for an item");
  cmd_pr->add_option("--checkpoint", pr.checkpoint, "model checkpoint")->required();
  cmd_pr->add_option("--data", pr.data, "dataset with the item's history")->required();
  cmd_pr->add_option("--item", pr.item, "item id")->required();
  cmd_pr->add_option("--prefix", pr.prefix, "number of history reviews to use (default: all)");
  cmd_pr->add_option("--top-k", pr.top_k, "number of words to print");
  cmd_pr->add_option("--estimate", pr.estimate, "mean | median")
      ->check(CLI::IsMember({"mean", "median"}));
  cmd_pr->callback([&] { std::exit(run_predict(pr)); });

  SimulateArgs si;
  auto* cmd_si = app.add_subcommand("simulate", "sample an event stream from a checkpoint");
  cmd_si->add_option("--checkpoint", si.checkpoint, "model checkpoint")->required();
  cmd_si->add_option("--data", si.data, "dataset providing vocabulary and prefixes")->required();
  cmd_si->add_option("--item", si.item, "item id for the seed prefix (default: cold start)");
  cmd_si->add_option("--prefix", si.prefix, "number of prefix reviews (default: all)");
  cmd_si->add_option("--horizon", si.horizon, "days to simulate past the prefix")->required();
  cmd_si->add_option("--seed", si.seed, "sampler seed");
  cmd_si->add_option("--out", si.out, "event stream output (JSON lines)")->required();
  cmd_si->callback([&] { std::exit(run_simulate(si)); });

  GradcheckArgs gc;
  auto* cmd_gc = app.add_subcommand("gradcheck", "finite-difference check of every variant's loss");
  cmd_gc->add_option("--hidden", gc.hidden, "hidden size");
  cmd_gc->add_option("--embed", gc.embed, "embedding size");
  cmd_gc->add_option("--vocab", gc.vocab, "vocabulary size");
  cmd_gc->add_option("--events", gc.events, "events in the test sequence");
  cmd_gc->add_option("--seed", gc.seed, "seed");
  cmd_gc->add_option("--tolerance", gc.tolerance, "relative error tolerance");
  cmd_gc->add_option("--step", gc.step, "finite-difference step");
  cmd_gc->callback([&] { std::exit(run_gradcheck(gc)); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
