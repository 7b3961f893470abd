#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "rprm/evaluation.hpp"
#include "rprm/gradcheck.hpp"
#include "rprm/models.hpp"
#include "rprm/training.hpp"

using namespace rprm;

namespace {

ItemSequence random_sequence(int events, int vocab, uint64_t seed, double min_gap = 0.5,
                             double max_gap = 3.0) {
  Rng rng(seed);
  ItemSequence seq;
  seq.item_id = "seq";
  double t = 0;
  for (int j = 0; j < events; ++j) {
    t += rng.uniform(min_gap, max_gap);
    Review r;
    r.time_days = t;
    std::map<int, int> counts;
    const int words = 1 + int(rng.below(3));
    for (int k = 0; k < words; ++k) counts[int(rng.below(uint64_t(vocab)))] += 1;
    for (const auto& [idx, c] : counts) {
      r.bow.counts.emplace_back(idx, c);
      r.bow.total_words += c;
    }
    seq.reviews.push_back(std::move(r));
  }
  return seq;
}

Model zeroed_model(Variant variant, int d, int e, int vocab) {
  ModelConfig mc;
  mc.variant = variant;
  mc.hidden_dim = d;
  mc.embed_dim = e;
  mc.vocab = vocab;
  Model m = make_model(mc, 0);
  for (auto& s : m.store.slots()) std::fill(s.value.begin(), s.value.end(), 0.0);
  return m;
}

Model random_model(Variant variant, int d, int e, int vocab, uint64_t seed) {
  ModelConfig mc;
  mc.variant = variant;
  mc.hidden_dim = d;
  mc.embed_dim = e;
  mc.vocab = vocab;
  return make_model(mc, seed);
}

}  // namespace

TEST_CASE("length-2 rprm loss with zeroed parameters by hand", "[models]") {
  const int v = 10;
  Model m = zeroed_model(Variant::kRprm, 4, 3, v);
  ItemSequence seq;
  seq.reviews.push_back(Review{0.0, {}});
  Review second;
  second.time_days = 1.0;
  second.bow.counts = {{2, 1}, {7, 1}};
  second.bow.total_words = 2;
  seq.reviews.push_back(second);
  // Time term: constant unit intensity over a unit gap gives log f = -1;
  // text term: two words under the uniform head.
  CHECK(sequence_loss(m, seq) == Catch::Approx(1.0 + 2.0 * std::log(double(v))).epsilon(1e-12));
}

TEST_CASE("time-only variants are bitwise blind to the text", "[models]") {
  for (auto variant : {Variant::kRpp, Variant::kLstm}) {
    Model m = random_model(variant, 5, 4, 9, 21);
    ItemSequence seq = random_sequence(6, 9, 22);
    const double base_loss = sequence_loss(m, seq);
    const double base_pred = predict_next_gap(m, std::span<const Review>(seq.reviews.data(), 4));

    ItemSequence scrambled = seq;
    for (auto& r : scrambled.reviews) {
      r.bow.counts = {{0, 5}, {8, 2}};
      r.bow.total_words = 7;
    }
    CHECK(sequence_loss(m, scrambled) == base_loss);
    CHECK(predict_next_gap(m, std::span<const Review>(scrambled.reviews.data(), 4)) == base_pred);
  }
}

TEST_CASE("loss equals the sum of independently computed per-step terms", "[models]") {
  // Dual route: the tape loss against plain per-step evaluation from the
  // value-only unroll.
  for (auto variant : {Variant::kRprm, Variant::kLstmBow, Variant::kRpp, Variant::kLstm}) {
    Model m = random_model(variant, 4, 3, 8, 23);
    const ItemSequence seq = random_sequence(5, 8, 24);
    double total = 0;
    PlainState state = zero_state(m.cfg.hidden_dim);
    double prev_time = seq.reviews[0].time_days;
    for (int j = 0; j + 1 < seq.size(); ++j) {
      lstm_step_values(m.store, m.cell_dims(), featurize(seq.reviews[size_t(j)], prev_time), state);
      prev_time = seq.reviews[size_t(j)].time_days;
      const double delta = seq.reviews[size_t(j) + 1].time_days - prev_time;
      if (m.has_intensity_head()) {
        total += tpp::log_density(gap_distribution(m, state.h), delta);
      } else {
        const double lam = exp_head_rate_output(m, state.h);
        total += std::log(lam) - lam * delta;
      }
      if (m.has_text_head())
        total += bow_log_likelihood(m.store, state.h, seq.reviews[size_t(j) + 1].bow);
    }
    INFO("variant " << variant_name(variant));
    CHECK(sequence_loss(m, seq) == Catch::Approx(-total).margin(1e-10));
  }
}

TEST_CASE("loss decomposes into time-only plus text-only parts", "[models]") {
  for (auto variant : {Variant::kRprm, Variant::kLstmBow}) {
    Model m = random_model(variant, 4, 3, 8, 25);
    const ItemSequence seq = random_sequence(5, 8, 26);
    const double full = sequence_loss(m, seq, LossParts::kAll);
    const double time_only = sequence_loss(m, seq, LossParts::kTimeOnly);
    const double text_only = sequence_loss(m, seq, LossParts::kTextOnly);
    CHECK(full == Catch::Approx(time_only + text_only).margin(1e-10));
  }
}

TEST_CASE("losses of every variant match finite differences", "[models]") {
  // Checked at resampled parameter points: at the tiny training init some
  // recurrent slots have gradients below what double-precision central
  // differences can resolve against an O(10) loss.
  for (const uint64_t seed : {0, 3, 7, 8, 15}) {
    const ItemSequence seq = random_sequence(3, 10, seed * 7 + 3);
    for (auto variant : {Variant::kRprm, Variant::kLstmBow, Variant::kRpp, Variant::kLstm}) {
      Model m = random_model(variant, 4, 4, 10, seed);
      Rng rng(seed + 1000);
      randomize_all(m.store, rng, 0.7);
      auto eval = [&](bool g) { return eval_sequence_loss(m, seq.reviews, g).value; };
      const auto report = grad_check(m.store, eval, 1e-5);
      INFO("variant " << variant_name(variant) << " seed " << seed << "\n"
                      << report.summary(1e-5));
      CHECK(report.max_rel_err < 1e-5);
    }
  }
}

TEST_CASE("short sequences are rejected", "[models]") {
  Model m = random_model(Variant::kRprm, 3, 2, 5, 29);
  ItemSequence seq;
  seq.reviews.push_back(Review{1.0, {}});
  REQUIRE_THROWS(sequence_loss(m, seq));
}

TEST_CASE("exponential head prediction is the distribution mean", "[models]") {
  Model m = zeroed_model(Variant::kLstm, 4, 3, 6);
  // With every other weight zero the softplus argument is exactly b2.
  m.store.at("head.b2").value[0] = std::log(std::exp(4.0 - kMinExpHeadRate) - 1.0);
  const ItemSequence seq = random_sequence(3, 6, 30);
  const double pred = predict_next_gap(m, std::span<const Review>(seq.reviews.data(), 2));
  CHECK(pred == Catch::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("intensity head prediction matches the exponential mean", "[models]") {
  Model m = zeroed_model(Variant::kRprm, 4, 3, 6);
  m.store.at("head.bt").value[0] = std::log(2.0);
  const ItemSequence seq = random_sequence(3, 6, 31);
  const double pred = predict_next_gap(m, std::span<const Review>(seq.reviews.data(), 2));
  CHECK(pred == Catch::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("prediction ignores events after the prefix", "[models]") {
  Model m = random_model(Variant::kRprm, 4, 3, 7, 32);
  ItemSequence seq = random_sequence(6, 7, 33);
  const double before = predict_next_gap(m, std::span<const Review>(seq.reviews.data(), 3));
  seq.reviews[4].time_days += 10.0;
  seq.reviews[5].bow.counts = {{0, 9}};
  seq.reviews[5].bow.total_words = 9;
  const double after = predict_next_gap(m, std::span<const Review>(seq.reviews.data(), 3));
  CHECK(before == after);
}

TEST_CASE("untrained uniform text head predicts 1/V everywhere", "[models]") {
  const int v = 9;
  Model m = zeroed_model(Variant::kRprm, 4, 3, v);
  const ItemSequence seq = random_sequence(3, v, 34);
  const auto probs = predict_next_text(m, std::span<const Review>(seq.reviews.data(), 2));
  REQUIRE(int(probs.size()) == v);
  double total = 0;
  for (double p : probs) {
    CHECK(p == Catch::Approx(1.0 / v).epsilon(1e-12));
    total += p;
  }
  CHECK(total == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("text prediction on time-only variants is an unsupported capability", "[models]") {
  Model m = random_model(Variant::kRpp, 4, 3, 7, 35);
  const ItemSequence seq = random_sequence(3, 7, 36);
  REQUIRE_THROWS_WITH(predict_next_text(m, std::span<const Review>(seq.reviews.data(), 2)),
                      Catch::Matchers::ContainsSubstring("text"));
}

TEST_CASE("simulate with zero horizon yields no events", "[models]") {
  Model m = random_model(Variant::kRprm, 4, 3, 7, 37);
  const ItemSequence seq = random_sequence(3, 7, 38);
  Rng rng(1);
  CHECK(simulate(m, seq.reviews, 0.0, rng).empty());
}

TEST_CASE("simulate is deterministic under a fixed seed", "[models]") {
  Model m = random_model(Variant::kLstmBow, 4, 3, 7, 39);
  m.review_length_hist = {{2, 5}, {3, 3}};
  const ItemSequence seq = random_sequence(3, 7, 40);
  auto run = [&] {
    Rng rng(77);
    const auto events = simulate(m, seq.reviews, 40.0, rng);
    std::vector<double> times;
    for (const auto& e : events) times.push_back(e.time_days);
    return times;
  };
  CHECK(run() == run());
}

TEST_CASE("constant-intensity simulation has Poisson event counts", "[models]") {
  // Zeroed cell keeps h = 0, so the intensity stays exp(bt) = 0.5/day.
  Model m = zeroed_model(Variant::kRpp, 4, 3, 5);
  m.store.at("head.bt").value[0] = std::log(0.5);
  const double horizon = 50.0;
  const int runs = 1000;
  std::vector<double> counts;
  counts.reserve(size_t(runs));
  Rng rng(123);
  for (int i = 0; i < runs; ++i)
    counts.push_back(double(simulate(m, {}, horizon, rng).size()));
  const auto stats = oracles::mean_stderr(counts);
  const double expected = 0.5 * horizon;
  CHECK(std::fabs(stats.mean - expected) < 3.0 * std::sqrt(expected) / std::sqrt(double(runs)));
}

TEST_CASE("model checkpoints round-trip through disk", "[models]") {
  namespace fs = std::filesystem;
  Model m = random_model(Variant::kLstmBow, 4, 3, 7, 41);
  m.review_length_hist = {{3, 10}};
  const std::string path =
      (fs::temp_directory_path() / "rprm_model_roundtrip.json").string();
  save_model(path, m);
  const Model back = load_model(path);
  CHECK(back.cfg.variant == m.cfg.variant);
  CHECK(back.cfg.vocab == m.cfg.vocab);
  CHECK(back.review_length_hist == m.review_length_hist);
  for (int i = 0; i < m.store.num_slots(); ++i)
    CHECK(back.store.slot(i).value == m.store.slot(i).value);
  const std::string again = serialize_checkpoint(back.store, nullptr, model_meta(back));
  CHECK(again == read_file(path));
}

TEST_CASE("degenerate corpus: constant gap and a single repeated token", "[models][slow]") {
  // Sequences with exactly gap 5 and one repeated token; after training the
  // model should predict the gap within 10% and put nearly all text mass on
  // that token.
  const int v = 5;
  std::vector<ItemSequence> corpus;
  for (int i = 0; i < 20; ++i) {
    ItemSequence seq;
    seq.item_id = "const-" + std::to_string(i);
    for (int j = 0; j < 10; ++j) {
      Review r;
      r.time_days = 5.0 * j;
      r.bow.counts = {{0, 3}};
      r.bow.total_words = 3;
      seq.reviews.push_back(r);
    }
    corpus.push_back(std::move(seq));
  }
  TrainConfig cfg;
  cfg.variant = Variant::kRprm;
  cfg.hidden_dim = 8;
  cfg.embed_dim = 4;
  cfg.adam.lr = 2e-2;
  cfg.batch_size = 10;
  cfg.max_epochs = 400;
  cfg.patience = 400;
  cfg.seed = 5;
  auto result = train(cfg, corpus, corpus, v);
  REQUIRE(!result.report.aborted);

  const auto& probe = corpus[0];
  const double pred =
      predict_next_gap(result.model, std::span<const Review>(probe.reviews.data(), 6));
  CHECK(pred == Catch::Approx(5.0).epsilon(0.10));
  const auto probs =
      predict_next_text(result.model, std::span<const Review>(probe.reviews.data(), 6));
  CHECK(probs[0] > 0.99);
}
