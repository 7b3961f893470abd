#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "rprm/evaluation.hpp"
#include "rprm/synth.hpp"

using namespace rprm;

TEST_CASE("rmse closed-form cases", "[evaluation]") {
  const std::vector<double> p{1.0, 3.0}, t{2.0, 5.0};
  CHECK(rmse(p, p) == 0.0);
  CHECK(rmse(p, t) == Catch::Approx(std::sqrt(2.5)).margin(1e-12));
  // Translation invariance.
  std::vector<double> ps{1.0, 3.0}, ts{2.0, 5.0};
  for (auto& x : ps) x += 17.25;
  for (auto& x : ts) x += 17.25;
  CHECK(rmse(ps, ts) == Catch::Approx(rmse(p, t)).margin(1e-12));
  CHECK_THROWS(rmse(std::vector<double>{1.0}, t));
  CHECK_THROWS(rmse(std::vector<double>{}, std::vector<double>{}));
}

TEST_CASE("r_squared closed-form cases", "[evaluation]") {
  const std::vector<double> t{1.0, 2.0};
  CHECK(r_squared(t, t) == 1.0);
  const std::vector<double> mean_pred{1.5, 1.5};
  CHECK(std::fabs(r_squared(mean_pred, t)) < 1e-12);
  CHECK(r_squared(std::vector<double>{0.0, 2.0}, t) == Catch::Approx(-1.0).margin(1e-12));
  CHECK_THROWS(r_squared(std::vector<double>{1.0, 2.0}, std::vector<double>{3.0, 3.0}));
  CHECK_THROWS(r_squared(std::vector<double>{1.0}, std::vector<double>{1.0}));
}

TEST_CASE("paper-formula perplexity closed-form cases", "[evaluation]") {
  const int v = 2000;
  const double logv = std::log(double(v));
  // One scored review, |H| = 1, uniform model.
  CHECK(predictive_perplexity_paper({{-3.0 * logv, 3, 1}}) == Catch::Approx(2000.0).epsilon(1e-9));
  // Two reviews with |H| = 1 and 2: V^{3/4}.
  CHECK(predictive_perplexity_paper({{-2.0 * logv, 2, 1}, {-5.0 * logv, 5, 2}}) ==
        Catch::Approx(std::pow(2000.0, 0.75)).epsilon(1e-9));
  // Probability-one model.
  CHECK(predictive_perplexity_paper({{0.0, 4, 1}, {0.0, 2, 3}}) == 1.0);
  CHECK_THROWS(predictive_perplexity_paper({{0.0, 0, 1}}));
  CHECK_THROWS(predictive_perplexity_paper({}));
}

TEST_CASE("per-word perplexity closed-form cases", "[evaluation]") {
  CHECK(predictive_perplexity_perword(-10.0 * std::log(2000.0), 10) ==
        Catch::Approx(2000.0).epsilon(1e-9));
  CHECK(predictive_perplexity_perword(-7.0 * std::log(8.0), 7) == Catch::Approx(8.0).epsilon(1e-12));
  CHECK(predictive_perplexity_perword(0.0, 5) == 1.0);
  CHECK_THROWS(predictive_perplexity_perword(-1.0, 0));
}

namespace {

Dataset small_markdep(uint64_t seed, int sequences = 12, int events = 8) {
  synth::SynthSpec spec;
  spec.kind = synth::SynthSpec::Kind::kMarkDependent;
  spec.sequences = sequences;
  spec.events_per_sequence = events;
  spec.vocab_size = 8;
  spec.seed = seed;
  return synth::generate(spec);
}

Model uniform_text_model(Variant variant, int vocab) {
  ModelConfig mc;
  mc.variant = variant;
  mc.hidden_dim = 6;
  mc.embed_dim = 4;
  mc.vocab = vocab;
  Model m = make_model(mc, 21);
  if (m.has_text_head()) {
    auto& R = m.store.at("text.R").value;
    auto& b = m.store.at("text.b").value;
    std::fill(R.begin(), R.end(), 0.0);
    std::fill(b.begin(), b.end(), 0.0);
  }
  return m;
}

}  // namespace

TEST_CASE("uniform text head: per-word PP is V, paper PP follows the history weights",
          "[evaluation]") {
  const Dataset ds = small_markdep(31);
  const int v = ds.vocab.size();
  Model m = uniform_text_model(Variant::kRprm, v);
  const MetricReport report = evaluate(m, ds.sequences);
  REQUIRE(report.pp_perword.has_value());
  REQUIRE(report.pp_paper.has_value());
  CHECK(*report.pp_perword == Catch::Approx(double(v)).epsilon(1e-9));

  // Independent exponent: V^{(sum 1/|H_j|)/T} over scored reviews j = 2..N.
  double harm = 0;
  long t_count = 0;
  for (const auto& seq : ds.sequences)
    for (int j = 1; j < seq.size(); ++j) {
      harm += 1.0 / double(j);
      t_count += 1;
    }
  const double expected = std::pow(double(v), harm / double(t_count));
  CHECK(*report.pp_paper == Catch::Approx(expected).epsilon(1e-9));
}

TEST_CASE("evaluate: time-only variants omit the text metrics", "[evaluation]") {
  const Dataset ds = small_markdep(32);
  Model m = uniform_text_model(Variant::kRpp, ds.vocab.size());
  const MetricReport report = evaluate(m, ds.sequences);
  CHECK(report.rmse >= 0.0);
  CHECK(!report.pp_paper.has_value());
  CHECK(!report.pp_perword.has_value());
  CHECK(report.n_predictions > 0);
}

TEST_CASE("evaluate: cloning the test set changes nothing", "[evaluation]") {
  const Dataset ds = small_markdep(33);
  Model m = uniform_text_model(Variant::kLstmBow, ds.vocab.size());
  auto doubled = ds.sequences;
  doubled.insert(doubled.end(), ds.sequences.begin(), ds.sequences.end());
  const MetricReport once = evaluate(m, ds.sequences);
  const MetricReport twice = evaluate(m, doubled);
  CHECK(once.rmse == Catch::Approx(twice.rmse).margin(1e-12));
  CHECK(once.r2 == Catch::Approx(twice.r2).margin(1e-12));
  CHECK(*once.pp_paper == Catch::Approx(*twice.pp_paper).margin(1e-12));
  CHECK(*once.pp_perword == Catch::Approx(*twice.pp_perword).margin(1e-12));
}

TEST_CASE("evaluate is read-only over the checkpoint", "[evaluation]") {
  const Dataset ds = small_markdep(34);
  Model m = uniform_text_model(Variant::kRprm, ds.vocab.size());
  const std::string before = serialize_checkpoint(m.store, nullptr, model_meta(m));
  (void)evaluate(m, ds.sequences);
  CHECK(serialize_checkpoint(m.store, nullptr, model_meta(m)) == before);
}

TEST_CASE("evaluate rejects an empty test set", "[evaluation]") {
  Model m = uniform_text_model(Variant::kRprm, 8);
  REQUIRE_THROWS(evaluate(m, {}));
}

TEST_CASE("comparison table renders dashes for missing text metrics", "[evaluation]") {
  MetricReport with_text;
  with_text.model = "rprm";
  with_text.rmse = 1.5;
  with_text.r2 = 0.4;
  with_text.pp_paper = 123.4;
  with_text.pp_perword = 98.7;
  MetricReport time_only;
  time_only.model = "rpp";
  time_only.rmse = 2.0;
  time_only.r2 = 0.1;
  const std::string table = render_comparison_table({with_text, time_only});
  CHECK(table.find("rprm") != std::string::npos);
  CHECK(table.find("123.4") != std::string::npos);
  CHECK(table.find('-') != std::string::npos);
  INFO(table);
  // The time-only row ends with dashes in both perplexity columns.
  const auto rpp_line = table.substr(table.find("rpp"));
  CHECK(rpp_line.find("  -") != std::string::npos);
}

TEST_CASE("empty reviews are excluded from the perplexity but not the RMSE", "[evaluation]") {
  Dataset ds = small_markdep(35, 4, 6);
  // Blank out one mid-sequence review's text.
  ds.sequences[0].reviews[3].bow = BowVector{};
  Model m = uniform_text_model(Variant::kRprm, ds.vocab.size());
  const MetricReport report = evaluate(m, ds.sequences);
  CHECK(report.n_empty_reviews_excluded == 1);
  CHECK(report.n_predictions == 4 * 5);  // every transition still scored for RMSE
  CHECK(*report.pp_perword == Catch::Approx(double(ds.vocab.size())).epsilon(1e-9));
}
