#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "rprm/dataset.hpp"
#include "rprm/synth.hpp"

using namespace rprm;
using synth::SynthSpec;

namespace {

std::vector<double> all_gaps(const Dataset& ds) {
  std::vector<double> gaps;
  for (const auto& seq : ds.sequences)
    for (int j = 0; j + 1 < seq.size(); ++j)
      gaps.push_back(seq.reviews[size_t(j) + 1].time_days - seq.reviews[size_t(j)].time_days);
  return gaps;
}

}  // namespace

TEST_CASE("poisson gaps have the right mean", "[synth]") {
  SynthSpec spec;
  spec.kind = SynthSpec::Kind::kPoisson;
  spec.rate = 0.2;
  spec.sequences = 200;
  spec.events_per_sequence = 50;
  spec.vocab_size = 8;
  spec.seed = 1;
  const Dataset ds = synth::generate(spec);
  REQUIRE(int(ds.sequences.size()) == 200);
  for (const auto& seq : ds.sequences) REQUIRE(seq.size() == 50);
  const auto stats = oracles::mean_stderr(all_gaps(ds));
  CHECK(std::fabs(stats.mean - 5.0) < 3.0 * stats.stderr_);
}

TEST_CASE("poisson horizon mode has ~rate*T events", "[synth]") {
  SynthSpec spec;
  spec.kind = SynthSpec::Kind::kPoisson;
  spec.rate = 1.0;
  spec.sequences = 400;
  spec.events_per_sequence = 0;
  spec.horizon_days = 30.0;
  spec.vocab_size = 6;
  spec.seed = 2;
  const Dataset ds = synth::generate(spec);
  std::vector<double> counts;
  for (const auto& seq : ds.sequences) counts.push_back(double(seq.size()));
  const auto stats = oracles::mean_stderr(counts);
  CHECK(std::fabs(stats.mean - 30.0) < 3.0 * std::sqrt(30.0 / 400.0));
}

TEST_CASE("generated sequences satisfy the sequence invariants", "[synth]") {
  for (auto kind :
       {SynthSpec::Kind::kPoisson, SynthSpec::Kind::kHawkes, SynthSpec::Kind::kMarkDependent}) {
    SynthSpec spec;
    spec.kind = kind;
    spec.sequences = 20;
    spec.events_per_sequence = 30;
    spec.vocab_size = 10;
    spec.seed = 3;
    const Dataset ds = synth::generate(spec);
    REQUIRE(!ds.sequences.empty());
    for (const auto& seq : ds.sequences) {
      CHECK(seq.size() == 30);
      CHECK(seq.reviews[0].time_days >= 0.0);
      for (int j = 1; j < seq.size(); ++j)
        CHECK(seq.reviews[size_t(j)].time_days > seq.reviews[size_t(j) - 1].time_days);
      for (const auto& r : seq.reviews) {
        CHECK(r.bow.total_words == spec.words_per_review);
        for (const auto& [idx, c] : r.bow.counts) {
          CHECK(idx < ds.vocab.size());
          CHECK(c >= 1);
        }
      }
    }
    // Vocabulary invariant: document frequency non-increasing.
    for (size_t i = 1; i < ds.vocab.doc_freq.size(); ++i)
      CHECK(ds.vocab.doc_freq[i] <= ds.vocab.doc_freq[i - 1]);
  }
}

TEST_CASE("generators are deterministic under a fixed seed", "[synth]") {
  for (auto kind :
       {SynthSpec::Kind::kPoisson, SynthSpec::Kind::kHawkes, SynthSpec::Kind::kMarkDependent}) {
    SynthSpec spec;
    spec.kind = kind;
    spec.sequences = 5;
    spec.events_per_sequence = 20;
    spec.vocab_size = 8;
    spec.seed = 4;
    CHECK(serialize_dataset(synth::generate(spec)) == serialize_dataset(synth::generate(spec)));
  }
}

TEST_CASE("hawkes with alpha=0 reduces to a poisson process", "[synth]") {
  SynthSpec spec;
  spec.kind = SynthSpec::Kind::kHawkes;
  spec.mu = 0.5;
  spec.alpha = 0.0;
  spec.beta = 1.0;
  spec.sequences = 200;
  spec.events_per_sequence = 50;
  spec.vocab_size = 6;
  spec.seed = 5;
  const Dataset ds = synth::generate(spec);
  auto gaps = all_gaps(ds);
  // First gaps are also exponential(mu) measured from zero; include them.
  for (const auto& seq : ds.sequences) gaps.push_back(seq.reviews[0].time_days);
  const double d =
      oracles::ks_statistic(gaps, [&](double s) { return 1.0 - std::exp(-spec.mu * s); });
  CHECK(d < oracles::ks_critical_1pct(gaps.size()));
}

TEST_CASE("hawkes empirical rate matches the stationary formula", "[synth]") {
  SynthSpec spec;
  spec.kind = SynthSpec::Kind::kHawkes;
  spec.mu = 0.5;
  spec.alpha = 0.4;
  spec.beta = 1.0;
  spec.sequences = 300;
  spec.events_per_sequence = 0;
  spec.horizon_days = 200.0;
  spec.vocab_size = 6;
  spec.seed = 6;
  const Dataset ds = synth::generate(spec);
  std::vector<double> rates;
  for (const auto& seq : ds.sequences)
    rates.push_back(double(seq.size()) / spec.horizon_days);
  const auto stats = oracles::mean_stderr(rates);
  const double expected = spec.mu / (1.0 - spec.alpha / spec.beta);
  CHECK(std::fabs(stats.mean - expected) < 3.0 * stats.stderr_);
}

TEST_CASE("time rescaling: transformed gaps are unit exponential", "[synth]") {
  // Poisson: Lambda increments are rate * gap.
  {
    SynthSpec spec;
    spec.kind = SynthSpec::Kind::kPoisson;
    spec.rate = 0.4;
    spec.sequences = 250;
    spec.events_per_sequence = 40;
    spec.vocab_size = 6;
    spec.seed = 7;
    const Dataset ds = synth::generate(spec);
    std::vector<double> rescaled;
    for (const auto& seq : ds.sequences) {
      double prev = 0.0;
      for (const auto& r : seq.reviews) {
        rescaled.push_back(spec.rate * (r.time_days - prev));
        prev = r.time_days;
      }
    }
    REQUIRE(rescaled.size() >= 10000);
    const double d = oracles::ks_statistic(rescaled, [](double s) { return 1.0 - std::exp(-s); });
    CHECK(d < oracles::ks_critical_1pct(rescaled.size()));
  }
  // Hawkes: Lambda increment is mu*d + (A/beta)(1 - exp(-beta d)) with the
  // excitation A tracked across events.
  {
    SynthSpec spec;
    spec.kind = SynthSpec::Kind::kHawkes;
    spec.mu = 0.5;
    spec.alpha = 0.4;
    spec.beta = 1.0;
    spec.sequences = 250;
    spec.events_per_sequence = 40;
    spec.vocab_size = 6;
    spec.seed = 8;
    const Dataset ds = synth::generate(spec);
    std::vector<double> rescaled;
    for (const auto& seq : ds.sequences) {
      double prev = 0.0, excitation = 0.0;
      for (const auto& r : seq.reviews) {
        const double gap = r.time_days - prev;
        rescaled.push_back(spec.mu * gap +
                           excitation / spec.beta * (1.0 - std::exp(-spec.beta * gap)));
        excitation = excitation * std::exp(-spec.beta * gap) + spec.alpha;
        prev = r.time_days;
      }
    }
    REQUIRE(rescaled.size() >= 10000);
    const double d = oracles::ks_statistic(rescaled, [](double s) { return 1.0 - std::exp(-s); });
    CHECK(d < oracles::ks_critical_1pct(rescaled.size()));
  }
}

TEST_CASE("mark-dependent data: token frequencies are balanced", "[synth]") {
  SynthSpec spec;
  spec.kind = SynthSpec::Kind::kMarkDependent;
  spec.sequences = 100;
  spec.events_per_sequence = 20;
  spec.vocab_size = 12;
  spec.seed = 9;
  const Dataset ds = synth::generate(spec);
  const int fast_idx = ds.vocab.find(synth::kFastToken);
  const int slow_idx = ds.vocab.find(synth::kSlowToken);
  REQUIRE(fast_idx >= 0);
  REQUIRE(slow_idx >= 0);
  long fast = 0, total = 0;
  for (const auto& seq : ds.sequences)
    for (const auto& r : seq.reviews) {
      total += 1;
      for (const auto& [idx, c] : r.bow.counts)
        if (idx == fast_idx) fast += long(c >= 1);
    }
  const double p = double(fast) / double(total);
  const double se = std::sqrt(0.25 / double(total));
  CHECK(std::fabs(p - 0.5) < 3.0 * se);
}

TEST_CASE("mark-dependent data: the Bayes predictor beats the marginal constant", "[synth]") {
  SynthSpec spec;
  spec.kind = SynthSpec::Kind::kMarkDependent;
  spec.sequences = 200;
  spec.events_per_sequence = 20;
  spec.vocab_size = 12;
  spec.seed = 10;
  const Dataset ds = synth::generate(spec);
  const double bayes = synth::markdep_bayes_rmse(ds, spec.fast_mean_days, spec.slow_mean_days);
  const double marginal =
      synth::markdep_constant_rmse(ds, 0.5 * (spec.fast_mean_days + spec.slow_mean_days));
  CHECK(bayes < marginal);
  // Population values: sqrt(E Var) vs sqrt(Var(target)).
  CHECK(bayes == Catch::Approx(std::sqrt(0.5 * 1.0 + 0.5 * 400.0)).epsilon(0.1));
  CHECK(marginal == Catch::Approx(std::sqrt(200.5 + 90.25)).epsilon(0.1));
}
