#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "rprm/corpus.hpp"
#include "rprm/dataset.hpp"
#include "rprm/rng.hpp"
#include "rprm/util.hpp"

namespace rprm::synth {

// Ground-truth generators used as oracles by the test and acceptance
// suites: homogeneous Poisson gaps, self-exciting (Hawkes) arrivals via
// Ogata thinning, and mark-dependent sequences where a review's token
// decides the following gap (FAST -> short, SLOW -> long).
struct SynthSpec {
  enum class Kind { kPoisson, kHawkes, kMarkDependent };

  Kind kind = Kind::kPoisson;
  // Poisson
  double rate = 0.2;  // events per day
  // Hawkes: mu + sum alpha * exp(-beta (t - t_i)); requires alpha/beta < 1
  double mu = 0.5;
  double alpha = 0.4;
  double beta = 1.0;
  // Mark-dependent
  double fast_mean_days = 1.0;
  double slow_mean_days = 20.0;

  int vocab_size = 12;
  int sequences = 100;
  int events_per_sequence = 50;  // 0: generate until horizon_days instead
  double horizon_days = 0.0;
  int words_per_review = 3;
  uint64_t seed = 0;
};

inline const char* kind_name(SynthSpec::Kind k) {
  switch (k) {
    case SynthSpec::Kind::kPoisson: return "poisson";
    case SynthSpec::Kind::kHawkes: return "hawkes";
    case SynthSpec::Kind::kMarkDependent: return "markdep";
  }
  return "?";
}

inline SynthSpec::Kind kind_from_name(const std::string& name) {
  if (name == "poisson") return SynthSpec::Kind::kPoisson;
  if (name == "hawkes") return SynthSpec::Kind::kHawkes;
  if (name == "markdep") return SynthSpec::Kind::kMarkDependent;
  fail("unknown generator kind: '" + name + "' (expected poisson|hawkes|markdep)");
}

inline constexpr const char* kFastToken = "fast";
inline constexpr const char* kSlowToken = "slow";

namespace detail {

inline std::string filler_token(int i) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "filler%03d", i);
  return buf;
}

inline void validate(const SynthSpec& spec) {
  require(spec.sequences >= 1, "synth: sequences must be >= 1");
  require(spec.events_per_sequence > 0 || spec.horizon_days > 0,
          "synth: need events_per_sequence or horizon_days");
  require(spec.words_per_review >= 1, "synth: words_per_review must be >= 1");
  switch (spec.kind) {
    case SynthSpec::Kind::kPoisson:
      require(spec.rate > 0, "synth: rate must be > 0");
      require(spec.vocab_size >= 1, "synth: vocab_size must be >= 1");
      break;
    case SynthSpec::Kind::kHawkes:
      require(spec.mu > 0 && spec.alpha >= 0 && spec.beta > 0, "synth: bad Hawkes parameters");
      require(spec.alpha / spec.beta < 1.0, "synth: Hawkes branching ratio must be < 1");
      require(spec.vocab_size >= 1, "synth: vocab_size must be >= 1");
      break;
    case SynthSpec::Kind::kMarkDependent:
      require(spec.fast_mean_days > 0 && spec.slow_mean_days > 0, "synth: means must be > 0");
      require(spec.vocab_size >= 3, "synth: mark-dependent needs vocab_size >= 3");
      break;
  }
}

// Exact Hawkes arrival times by thinning; the dominating bound is refreshed
// after every candidate since the exponential kernel only decays between
// events.
inline std::vector<double> hawkes_times(const SynthSpec& spec, Rng& rng) {
  std::vector<double> times;
  double t = 0.0;
  double excitation = 0.0;  // sum of alpha * exp(-beta (t - t_i))
  while (true) {
    const double bound = spec.mu + excitation;
    const double step = rng.exponential(bound);
    const double decayed = excitation * std::exp(-spec.beta * step);
    t += step;
    if (spec.events_per_sequence == 0 && t > spec.horizon_days) break;
    const double lambda = spec.mu + decayed;
    if (rng.uniform() * bound <= lambda) {
      times.push_back(t);
      excitation = decayed + spec.alpha;
      if (spec.events_per_sequence > 0 && int(times.size()) >= spec.events_per_sequence) break;
    } else {
      excitation = decayed;
    }
  }
  return times;
}

}  // namespace detail

// Generates the dataset through the regular corpus pipeline so that
// vocabulary and BoW invariants hold by construction and downstream tooling
// is shared with preprocessed data.
inline Dataset generate(const SynthSpec& spec) {
  detail::validate(spec);

  std::vector<std::string> pool;
  if (spec.kind == SynthSpec::Kind::kMarkDependent) {
    pool.push_back(kFastToken);
    pool.push_back(kSlowToken);
    for (int i = 0; i < spec.vocab_size - 2; ++i) pool.push_back(detail::filler_token(i));
  } else {
    for (int i = 0; i < spec.vocab_size; ++i) pool.push_back(detail::filler_token(i));
  }
  const int n_filler = spec.kind == SynthSpec::Kind::kMarkDependent ? spec.vocab_size - 2
                                                                    : spec.vocab_size;

  struct RawSeq {
    std::string item_id;
    std::vector<double> times;
    std::vector<std::vector<std::string>> docs;
  };
  std::vector<RawSeq> raw;
  raw.reserve(size_t(spec.sequences));
  std::vector<std::vector<std::string>> all_docs;

  for (int s = 0; s < spec.sequences; ++s) {
    Rng rng = derive_rng(spec.seed, uint64_t(s) + 1);
    RawSeq rs;
    char id[40];
    std::snprintf(id, sizeof(id), "%s-%05d", kind_name(spec.kind), s);
    rs.item_id = id;

    switch (spec.kind) {
      case SynthSpec::Kind::kPoisson: {
        double t = 0;
        while (true) {
          t += rng.exponential(spec.rate);
          if (spec.events_per_sequence == 0 && t > spec.horizon_days) break;
          rs.times.push_back(t);
          if (spec.events_per_sequence > 0 && int(rs.times.size()) >= spec.events_per_sequence)
            break;
        }
        break;
      }
      case SynthSpec::Kind::kHawkes:
        rs.times = detail::hawkes_times(spec, rng);
        break;
      case SynthSpec::Kind::kMarkDependent: {
        double t = 0.0;
        const int n = std::max(spec.events_per_sequence, 1);
        for (int j = 0; j < n; ++j) {
          rs.times.push_back(t);
          const bool fast = rng.uniform() < 0.5;
          std::vector<std::string> doc;
          doc.push_back(fast ? kFastToken : kSlowToken);
          for (int k = 1; k < spec.words_per_review; ++k)
            doc.push_back(pool[size_t(2 + rng.below(uint64_t(n_filler)))]);
          rs.docs.push_back(std::move(doc));
          t += rng.exponential(1.0 / (fast ? spec.fast_mean_days : spec.slow_mean_days));
        }
        break;
      }
    }

    if (spec.kind != SynthSpec::Kind::kMarkDependent) {
      for (size_t j = 0; j < rs.times.size(); ++j) {
        std::vector<std::string> doc;
        for (int k = 0; k < spec.words_per_review; ++k)
          doc.push_back(pool[size_t(rng.below(uint64_t(n_filler)))]);
        rs.docs.push_back(std::move(doc));
      }
    }
    for (const auto& d : rs.docs) all_docs.push_back(d);
    raw.push_back(std::move(rs));
  }

  Dataset ds;
  ds.epoch = "1970-01-01";
  ds.vocab = build_vocabulary(all_docs, spec.vocab_size, {});
  for (auto& rs : raw) {
    if (rs.times.empty()) continue;
    ItemSequence seq;
    seq.item_id = rs.item_id;
    for (size_t j = 0; j < rs.times.size(); ++j) {
      Review r;
      r.time_days = rs.times[j];
      r.bow = to_bow(rs.docs[j], ds.vocab);
      seq.reviews.push_back(std::move(r));
    }
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

// Brute-force RMSE of the Bayes point predictor on mark-dependent data:
// predict fast_mean after a FAST review, slow_mean after a SLOW one.
inline double markdep_bayes_rmse(const Dataset& ds, double fast_mean, double slow_mean) {
  const int fast_idx = ds.vocab.find(kFastToken);
  require(fast_idx >= 0, "markdep_bayes_rmse: dataset has no fast token");
  double acc = 0;
  long n = 0;
  for (const auto& seq : ds.sequences) {
    for (int j = 0; j + 1 < seq.size(); ++j) {
      bool fast = false;
      for (const auto& [idx, c] : seq.reviews[size_t(j)].bow.counts)
        if (idx == fast_idx && c > 0) fast = true;
      const double pred = fast ? fast_mean : slow_mean;
      const double target = seq.reviews[size_t(j) + 1].time_days - seq.reviews[size_t(j)].time_days;
      acc += (pred - target) * (pred - target);
      n += 1;
    }
  }
  require(n > 0, "markdep_bayes_rmse: no transitions");
  return std::sqrt(acc / double(n));
}

// RMSE of the best text-blind constant predictor baseline.
inline double markdep_constant_rmse(const Dataset& ds, double constant) {
  double acc = 0;
  long n = 0;
  for (const auto& seq : ds.sequences) {
    for (int j = 0; j + 1 < seq.size(); ++j) {
      const double target = seq.reviews[size_t(j) + 1].time_days - seq.reviews[size_t(j)].time_days;
      acc += (constant - target) * (constant - target);
      n += 1;
    }
  }
  require(n > 0, "markdep_constant_rmse: no transitions");
  return std::sqrt(acc / double(n));
}

}  // namespace rprm::synth
