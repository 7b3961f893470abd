#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "rprm/corpus.hpp"
#include "rprm/util.hpp"

namespace rprm {

inline constexpr const char* kDatasetFormat = "rprm.dataset";
inline constexpr int kDatasetVersion = 1;

// A preprocessed corpus: the vocabulary plus per-item review sequences with
// times in days since `epoch`. Serialized as line-delimited JSON — a header
// line followed by one line per item sequence.
struct Dataset {
  Vocabulary vocab;
  std::vector<ItemSequence> sequences;
  std::string epoch = "1970-01-01";

  int vocab_size() const { return vocab.size(); }
};

inline std::string serialize_dataset(const Dataset& ds) {
  nlohmann::json header;
  header["format"] = kDatasetFormat;
  header["version"] = kDatasetVersion;
  header["epoch"] = ds.epoch;
  header["vocab_size"] = ds.vocab.size();
  header["tokens"] = ds.vocab.tokens;
  header["doc_freq"] = ds.vocab.doc_freq;
  header["sequences"] = ds.sequences.size();
  std::string out = header.dump() + "\n";
  for (const auto& seq : ds.sequences) {
    nlohmann::json j;
    j["item"] = seq.item_id;
    nlohmann::json t = nlohmann::json::array();
    nlohmann::json bows = nlohmann::json::array();
    for (const auto& r : seq.reviews) {
      t.push_back(r.time_days);
      nlohmann::json bow = nlohmann::json::array();
      for (const auto& [idx, c] : r.bow.counts) bow.push_back({idx, c});
      bows.push_back(std::move(bow));
    }
    j["t"] = std::move(t);
    j["bow"] = std::move(bows);
    out += j.dump() + "\n";
  }
  return out;
}

inline Dataset parse_dataset(const std::string& content) {
  Dataset ds;
  size_t pos = 0;
  bool have_header = false;
  while (pos < content.size()) {
    size_t end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    const std::string line = content.substr(pos, end - pos);
    pos = end + 1;
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    require(!j.is_discarded(), "dataset: malformed JSON line");
    if (!have_header) {
      require(j.value("format", "") == kDatasetFormat, "not a dataset file");
      require(j.value("version", 0) == kDatasetVersion, "unsupported dataset version");
      ds.epoch = j.value("epoch", "1970-01-01");
      const auto tokens = j.at("tokens").get<std::vector<std::string>>();
      const auto df = j.at("doc_freq").get<std::vector<long>>();
      require(tokens.size() == df.size(), "dataset: tokens/doc_freq size mismatch");
      for (size_t i = 0; i < tokens.size(); ++i) {
        ds.vocab.tokens.push_back(tokens[i]);
        ds.vocab.doc_freq.push_back(df[i]);
        ds.vocab.index[tokens[i]] = int(i);
      }
      have_header = true;
      continue;
    }
    ItemSequence seq;
    seq.item_id = j.at("item").get<std::string>();
    const auto& t = j.at("t");
    const auto& bows = j.at("bow");
    require(t.size() == bows.size(), "dataset: t/bow size mismatch for item " + seq.item_id);
    double prev = -1.0;
    for (size_t i = 0; i < t.size(); ++i) {
      Review r;
      r.time_days = t[i].get<double>();
      require(r.time_days >= 0.0, "dataset: negative review time");
      require(r.time_days > prev, "dataset: review times not strictly increasing");
      prev = r.time_days;
      for (const auto& e : bows[i]) {
        const int idx = e.at(0).get<int>();
        const int c = e.at(1).get<int>();
        require(idx >= 0 && idx < ds.vocab.size(), "dataset: BoW index out of range");
        require(c >= 1, "dataset: BoW count must be >= 1");
        r.bow.counts.emplace_back(idx, c);
        r.bow.total_words += c;
      }
      seq.reviews.push_back(std::move(r));
    }
    ds.sequences.push_back(std::move(seq));
  }
  require(have_header, "dataset: missing header line");
  return ds;
}

inline void save_dataset(const std::string& path, const Dataset& ds) {
  write_file(path, serialize_dataset(ds));
}

inline Dataset load_dataset(const std::string& path) { return parse_dataset(read_file(path)); }

// ---------------------------------------------------------------------------
// Corpus statistics report
// ---------------------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  double sum = 0;
  for (double x : xs) sum += x;
  out.mean = sum / double(xs.size());
  double sq = 0;
  for (double x : xs) sq += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(sq / double(xs.size()));
  return out;
}

// Counts of reviews, items and words plus per-item/per-review moments,
// emitted as a stable JSON document next to the preprocessed dataset.
inline nlohmann::json dataset_stats(const Dataset& ds, const IngestStats* ingest = nullptr,
                                    const AssembleStats* assemble = nullptr) {
  long reviews = 0, words = 0;
  std::vector<double> reviews_per_item, words_per_review;
  for (const auto& seq : ds.sequences) {
    reviews += seq.size();
    reviews_per_item.push_back(double(seq.size()));
    for (const auto& r : seq.reviews) {
      words += r.bow.total_words;
      words_per_review.push_back(double(r.bow.total_words));
    }
  }
  const MeanStd rpi = mean_std(reviews_per_item);
  const MeanStd wpr = mean_std(words_per_review);
  nlohmann::json j;
  j["items"] = ds.sequences.size();
  j["reviews"] = reviews;
  j["words"] = words;
  j["vocab_size"] = ds.vocab.size();
  j["reviews_per_item_mean"] = rpi.mean;
  j["reviews_per_item_std"] = rpi.std;
  j["words_per_review_mean"] = wpr.mean;
  j["words_per_review_std"] = wpr.std;
  if (ingest) {
    j["ingest_lines"] = ingest->lines;
    j["ingest_malformed"] = ingest->malformed;
    j["ingest_out_of_window"] = ingest->out_of_window;
    j["ingest_category_rejected"] = ingest->category_rejected;
    j["ingest_accepted"] = ingest->accepted;
  }
  if (assemble) {
    j["items_seen"] = assemble->items_total;
    j["items_dropped_short"] = assemble->items_dropped_short;
    j["timestamp_ties_bumped"] = assemble->timestamp_ties_bumped;
  }
  return j;
}

}  // namespace rprm
