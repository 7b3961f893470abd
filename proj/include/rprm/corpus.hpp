#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rprm/log.hpp"
#include "rprm/rng.hpp"
#include "rprm/util.hpp"

namespace rprm {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct RawReview {
  std::string item_id;
  double timestamp_days = 0.0;  // fractional days since the Unix epoch
  std::string text;
};

struct Vocabulary {
  std::vector<std::string> tokens;            // sorted by df desc, then token asc
  std::unordered_map<std::string, int> index;  // token -> position
  std::vector<long> doc_freq;                  // per-token document frequency

  int size() const { return int(tokens.size()); }

  int find(const std::string& token) const {
    auto it = index.find(token);
    return it == index.end() ? -1 : it->second;
  }
};

// Sparse bag-of-words counts over the vocabulary; entries sorted by index.
struct BowVector {
  std::vector<std::pair<int, int>> counts;
  int total_words = 0;

  bool empty() const { return counts.empty(); }
};

struct Review {
  double time_days = 0.0;  // days since the dataset epoch
  BowVector bow;
};

struct ItemSequence {
  std::string item_id;
  std::vector<Review> reviews;

  int size() const { return int(reviews.size()); }
};

// ---------------------------------------------------------------------------
// Tokenization and vocabulary
// ---------------------------------------------------------------------------

// Lowercases ASCII letters, strips ASCII punctuation, splits on whitespace.
// Bytes outside ASCII are kept as-is so multibyte text stays intact.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (c < 0x80 && std::isspace(c)) {
      if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
    } else if (c < 0x80 && std::ispunct(c)) {
      // stripped
    } else if (c < 0x80) {
      cur += char(std::tolower(c));
    } else {
      cur += char(c);
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

inline const std::unordered_set<std::string>& builtin_stopwords() {
  static const std::unordered_set<std::string> kStopwords = {
      "a",    "an",   "and",  "are",  "as",   "at",   "be",    "been",  "but",  "by",
      "for",  "from", "had",  "has",  "have", "he",   "her",   "his",   "i",    "if",
      "in",   "is",   "it",   "its",  "my",   "no",   "not",   "of",    "on",   "or",
      "our",  "she",  "so",   "that", "the",  "their", "them",  "these", "they", "this",
      "to",   "was",  "we",   "were", "will", "with", "you",   "your"};
  return kStopwords;
}

// Top-V tokens by document frequency after stopword removal; ties broken
// lexicographically. Warns (and returns a smaller vocabulary) when fewer
// than V distinct eligible tokens exist.
inline Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs, int v,
                                   const std::unordered_set<std::string>& stopwords) {
  require(v >= 1, "vocabulary size must be >= 1");
  std::unordered_map<std::string, long> df;
  std::unordered_set<std::string> seen;
  for (const auto& doc : docs) {
    seen.clear();
    for (const auto& tok : doc)
      if (!stopwords.count(tok)) seen.insert(tok);
    for (const auto& tok : seen) df[tok] += 1;
  }
  std::vector<std::pair<std::string, long>> ranked(df.begin(), df.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (int(ranked.size()) < v)
    log_warn("vocabulary: only " + std::to_string(ranked.size()) + " distinct tokens for requested size " +
             std::to_string(v));
  Vocabulary vocab;
  const int n = std::min<int>(v, int(ranked.size()));
  vocab.tokens.reserve(size_t(n));
  vocab.doc_freq.reserve(size_t(n));
  for (int i = 0; i < n; ++i) {
    vocab.tokens.push_back(ranked[size_t(i)].first);
    vocab.doc_freq.push_back(ranked[size_t(i)].second);
    vocab.index[ranked[size_t(i)].first] = i;
  }
  return vocab;
}

// Counts in-vocabulary tokens only; out-of-vocabulary tokens are dropped.
inline BowVector to_bow(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  std::map<int, int> counts;
  for (const auto& tok : tokens) {
    const int idx = vocab.find(tok);
    if (idx >= 0) counts[idx] += 1;
  }
  BowVector bow;
  bow.counts.assign(counts.begin(), counts.end());
  for (const auto& [idx, c] : bow.counts) bow.total_words += c;
  return bow;
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

struct IngestStats {
  long lines = 0;
  long malformed = 0;
  long out_of_window = 0;
  long category_rejected = 0;
  long accepted = 0;
};

// Maps business_id -> categories string from a line-delimited JSON file.
inline std::unordered_map<std::string, std::string> load_business_categories(
    const std::string& path) {
  std::unordered_map<std::string, std::string> out;
  const std::string content = read_file(path);
  size_t pos = 0;
  while (pos < content.size()) {
    size_t end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    const std::string line = content.substr(pos, end - pos);
    pos = end + 1;
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("business_id")) continue;
    std::string cats;
    if (j.contains("categories") && j["categories"].is_string())
      cats = j["categories"].get<std::string>();
    out[j["business_id"].get<std::string>()] = cats;
  }
  return out;
}

inline bool categories_match(const std::string& categories, const std::string& filter) {
  const std::string want = to_lower(trim(filter));
  for (const auto& part : split(categories, ','))
    if (to_lower(trim(part)) == want) return true;
  return false;
}

// Reads line-delimited review records (business_id, date, text, optional
// categories), keeping records inside [window_start, window_end] whose
// categories contain `category_filter` (when given). Categories may come
// from the record itself or from a separate business map. Malformed lines
// are skipped and counted.
inline std::vector<RawReview> ingest(
    const std::string& path, double window_start_days, double window_end_days,
    const std::string& category_filter, IngestStats& stats,
    const std::unordered_map<std::string, std::string>* business_categories = nullptr) {
  const std::string content = read_file(path);
  std::vector<RawReview> out;
  size_t pos = 0;
  while (pos < content.size()) {
    size_t end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    const std::string line = content.substr(pos, end - pos);
    pos = end + 1;
    if (trim(line).empty()) continue;
    stats.lines += 1;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("business_id") || !j.contains("date") ||
        !j.contains("text") || !j["business_id"].is_string() || !j["date"].is_string() ||
        !j["text"].is_string()) {
      stats.malformed += 1;
      continue;
    }
    const std::string item_id = j["business_id"].get<std::string>();
    if (item_id.empty()) {
      stats.malformed += 1;
      continue;
    }
    const auto ts = parse_datetime_days(j["date"].get<std::string>());
    if (!ts) {
      stats.malformed += 1;
      continue;
    }
    if (*ts < window_start_days || *ts > window_end_days) {
      stats.out_of_window += 1;
      continue;
    }
    if (!category_filter.empty()) {
      std::string cats;
      if (j.contains("categories") && j["categories"].is_string())
        cats = j["categories"].get<std::string>();
      else if (business_categories) {
        auto it = business_categories->find(item_id);
        if (it != business_categories->end()) cats = it->second;
      }
      if (!categories_match(cats, category_filter)) {
        stats.category_rejected += 1;
        continue;
      }
    }
    RawReview r;
    r.item_id = item_id;
    r.timestamp_days = *ts;
    r.text = j["text"].get<std::string>();
    out.push_back(std::move(r));
    stats.accepted += 1;
  }
  if (stats.malformed > 0)
    log_warn("ingest: skipped " + std::to_string(stats.malformed) + " malformed line(s)");
  return out;
}

// ---------------------------------------------------------------------------
// Sequence assembly and splitting
// ---------------------------------------------------------------------------

struct AssembleStats {
  long items_total = 0;
  long items_dropped_short = 0;
  long timestamp_ties_bumped = 0;
};

// Groups reviews by item, sorts by time, converts to fractional days since
// `epoch_days` and drops items with fewer than `min_len` reviews. Equal
// timestamps within an item are bumped by 1e-6 days per duplicate so that
// inter-event gaps stay strictly positive.
inline std::vector<ItemSequence> assemble_sequences(const std::vector<RawReview>& raws,
                                                    const Vocabulary& vocab, double epoch_days,
                                                    int min_len, AssembleStats& stats) {
  require(min_len >= 1, "min_len must be >= 1");
  std::map<std::string, std::vector<const RawReview*>> by_item;
  for (const auto& r : raws) by_item[r.item_id].push_back(&r);

  std::vector<ItemSequence> out;
  stats.items_total = long(by_item.size());
  for (auto& [item_id, rows] : by_item) {
    if (int(rows.size()) < min_len) {
      stats.items_dropped_short += 1;
      continue;
    }
    std::stable_sort(rows.begin(), rows.end(), [](const RawReview* a, const RawReview* b) {
      return a->timestamp_days < b->timestamp_days;
    });
    ItemSequence seq;
    seq.item_id = item_id;
    seq.reviews.reserve(rows.size());
    double prev = -std::numeric_limits<double>::infinity();
    for (const RawReview* r : rows) {
      Review rev;
      rev.time_days = r->timestamp_days - epoch_days;
      if (rev.time_days <= prev) {
        rev.time_days = prev + 1e-6;
        stats.timestamp_ties_bumped += 1;
      }
      prev = rev.time_days;
      rev.bow = to_bow(tokenize(r->text), vocab);
      seq.reviews.push_back(std::move(rev));
    }
    require(seq.reviews.front().time_days >= 0.0,
            "review before the epoch date in item " + item_id);
    out.push_back(std::move(seq));
  }
  return out;
}

// Seeded Fisher-Yates partition of item ids; sizes land within one of the
// exact fractions and both halves are non-empty.
inline std::pair<std::unordered_set<std::string>, std::unordered_set<std::string>> split_item_ids(
    std::vector<std::string> ids, double train_fraction, uint64_t seed) {
  require(ids.size() >= 2, "split requires at least 2 items");
  require(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction must be in (0,1)");
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  for (size_t i = ids.size() - 1; i > 0; --i)
    std::swap(ids[i], ids[size_t(rng.below(i + 1))]);
  long n_train = std::lround(train_fraction * double(ids.size()));
  n_train = std::clamp<long>(n_train, 1, long(ids.size()) - 1);
  std::pair<std::unordered_set<std::string>, std::unordered_set<std::string>> out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (long(i) < n_train)
      out.first.insert(ids[i]);
    else
      out.second.insert(ids[i]);
  }
  return out;
}

// Item-level partition: no item appears in both halves, sizes within one of
// the exact fractions, deterministic given the seed. Each half is returned
// sorted by item id.
inline std::pair<std::vector<ItemSequence>, std::vector<ItemSequence>> split(
    const std::vector<ItemSequence>& sequences, double train_fraction, uint64_t seed) {
  require(sequences.size() >= 2, "split requires at least 2 sequences");
  std::vector<std::string> ids;
  ids.reserve(sequences.size());
  for (const auto& s : sequences) ids.push_back(s.item_id);
  const auto [train_ids, test_ids] = split_item_ids(std::move(ids), train_fraction, seed);
  std::pair<std::vector<ItemSequence>, std::vector<ItemSequence>> out;
  for (const auto& s : sequences) {
    if (train_ids.count(s.item_id))
      out.first.push_back(s);
    else
      out.second.push_back(s);
  }
  auto by_id = [](const ItemSequence& a, const ItemSequence& b) { return a.item_id < b.item_id; };
  std::sort(out.first.begin(), out.first.end(), by_id);
  std::sort(out.second.begin(), out.second.end(), by_id);
  return out;
}

}  // namespace rprm
