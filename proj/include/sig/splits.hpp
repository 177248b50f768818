#pragma once

// Evaluation-population filters and split protocols: the minor-speaker
// filter, novel-held-out cross-domain folds, and the in-domain by-type split.
// All randomness goes through an explicit Fisher-Yates shuffle on mt19937 so
// the same seed produces identical splits on every platform.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sig/corpus.hpp"

namespace sig {

// Unbiased index in [0, n) from the raw mt19937 stream; avoids
// std::uniform_int_distribution, whose algorithm is implementation-defined.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(v[i - 1], v[j]);
  }
}

// Removes quotations whose speaker has fewer than `threshold` quotations in
// its novel, counted against the ORIGINAL corpus. Rosters are left intact:
// filtered-out characters remain valid candidates and addressees.
inline NovelCorpus filter_minor_speakers(const NovelCorpus& corpus, int threshold) {
  if (threshold < 1) throw Error("minor-speaker threshold must be >= 1");
  NovelCorpus out;
  for (const auto& [novel_id, novel] : corpus.novels) {
    std::map<std::string, int> counts;
    for (const auto& q : novel.quotations) ++counts[q.speaker_id];
    Novel filtered;
    filtered.roster = novel.roster;
    for (const auto& q : novel.quotations) {
      if (counts[q.speaker_id] >= threshold) filtered.quotations.push_back(q);
    }
    out.novels.emplace(novel_id, std::move(filtered));
  }
  return out;
}

// Cross-domain protocol: each fold holds out `test_novels_per_fold` whole
// novels; test-novel sets are pairwise disjoint across folds; the train side
// of a fold is every quotation from all remaining novels.
inline std::vector<SplitSpec> make_cross_domain_splits(const NovelCorpus& corpus, int n_folds,
                                                       int test_novels_per_fold,
                                                       std::uint64_t seed) {
  if (n_folds < 1) throw Error("n_folds must be >= 1");
  if (test_novels_per_fold < 0) throw Error("test_novels_per_fold must be >= 0");
  const std::size_t needed =
      static_cast<std::size_t>(n_folds) * static_cast<std::size_t>(test_novels_per_fold);
  if (needed > corpus.novels.size()) {
    throw Error("cross-domain split needs " + std::to_string(n_folds) + " x " +
                std::to_string(test_novels_per_fold) + " = " + std::to_string(needed) +
                " test novels but the corpus has only " + std::to_string(corpus.novels.size()));
  }

  std::vector<std::string> novel_ids;
  for (const auto& [id, novel] : corpus.novels) novel_ids.push_back(id);
  std::mt19937_64 rng(seed);
  seeded_shuffle(novel_ids, rng);

  std::vector<SplitSpec> folds;
  for (int f = 0; f < n_folds; ++f) {
    SplitSpec spec;
    spec.name = "cross-domain";
    spec.fold_index = f;
    std::set<std::string> held_out;
    for (int t = 0; t < test_novels_per_fold; ++t) {
      held_out.insert(novel_ids[static_cast<std::size_t>(f) * test_novels_per_fold + t]);
    }
    for (const auto& [novel_id, novel] : corpus.novels) {
      auto& side = held_out.count(novel_id) ? spec.test_ids : spec.train_ids;
      for (const auto& q : novel.quotations) side.insert({novel_id, q.quote_id});
    }
    folds.push_back(std::move(spec));
  }
  return folds;
}

// In-domain protocol: train on all explicit quotations, test on the
// anaphoric and implicit ones, same novels on both sides.
inline SplitSpec make_in_domain_split(const NovelCorpus& corpus) {
  if (corpus.novels.empty()) throw Error("in-domain split requires a non-empty corpus");
  SplitSpec spec;
  spec.name = "in-domain";
  spec.fold_index = 0;
  for (const auto& [novel_id, novel] : corpus.novels) {
    for (const auto& q : novel.quotations) {
      auto& side = q.quote_type == QuoteType::Explicit ? spec.train_ids : spec.test_ids;
      side.insert({novel_id, q.quote_id});
    }
  }
  return spec;
}

struct StatsCell {
  std::size_t total = 0;
  std::size_t explicit_count = 0;
  std::size_t anaphoric_count = 0;
  std::size_t implicit_count = 0;

  void add(QuoteType t) {
    ++total;
    switch (t) {
      case QuoteType::Explicit: ++explicit_count; break;
      case QuoteType::Anaphoric: ++anaphoric_count; break;
      case QuoteType::Implicit: ++implicit_count; break;
    }
  }
  double explicit_ratio() const {
    return total == 0 ? 0.0 : static_cast<double>(explicit_count) / static_cast<double>(total);
  }
};

struct StatsSide {
  StatsCell overall;
  std::map<std::string, StatsCell> per_novel;
};

struct StatsReport {
  // sides: "all" when no split was given, else "train" and "test"
  std::vector<std::pair<std::string, StatsSide>> sides;

  const StatsSide* side(const std::string& name) const {
    for (const auto& [n, s] : sides) {
      if (n == name) return &s;
    }
    return nullptr;
  }
};

inline StatsReport corpus_stats(const NovelCorpus& corpus, const SplitSpec* split = nullptr) {
  StatsReport report;
  auto accumulate = [&](StatsSide& side, const QuotationInstance& q) {
    side.overall.add(q.quote_type);
    side.per_novel[q.novel_id].add(q.quote_type);
  };
  if (!split) {
    StatsSide all;
    for (const auto& [novel_id, novel] : corpus.novels) {
      for (const auto& q : novel.quotations) accumulate(all, q);
    }
    report.sides.emplace_back("all", std::move(all));
    return report;
  }
  StatsSide train, test;
  for (const auto& [novel_id, novel] : corpus.novels) {
    for (const auto& q : novel.quotations) {
      QuoteKey key{novel_id, q.quote_id};
      if (split->train_ids.count(key)) accumulate(train, q);
      if (split->test_ids.count(key)) accumulate(test, q);
    }
  }
  report.sides.emplace_back("train", std::move(train));
  report.sides.emplace_back("test", std::move(test));
  return report;
}

}  // namespace sig
