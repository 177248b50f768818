#include <doctest.h>

#include "helpers.hpp"
#include "sig/corpus_io.hpp"
#include "sig/splits.hpp"

using namespace sig;
using namespace sig_test;

namespace {

// speaker A has 3 quotes, speaker B has 12
NovelCorpus minor_speaker_fixture() {
  NovelCorpus corpus;
  Novel novel;
  novel.roster.novel_id = "n";
  novel.roster.entries.push_back(entry("A", "Alice"));
  novel.roster.entries.push_back(entry("B", "Bob"));
  for (int i = 0; i < 3; ++i) {
    novel.quotations.push_back(
        quote("n", "a" + std::to_string(i), "line", QuoteType::Explicit, "A"));
  }
  for (int i = 0; i < 12; ++i) {
    novel.quotations.push_back(
        quote("n", "b" + std::to_string(i), "line", QuoteType::Implicit, "B"));
  }
  corpus.novels.emplace("n", std::move(novel));
  return corpus;
}

}  // namespace

TEST_CASE("minor-speaker filter keeps only speakers at or above the threshold") {
  NovelCorpus corpus = minor_speaker_fixture();
  NovelCorpus filtered = filter_minor_speakers(corpus, 10);
  CHECK(filtered.quotation_count() == 12);
  for (const auto& q : filtered.novel("n").quotations) CHECK(q.speaker_id == "B");
  // roster retains the filtered-out character
  CHECK(filtered.novel("n").roster.find("A"));

  SUBCASE("threshold 1 is the identity") {
    NovelCorpus same = filter_minor_speakers(corpus, 1);
    CHECK(serialize_corpus(same) == serialize_corpus(corpus));
  }
  SUBCASE("threshold below 1 is rejected") {
    CHECK_THROWS_AS(filter_minor_speakers(corpus, 0), Error);
  }
  SUBCASE("counts come from the original corpus") {
    // after filtering at 4, A is gone; filtering the RESULT at 13 empties B too,
    // but filtering the original at 12 keeps B exactly
    NovelCorpus again = filter_minor_speakers(corpus, 12);
    CHECK(again.quotation_count() == 12);
  }
}

TEST_CASE("filter property: surviving speakers meet the threshold in the original corpus") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    NovelCorpus corpus;
    Novel novel;
    novel.roster.novel_id = "n";
    for (int c = 0; c < 4; ++c) {
      novel.roster.entries.push_back(
          entry("c" + std::to_string(c), "Char " + std::to_string(c)));
    }
    std::map<std::string, int> original_counts;
    std::size_t n_quotes = 1 + uniform_index(rng, 30);
    for (std::size_t i = 0; i < n_quotes; ++i) {
      std::string speaker = "c" + std::to_string(uniform_index(rng, 4));
      ++original_counts[speaker];
      novel.quotations.push_back(
          quote("n", "q" + std::to_string(i), "line", QuoteType::Explicit, speaker));
    }
    corpus.novels.emplace("n", std::move(novel));
    int threshold = 1 + static_cast<int>(uniform_index(rng, 10));
    NovelCorpus filtered = filter_minor_speakers(corpus, threshold);
    std::size_t expected = 0;
    for (const auto& [speaker, count] : original_counts) {
      if (count >= threshold) expected += static_cast<std::size_t>(count);
    }
    CHECK(filtered.quotation_count() == expected);
    for (const auto& q : filtered.novel("n").quotations) {
      CHECK(original_counts[q.speaker_id] >= threshold);
    }
  }
}

TEST_CASE("cross-domain splits hold out whole novels, pairwise disjoint") {
  NovelCorpus corpus = mock_novels(6);
  auto folds = make_cross_domain_splits(corpus, 2, 2, 42);
  REQUIRE(folds.size() == 2);
  for (const auto& fold : folds) {
    CHECK(fold.test_novels().size() == 2);
    CHECK(fold.train_novels().size() == 4);
    for (const auto& n : fold.test_novels()) CHECK_FALSE(fold.train_novels().count(n));
    CHECK(fold.train_ids.size() == 12);
    CHECK(fold.test_ids.size() == 6);
  }
  std::set<std::string> seen;
  for (const auto& fold : folds) {
    for (const auto& n : fold.test_novels()) CHECK(seen.insert(n).second);
  }
}

TEST_CASE("cross-domain splits are deterministic per seed, byte-for-byte") {
  NovelCorpus corpus = mock_novels(8);
  auto a = make_cross_domain_splits(corpus, 2, 2, 7);
  auto b = make_cross_domain_splits(corpus, 2, 2, 7);
  CHECK(serialize_splits(a) == serialize_splits(b));
  auto c = make_cross_domain_splits(corpus, 2, 2, 8);
  CHECK(serialize_splits(a) != serialize_splits(c));
}

TEST_CASE("cross-domain split arithmetic errors name the numbers") {
  NovelCorpus corpus = mock_novels(6);
  CHECK_THROWS_WITH_AS(make_cross_domain_splits(corpus, 5, 4, 1), doctest::Contains("20"),
                       Error);
}

TEST_CASE("degenerate fold with empty test side") {
  NovelCorpus corpus = mock_novels(3);
  auto folds = make_cross_domain_splits(corpus, 1, 0, 1);
  REQUIRE(folds.size() == 1);
  CHECK(folds[0].test_ids.empty());
  CHECK(folds[0].train_ids.size() == 9);
}

TEST_CASE("in-domain split separates explicit train from non-explicit test") {
  NovelCorpus corpus;
  Novel novel;
  novel.roster.novel_id = "n";
  novel.roster.entries.push_back(entry("A", "Alice"));
  for (int i = 0; i < 2; ++i) {
    novel.quotations.push_back(
        quote("n", "e" + std::to_string(i), "line", QuoteType::Explicit, "A"));
  }
  for (int i = 0; i < 3; ++i) {
    novel.quotations.push_back(
        quote("n", "i" + std::to_string(i), "line", QuoteType::Implicit, "A"));
  }
  corpus.novels.emplace("n", std::move(novel));

  SplitSpec split = make_in_domain_split(corpus);
  CHECK(split.train_ids.size() == 2);
  CHECK(split.test_ids.size() == 3);

  StatsReport stats = corpus_stats(corpus, &split);
  CHECK(stats.side("train")->overall.explicit_ratio() == doctest::Approx(1.0));
  CHECK(stats.side("test")->overall.explicit_ratio() == doctest::Approx(0.0));

  SUBCASE("only-explicit corpus leaves the test side empty") {
    NovelCorpus explicit_only = mock_novels(2);
    SplitSpec s = make_in_domain_split(explicit_only);
    CHECK(s.test_ids.empty());
  }
  SUBCASE("empty corpus is rejected") {
    CHECK_THROWS_AS(make_in_domain_split(NovelCorpus{}), Error);
  }
}

TEST_CASE("corpus_stats ratios") {
  NovelCorpus corpus;
  Novel novel;
  novel.roster.novel_id = "n";
  novel.roster.entries.push_back(entry("A", "Alice"));
  novel.quotations.push_back(quote("n", "q1", "x", QuoteType::Explicit, "A"));
  novel.quotations.push_back(quote("n", "q2", "x", QuoteType::Implicit, "A"));
  novel.quotations.push_back(quote("n", "q3", "x", QuoteType::Anaphoric, "A"));
  novel.quotations.push_back(quote("n", "q4", "x", QuoteType::Implicit, "A"));
  corpus.novels.emplace("n", std::move(novel));

  StatsReport stats = corpus_stats(corpus);
  REQUIRE(stats.side("all"));
  CHECK(stats.side("all")->overall.total == 4);
  CHECK(stats.side("all")->overall.explicit_ratio() == doctest::Approx(0.25));
  CHECK(stats.side("all")->per_novel.at("n").anaphoric_count == 1);

  SUBCASE("empty corpus reports zeros") {
    StatsReport empty = corpus_stats(NovelCorpus{});
    CHECK(empty.side("all")->overall.total == 0);
    CHECK(empty.side("all")->overall.explicit_ratio() == doctest::Approx(0.0));
  }
}

TEST_CASE("split protocol invariants hold across seeds on a 22-novel mock") {
  NovelCorpus corpus = mock_novels(22, 2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto folds = make_cross_domain_splits(corpus, 5, 4, seed);
    REQUIRE(folds.size() == 5);
    std::set<std::string> tested;
    for (const auto& fold : folds) {
      auto test_novels = fold.test_novels();
      CHECK(test_novels.size() == 4);
      for (const auto& n : test_novels) {
        CHECK_FALSE(fold.train_novels().count(n));
        CHECK(tested.insert(n).second);
      }
      for (const auto& key : fold.train_ids) CHECK_FALSE(fold.test_ids.count(key));
    }
    CHECK(serialize_splits(folds) ==
          serialize_splits(make_cross_domain_splits(corpus, 5, 4, seed)));
  }
}
