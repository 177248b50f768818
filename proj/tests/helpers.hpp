#pragma once

// Shared fixtures for the unit suites: a tiny hand-counted corpus, temp
// directory management, and small builders used across tests.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sig/corpus.hpp"

namespace sig_test {

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sig_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline sig::CharacterEntry entry(std::string id, std::string name,
                                 std::vector<std::string> aliases = {},
                                 sig::Gender g = sig::Gender::Unknown) {
  sig::CharacterEntry e;
  e.character_id = std::move(id);
  e.canonical_name = std::move(name);
  e.aliases = std::move(aliases);
  e.gender = g;
  return e;
}

inline sig::QuotationInstance quote(std::string novel, std::string id, std::string text,
                                    sig::QuoteType type, std::string speaker,
                                    std::vector<std::string> addressees = {},
                                    std::string left = "", std::string right = "") {
  sig::QuotationInstance q;
  q.novel_id = std::move(novel);
  q.quote_id = std::move(id);
  q.text = std::move(text);
  q.quote_type = type;
  q.speaker_id = std::move(speaker);
  q.addressee_ids = std::move(addressees);
  q.left_context = std::move(left);
  q.right_context = std::move(right);
  return q;
}

// One novel, two characters, three quotes (one per type). Counted by hand
// wherever a test asserts totals.
inline sig::NovelCorpus emma_fixture() {
  sig::NovelCorpus corpus;
  sig::Novel novel;
  novel.roster.novel_id = "emma";
  novel.roster.entries.push_back(entry("emma", "Emma", {"Miss Woodhouse"}, sig::Gender::Female));
  novel.roster.entries.push_back(
      entry("mrs_elton", "Mrs Elton", {"Augusta"}, sig::Gender::Female));
  novel.quotations.push_back(quote("emma", "q1", "\"Well, we shall see.\"",
                                   sig::QuoteType::Explicit, "mrs_elton", {"emma"},
                                   "Mrs. Elton hardly waited for the affirmative.",
                                   "said Mrs Elton. Emma was almost too much astonished to "
                                   "answer"));
  novel.quotations.push_back(quote("emma", "q2", "\"Rather he than I!\"",
                                   sig::QuoteType::Anaphoric, "mrs_elton", {"emma"},
                                   "But Mrs. Elton was very much discomposed indeed. She said:",
                                   ""));
  novel.quotations.push_back(quote("emma", "q3", "\"I am ready, if the others are.\"",
                                   sig::QuoteType::Implicit, "emma", {"mrs_elton"},
                                   "\"Your father will not be easy; why do not you go?\"",
                                   "\"Shall I ring the bell?\""));
  corpus.novels.emplace("emma", std::move(novel));
  return corpus;
}

// n novels with one character and `quotes` explicit quotations each.
inline sig::NovelCorpus mock_novels(int n, int quotes_each = 3) {
  sig::NovelCorpus corpus;
  for (int i = 0; i < n; ++i) {
    std::string novel_id = "n" + std::string(i < 10 ? "0" : "") + std::to_string(i);
    sig::Novel novel;
    novel.roster.novel_id = novel_id;
    novel.roster.entries.push_back(entry("c0", "Speaker " + std::to_string(i)));
    for (int q = 0; q < quotes_each; ++q) {
      novel.quotations.push_back(quote(novel_id, "q" + std::to_string(q), "line",
                                       sig::QuoteType::Explicit, "c0"));
    }
    corpus.novels.emplace(novel_id, std::move(novel));
  }
  return corpus;
}

}  // namespace sig_test
