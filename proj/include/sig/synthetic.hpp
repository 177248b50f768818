#pragma once

// Synthetic dialogue corpus whose speaker is deterministically cued by
// surface patterns: attribution after the quote (explicit), a pronoun whose
// antecedent is the one name in the left context (anaphoric), and two-party
// turn alternation (implicit, the speaker two turns back speaks again). The
// same eight-character cast appears in every generated novel, so held-out
// novels test pattern generalization, not name memory.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "sig/corpus.hpp"
#include "sig/splits.hpp"

namespace sig {

struct SyntheticSpec {
  int novels = 10;
  int quotes_per_novel = 60;
  std::uint64_t seed = 7;
};

namespace detail {

struct SyntheticCast {
  std::vector<CharacterEntry> entries;
};

inline SyntheticCast synthetic_cast() {
  auto entry = [](std::string name, Gender g, std::vector<std::string> aliases) {
    CharacterEntry e;
    e.character_id = name;
    e.canonical_name = std::move(name);
    e.gender = g;
    e.aliases = std::move(aliases);
    return e;
  };
  SyntheticCast cast;
  cast.entries.push_back(entry("Emma", Gender::Female, {}));
  cast.entries.push_back(entry("George", Gender::Male, {}));
  cast.entries.push_back(entry("Harriet", Gender::Female, {}));
  cast.entries.push_back(entry("Robert", Gender::Male, {}));
  cast.entries.push_back(entry("Jane", Gender::Female, {}));
  cast.entries.push_back(entry("Frank", Gender::Male, {}));
  cast.entries.push_back(entry("Anne Shirley", Gender::Female, {"Anne"}));
  cast.entries.push_back(entry("Thomas Birch", Gender::Male, {"Tom"}));
  return cast;
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words{
      "the",    "garden",  "was",    "quiet",  "that",   "evening", "rain",    "fell",
      "softly", "against", "window", "light",  "faded",  "over",    "hills",   "candle",
      "burned", "low",     "table",  "letter", "lay",    "open",    "door",    "creaked",
      "wind",   "moved",   "through", "trees", "clock",  "struck",  "nine",    "fire",
      "warm",   "room",    "grew",   "dark",   "path",   "led",     "toward",  "river"};
  return words;
}

class SentenceMaker {
 public:
  explicit SentenceMaker(std::mt19937_64& rng) : rng_(rng) {}

  std::string sentence(std::size_t min_words = 3, std::size_t max_words = 6) {
    const auto& bank = filler_words();
    std::size_t n = min_words + uniform_index(rng_, max_words - min_words + 1);
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) out.push_back(' ');
      out += bank[uniform_index(rng_, bank.size())];
    }
    out += " .";
    return out;
  }

  std::string utterance() { return sentence(2, 4); }

 private:
  std::mt19937_64& rng_;
};

inline std::string pronoun_of(Gender g) { return g == Gender::Female ? "She" : "He"; }

}  // namespace detail

inline NovelCorpus make_synthetic_corpus(const SyntheticSpec& spec = {}) {
  std::mt19937_64 rng(spec.seed);
  detail::SentenceMaker maker(rng);
  auto cast = detail::synthetic_cast();

  NovelCorpus corpus;
  for (int n = 0; n < spec.novels; ++n) {
    char novel_name[32];
    std::snprintf(novel_name, sizeof(novel_name), "novel_%02d", n);
    const std::string novel_id = novel_name;
    Novel novel;
    novel.roster.novel_id = novel_id;
    novel.roster.entries = cast.entries;

    for (int q = 0; q < spec.quotes_per_novel; ++q) {
      const std::size_t speaker_idx = uniform_index(rng, cast.entries.size());
      std::size_t other_idx = uniform_index(rng, cast.entries.size() - 1);
      if (other_idx >= speaker_idx) ++other_idx;
      const CharacterEntry& speaker = cast.entries[speaker_idx];
      const CharacterEntry& other = cast.entries[other_idx];

      QuotationInstance inst;
      inst.novel_id = novel_id;
      char qid[16];
      std::snprintf(qid, sizeof(qid), "q%04d", q);
      inst.quote_id = qid;
      inst.text = "\" " + maker.utterance() + " \"";
      inst.speaker_id = speaker.character_id;
      inst.addressee_ids = {other.character_id};

      switch (q % 3) {
        case 0:  // attribution directly after the quote
          inst.quote_type = QuoteType::Explicit;
          inst.left_context = maker.sentence();
          inst.right_context = "said " + speaker.canonical_name + " . " + maker.sentence();
          break;
        case 1:  // pronoun attribution, antecedent is the one name on the left
          inst.quote_type = QuoteType::Anaphoric;
          inst.left_context = maker.sentence() + " " + speaker.canonical_name +
                              " looked away . " + detail::pronoun_of(speaker.gender) +
                              " said :";
          inst.right_context = maker.sentence();
          break;
        default:  // two-party alternation: the speaker two turns back resumes
          inst.quote_type = QuoteType::Implicit;
          inst.left_context = "\" " + maker.utterance() + " \" said " + speaker.canonical_name +
                              " . \" " + maker.utterance() + " \" said " + other.canonical_name +
                              " .";
          inst.right_context = maker.sentence();
          break;
      }
      novel.quotations.push_back(std::move(inst));
    }
    corpus.novels.emplace(novel_id, std::move(novel));
  }
  return corpus;
}

}  // namespace sig
