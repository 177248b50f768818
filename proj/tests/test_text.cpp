#include <doctest.h>

#include "sig/text.hpp"

using namespace sig;

TEST_CASE("normalize_name folds case, trims, collapses, strips trailing punctuation") {
  CHECK(normalize_name("  Mrs   Elton ") == "mrs elton");
  CHECK(normalize_name("Mr. Beaver") == "mr. beaver");
  CHECK(normalize_name("Beaver.") == "beaver");
  CHECK(normalize_name("EMMA!?") == "emma");
  CHECK(normalize_name("Anne Shirley,") == "anne shirley");
  CHECK(normalize_name("\tJane\nFairfax ") == "jane fairfax");
  CHECK(normalize_name("...") == "");
  CHECK(normalize_name("") == "");
}

TEST_CASE("normalize_name keeps internal punctuation") {
  CHECK(normalize_name("O'Malley") == "o'malley");
  CHECK(normalize_name("Smith-Jones") == "smith-jones");
}

TEST_CASE("word-boundary containment") {
  CHECK(contains_word_boundary("the speaker is mrs elton", "mrs elton"));
  CHECK(contains_word_boundary("mrs elton", "mrs elton"));
  CHECK_FALSE(contains_word_boundary("anne said it", "ann"));
  CHECK(contains_word_boundary("ann said it", "ann"));
  CHECK_FALSE(contains_word_boundary("i cannot determine the speaker", "emma"));
  CHECK_FALSE(contains_word_boundary("anything", ""));
  CHECK(contains_word_boundary("so, emma spoke", "emma"));
}

TEST_CASE("plain substring containment") {
  CHECK(contains_substring("mrs. beaver", "beaver"));
  CHECK_FALSE(contains_substring("mrs. beaver", "weasel"));
  CHECK_FALSE(contains_substring("anything", ""));
}

TEST_CASE("whitespace splitting and joining") {
  auto parts = split_whitespace("  a  b\tc\n");
  REQUIRE(parts.size() == 3);
  CHECK(parts[0] == "a");
  CHECK(parts[2] == "c");
  CHECK(join(parts, " ") == "a b c");
  CHECK(split_whitespace("").empty());
}

TEST_CASE("fnv fingerprints are stable and sensitive") {
  CHECK(fnv1a64_hex("abc") == fnv1a64_hex("abc"));
  CHECK(fnv1a64_hex("abc") != fnv1a64_hex("abd"));
  CHECK(fnv1a64_hex("").size() == 16);
}
