#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "sig/oracle_backend.hpp"
#include "sig/splits.hpp"
#include "sig/templates.hpp"

using namespace sig;
using namespace sig_test;

namespace {

const WhitespaceTokenizer& tok() {
  static WhitespaceTokenizer t;
  return t;
}

QuotationInstance table1_explicit() {
  return quote("emma", "q1", "\"Well, we shall see.\" said Mrs Elton.", QuoteType::Explicit,
               "mrs_elton", {},
               "Mrs. Elton hardly waited for the affirmative.",
               "Emma was almost too much astonished to answer");
}

}  // namespace

TEST_CASE("render_source lays out context, quote, infix, mask, context") {
  PromptTemplate t = find_template("replied_by-speaker");
  RenderedSource src = render_source(table1_explicit(), t, tok(), 256);
  CHECK(src.text ==
        "Mrs. Elton hardly waited for the affirmative. \"Well, we shall see.\" said Mrs Elton. "
        "replied by: <mask> Emma was almost too much astonished to answer");
  CHECK(src.text.substr(src.quote.begin, src.quote.end - src.quote.begin) ==
        "\"Well, we shall see.\" said Mrs Elton.");
  CHECK(src.text.substr(src.infix.begin, src.infix.end - src.infix.begin) == "replied by:");
  REQUIRE(src.masks.size() == 1);
  CHECK(src.text.substr(src.masks[0].begin, src.masks[0].end - src.masks[0].begin) == "<mask>");
}

TEST_CASE("render_source with the aux template inserts both masks before the right context") {
  PromptTemplate t = default_template();
  RenderedSource src = render_source(table1_explicit(), t, tok(), 256);
  REQUIRE(src.masks.size() == 2);
  CHECK(src.text.find("replied by: <mask> is listened by <mask> Emma was almost") !=
        std::string::npos);
}

TEST_CASE("render_source with empty contexts is quote plus prompt only") {
  QuotationInstance inst = quote("n", "q", "Hello there.", QuoteType::Implicit, "a");
  PromptTemplate t = find_template("replied_by-speaker");
  RenderedSource src = render_source(inst, t, tok(), 64);
  CHECK(src.text == "Hello there. replied by: <mask>");
}

TEST_CASE("budget exactly equal to the minimal content truncates both contexts to zero") {
  QuotationInstance inst = quote("n", "q", "one two three", QuoteType::Implicit, "a", {},
                                 "left context words here", "right context words here");
  PromptTemplate t = find_template("replied_by-speaker");
  // 3 quote tokens + 2 infix tokens + 1 mask, whitespace tokenizer has no markers
  RenderedSource src = render_source(inst, t, tok(), 6);
  CHECK(src.text == "one two three replied by: <mask>");
  CHECK(tok().count_tokens(src.text) == 6);

  SUBCASE("one token below the minimum is an error") {
    CHECK_THROWS_WITH_AS(render_source(inst, t, tok(), 5), doctest::Contains("budget"), Error);
  }
}

TEST_CASE("truncation removes the far ends and gives the odd token to the left context") {
  QuotationInstance inst = quote("n", "q", "q1 q2", QuoteType::Implicit, "a", {},
                                 "l1 l2 l3 l4 l5", "r1 r2 r3 r4 r5");
  PromptTemplate t = find_template("replied_by-speaker");
  // fixed = 2 + 2 + 1 = 5; remaining budget 5 -> left 3 (odd token), right 2
  RenderedSource src = render_source(inst, t, tok(), 10);
  CHECK(src.text == "l3 l4 l5 q1 q2 replied by: <mask> r1 r2");
}

TEST_CASE("slack from a short context flows to the other side") {
  QuotationInstance inst = quote("n", "q", "q1", QuoteType::Implicit, "a", {},
                                 "l1", "r1 r2 r3 r4 r5 r6");
  PromptTemplate t = find_template("none-none");
  // fixed = 1; remaining 5; left needs only 1, so right gets 4
  RenderedSource src = render_source(inst, t, tok(), 6);
  CHECK(src.text == "l1 q1 r1 r2 r3 r4");
}

TEST_CASE("aux template with empty aux fields is rejected") {
  PromptTemplate t = find_template("replied_by-speaker");
  t.aux_task = AuxTask::Addressee;
  CHECK_THROWS_AS(render_source(table1_explicit(), t, tok(), 64), Error);
}

TEST_CASE("render_target verbalizes the speaker clause") {
  CharacterEntry mrs_elton = entry("m", "Mrs Elton");
  CHECK(render_target(mrs_elton, find_template("replied_by-speaker")) == "Speaker: Mrs Elton");
  CHECK(render_target(mrs_elton, find_template("replied_by-none")) == "Mrs Elton");
  CHECK(render_target(mrs_elton, find_template("replied_by-replied_by")) ==
        "replied by: Mrs Elton");
}

TEST_CASE("render_target aux addressee clause") {
  PromptTemplate t = default_template();
  CharacterEntry emma = entry("e", "Emma");
  TargetAux aux;

  SUBCASE("empty addressee list renders the sentinel") {
    aux.addressees = std::vector<CharacterEntry>{};
    CHECK(render_target(emma, t, &aux) == "Speaker: Emma Addressee: none");
  }
  SUBCASE("addressees joined in the order given") {
    aux.addressees = std::vector<CharacterEntry>{entry("m", "Mrs Elton"),
                                                 entry("k", "Mr Knightley")};
    CHECK(render_target(emma, t, &aux) == "Speaker: Emma Addressee: Mrs Elton, Mr Knightley");
  }
  SUBCASE("missing addressees at train time is an error") {
    CHECK_THROWS_AS(render_target(emma, t, &aux), Error);
  }
  SUBCASE("inference-time rendering omits the aux clause") {
    CHECK(render_target(emma, t, nullptr) == "Speaker: Emma");
  }
}

TEST_CASE("render_target gender and fiction variants") {
  CharacterEntry emma = entry("e", "Emma", {}, Gender::Female);
  TargetAux aux;
  aux.fiction = "emma_novel";
  CHECK(render_target(emma, find_template("replied_by-speaker+gender"), &aux) ==
        "Speaker: Emma Gender: female");
  CHECK(render_target(emma, find_template("replied_by-speaker+fiction"), &aux) ==
        "Speaker: Emma Fiction: emma_novel");
}

TEST_CASE("catalog contents") {
  auto catalog = template_catalog();
  CHECK(catalog.size() == 9);  // six base pairings plus three aux variants

  PromptTemplate def = default_template();
  CHECK(def.name == "sig");
  CHECK(def.source_infix == "replied by:");
  CHECK(def.target_prefix == "Speaker:");
  CHECK(def.aux_task == AuxTask::Addressee);

  PromptTemplate none = find_template("none-none");
  CHECK(none.source_infix.empty());
  CHECK(none.target_prefix.empty());
  CHECK_FALSE(none.use_mask);

  CHECK_THROWS_AS(find_template("no-such-template"), Error);
}

TEST_CASE("templates load from a configuration file and shadow the catalog") {
  TempDir tmp;
  write_file(tmp / "templates.json",
             "[{\"name\":\"custom\",\"source_infix\":\"spoken by:\",\"use_mask\":true,"
             "\"target_prefix\":\"Who:\",\"aux_task\":\"none\"},"
             "{\"name\":\"sig\",\"source_infix\":\"uttered by:\",\"use_mask\":true,"
             "\"target_prefix\":\"Speaker:\"}]");
  auto extra = load_templates_file(tmp / "templates.json");
  REQUIRE(extra.size() == 2);
  CHECK(find_template("custom", extra).source_infix == "spoken by:");
  // user definition takes precedence over the catalog entry of the same name
  CHECK(find_template("sig", extra).source_infix == "uttered by:");
  CHECK(find_template("replied_by-speaker", extra).source_infix == "replied by:");
}

TEST_CASE("render_target begins with the prefix and names the candidate once before any aux") {
  std::vector<CharacterEntry> candidates{
      entry("a", "Emma"), entry("b", "Mrs Elton"), entry("c", "Dr. O'Malley-Smith Jr.")};
  TargetAux aux;
  aux.addressees = std::vector<CharacterEntry>{entry("x", "Jane")};
  aux.fiction = "some_novel";
  for (const auto& t : template_catalog()) {
    for (const auto& c : candidates) {
      std::string rendered = render_target(c, t, &aux);
      if (!t.target_prefix.empty()) CHECK(rendered.rfind(t.target_prefix, 0) == 0);
      std::string before_aux = rendered;
      if (t.aux_task != AuxTask::None) {
        auto pos = rendered.find(t.aux_target_prefix);
        REQUIRE(pos != std::string::npos);
        before_aux = rendered.substr(0, pos);
      }
      auto first = before_aux.find(c.canonical_name);
      REQUIRE(first != std::string::npos);
      CHECK(before_aux.find(c.canonical_name, first + 1) == std::string::npos);
    }
  }
}

TEST_CASE("rendering properties over randomized instances") {
  std::mt19937_64 rng(99);
  auto word = [&](int i) { return "w" + std::to_string(i); };
  auto catalog = template_catalog();
  for (int trial = 0; trial < 200; ++trial) {
    QuotationInstance inst;
    inst.novel_id = "n";
    inst.quote_id = "q";
    std::string quote_text;
    std::size_t quote_len = 1 + uniform_index(rng, 4);
    for (std::size_t i = 0; i < quote_len; ++i) {
      if (i) quote_text += ' ';
      quote_text += "Q" + std::to_string(i);
    }
    inst.text = quote_text;
    std::size_t left_len = uniform_index(rng, 8);
    for (std::size_t i = 0; i < left_len; ++i) {
      if (i) inst.left_context += ' ';
      inst.left_context += word(static_cast<int>(i));
    }
    std::size_t right_len = uniform_index(rng, 8);
    for (std::size_t i = 0; i < right_len; ++i) {
      if (i) inst.right_context += ' ';
      inst.right_context += word(100 + static_cast<int>(i));
    }
    const PromptTemplate& t = catalog[uniform_index(rng, catalog.size())];
    std::size_t fixed = quote_len + tok().count_tokens(t.source_infix) + (t.use_mask ? 1 : 0) +
                        (t.aux_task != AuxTask::None
                             ? tok().count_tokens(t.aux_source_infix) + 1
                             : 0);
    std::size_t budget = fixed + uniform_index(rng, 12);
    RenderedSource src = render_source(inst, t, tok(), budget);

    // quotation verbatim at the recorded offset, exactly once
    CHECK(src.text.substr(src.quote.begin, src.quote.end - src.quote.begin) == inst.text);
    CHECK(src.text.find(inst.text) == src.quote.begin);
    CHECK(src.text.find(inst.text, src.quote.begin + 1) == std::string::npos);

    // mask count matches the template
    std::size_t expected_masks =
        (t.use_mask ? 1u : 0u) + (t.aux_task != AuxTask::None ? 1u : 0u);
    CHECK(src.masks.size() == expected_masks);

    // budget respected
    CHECK(tok().count_tokens(src.text) <= budget);

    // purity
    CHECK(render_source(inst, t, tok(), budget).text == src.text);
  }
}
