#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sig/oracle_backend.hpp"
#include "sig/splits.hpp"
#include "sig/synthetic.hpp"
#include "sig/training.hpp"

using namespace sig;
using namespace sig_test;

namespace {

SplitSpec all_train_split(const NovelCorpus& corpus) {
  SplitSpec split;
  split.name = "all-train";
  for (const auto& [novel_id, novel] : corpus.novels) {
    for (const auto& q : novel.quotations) split.train_ids.insert({novel_id, q.quote_id});
  }
  return split;
}

}  // namespace

TEST_CASE("training pairs verbalize the gold speaker with the addressee clause") {
  NovelCorpus corpus = emma_fixture();
  SplitSpec split = all_train_split(corpus);
  WhitespaceTokenizer tok;
  auto pairs = build_training_pairs(corpus, split, SplitSide::Train, default_template(), tok, 256);
  REQUIRE(pairs.size() == 3);
  // deterministic (novel_id, quote_id) order
  CHECK(pairs[0].key.quote_id == "q1");
  CHECK(pairs[1].key.quote_id == "q2");
  CHECK(pairs[2].key.quote_id == "q3");
  CHECK(pairs[0].pair.target_text == "Speaker: Mrs Elton Addressee: Emma");
  CHECK(pairs[2].pair.target_text == "Speaker: Emma Addressee: Mrs Elton");

  SUBCASE("aux off gives the bare speaker clause") {
    auto bare = build_training_pairs(corpus, split, SplitSide::Train,
                                     find_template("replied_by-speaker"), tok, 256);
    CHECK(bare[0].pair.target_text == "Speaker: Mrs Elton");
  }
  SUBCASE("construction is pure: identical inputs, identical fingerprint") {
    auto again =
        build_training_pairs(corpus, split, SplitSide::Train, default_template(), tok, 256);
    CHECK(training_pairs_fingerprint(pairs) == training_pairs_fingerprint(again));
  }
}

TEST_CASE("addressees render in roster order regardless of annotation order") {
  NovelCorpus corpus;
  Novel novel;
  novel.roster.novel_id = "n";
  novel.roster.entries.push_back(entry("a", "Alpha"));
  novel.roster.entries.push_back(entry("b", "Beta"));
  novel.roster.entries.push_back(entry("c", "Gamma"));
  novel.quotations.push_back(
      quote("n", "q1", "line", QuoteType::Explicit, "a", {"c", "b"}));  // reversed
  corpus.novels.emplace("n", std::move(novel));
  WhitespaceTokenizer tok;
  auto pairs = build_training_pairs(corpus, all_train_split(corpus), SplitSide::Train,
                                    default_template(), tok, 64);
  CHECK(pairs[0].pair.target_text == "Speaker: Alpha Addressee: Beta, Gamma");
}

TEST_CASE("fiction aux uses the novel id") {
  NovelCorpus corpus = emma_fixture();
  WhitespaceTokenizer tok;
  auto pairs = build_training_pairs(corpus, all_train_split(corpus), SplitSide::Train,
                                    find_template("replied_by-speaker+fiction"), tok, 256);
  CHECK(pairs[0].pair.target_text == "Speaker: Mrs Elton Fiction: emma");
}

TEST_CASE("unresolvable gold speaker is an error naming the record") {
  NovelCorpus corpus = emma_fixture();
  corpus.novels.at("emma").quotations[0].speaker_id = "ghost";
  WhitespaceTokenizer tok;
  CHECK_THROWS_WITH_AS(build_training_pairs(corpus, all_train_split(corpus), SplitSide::Train,
                                            default_template(), tok, 256),
                       doctest::Contains("q1"), Error);
}

TEST_CASE("config invariants") {
  TrainingConfig config;
  config.epochs = 0;
  CHECK_THROWS_AS(config.validate(), Error);
  config.epochs = 1;
  config.batch_size = 0;
  CHECK_THROWS_AS(config.validate(), Error);
}

TEST_CASE("train drives the loss down, writes a manifest, and resumes") {
  TempDir tmp;
  SyntheticSpec spec;
  spec.novels = 2;
  spec.quotes_per_novel = 12;
  NovelCorpus corpus = make_synthetic_corpus(spec);
  auto folds = make_cross_domain_splits(corpus, 1, 1, 5);

  TinyBackendConfig bcfg;
  bcfg.emb_dim = 24;
  bcfg.hidden = 24;
  bcfg.max_source_tokens = 96;
  TinySeq2Seq backend(bcfg);

  TrainingConfig config;
  config.epochs = 4;
  config.batch_size = 8;
  config.max_source_tokens = 96;
  config.seed = 3;
  config.checkpoint_dir = tmp / "ckpt";

  TrainResult result = train(corpus, folds[0], config, backend);
  REQUIRE(result.epoch_losses.size() == 4);
  CHECK(result.epoch_losses.back() < result.epoch_losses.front());

  auto manifest = load_manifest(config.checkpoint_dir);
  CHECK(manifest.at("backend") == "tiny");
  CHECK(manifest.at("template") == "sig");
  CHECK(manifest.at("aux_task") == "addressee");
  CHECK(manifest.at("epochs").get<std::size_t>() == 4);
  CHECK(manifest.at("dataset_fingerprint") == result.dataset_fingerprint);
  CHECK(manifest.at("epoch_losses").size() == 4);

  SUBCASE("same config and seed reproduce the loss trajectory exactly") {
    TinySeq2Seq backend2(bcfg);
    TrainingConfig config2 = config;
    config2.checkpoint_dir = tmp / "ckpt2";
    TrainResult result2 = train(corpus, folds[0], config2, backend2);
    CHECK(result2.epoch_losses == result.epoch_losses);
    CHECK(result2.dataset_fingerprint == result.dataset_fingerprint);
  }

  SUBCASE("resume continues epoch numbering") {
    auto loaded = TinySeq2Seq::load(config.checkpoint_dir);
    TrainingConfig more = config;
    more.epochs = 2;
    TrainResult resumed = train(corpus, folds[0], more, *loaded, true);
    CHECK(resumed.epoch_losses.size() == 6);
    auto manifest2 = load_manifest(config.checkpoint_dir);
    CHECK(manifest2.at("epochs").get<std::size_t>() == 6);
  }
  SUBCASE("checkpoint round-trips through the trained weights") {
    auto loaded = TinySeq2Seq::load(config.checkpoint_dir);
    const auto& tok = backend.tokenizer();
    SequencePair probe{tok.encode_source("hello there"), tok.encode_target("Speaker: Emma")};
    SequencePair probe2{loaded->tokenizer().encode_source("hello there"),
                        loaded->tokenizer().encode_target("Speaker: Emma")};
    CHECK(backend.teacher_forced_probs(probe) == loaded->teacher_forced_probs(probe2));
  }
}

TEST_CASE("reported fit_step loss equals the teacher-forced recomputation") {
  // the loss/score consistency oracle on a small random sample
  TinyBackendConfig cfg;
  cfg.emb_dim = 12;
  cfg.hidden = 14;
  cfg.seed = 9;
  cfg.max_source_tokens = 64;
  TinySeq2Seq model(cfg);
  std::vector<std::string> texts;
  std::mt19937_64 rng(21);
  auto random_text = [&](std::size_t max_len) {
    std::string out;
    std::size_t len = 1 + uniform_index(rng, max_len);
    for (std::size_t i = 0; i < len; ++i) {
      if (i) out += ' ';
      out += "tok" + std::to_string(uniform_index(rng, 30));
    }
    return out;
  };
  for (int i = 0; i < 40; ++i) texts.push_back(random_text(12));
  model.prepare_training(texts);

  for (int batch_no = 0; batch_no < 4; ++batch_no) {
    std::vector<SequencePair> batch;
    for (int i = 0; i < 5; ++i) {
      batch.push_back({model.tokenizer().encode_source(random_text(12)),
                       model.tokenizer().encode_target(random_text(6))});
    }
    double expected = 0.0;
    for (const auto& pair : batch) {
      for (double p : model.teacher_forced_probs(pair)) expected -= std::log(p);
    }
    expected /= static_cast<double>(batch.size());
    double reported = model.fit_step(batch);
    CHECK(reported == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("oracle backend refuses to train") {
  NovelCorpus corpus = emma_fixture();
  SplitSpec split = all_train_split(corpus);
  OracleBackend oracle;
  std::vector<SequencePair> batch(1);
  CHECK_THROWS_AS(oracle.fit_step(batch), BackendError);
}
