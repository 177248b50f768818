// Acceptance suite: one criterion per section, one PASS/FAIL/SKIP line each.
// Exit status is the number of failed criteria. The synthetic end-to-end
// criterion drives the actual CLI binary (path from --cli or the build-time
// default).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sig/corpus_io.hpp"
#include "sig/evaluation.hpp"
#include "sig/inference.hpp"
#include "sig/oracle_backend.hpp"
#include "sig/pdnc.hpp"
#include "sig/splits.hpp"
#include "sig/synthetic.hpp"
#include "sig/templates.hpp"
#include "sig/tiny_backend.hpp"
#include "sig/training.hpp"

namespace fs = std::filesystem;

namespace {

#ifndef SIG_CLI_PATH
#define SIG_CLI_PATH "./sig"
#endif

std::string g_cli = SIG_CLI_PATH;
int g_failures = 0;

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void report(const char* name, bool ok, const std::string& detail, double seconds) {
  std::printf("%s %s (%s) [%.1fs]\n", ok ? "PASS" : "FAIL", name, detail.c_str(), seconds);
  if (!ok) ++g_failures;
}

void skip(const char* name, const std::string& reason) {
  std::printf("SKIP %s (%s)\n", name, reason.c_str());
}

int run_cli(const std::string& args) {
  std::string cmd = g_cli + " " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

// ---------------------------------------------------------------- criterion 1
// Scoring oracle equivalence: exhaustive enumeration of every target of length
// <= 6 over a 5-token vocabulary; score_candidate must equal the hand-walked
// mean of table probabilities within 1e-9.
void criterion_1() {
  Timer timer;
  const std::vector<std::string> vocab{"A", "B", "C", "D", "E"};
  sig::OracleBackend oracle;
  sig::nn::Rng rng(2024);

  // independent copy of the table, used for the hand computation; covers
  // every prefix of length 0..5
  std::map<std::string, std::map<std::string, double>> hand_table;
  std::vector<std::string> level{""};
  for (int len = 0; len <= 5; ++len) {
    std::vector<std::string> next;
    for (const auto& prefix : level) {
      std::map<std::string, double> dist;
      double sum = 0.0;
      for (const auto& tok : vocab) {
        double w = 0.05 + rng.uniform();
        dist[tok] = w;
        sum += w;
      }
      for (auto& [tok, w] : dist) w /= sum;
      hand_table[prefix] = std::move(dist);
      for (const auto& tok : vocab) {
        next.push_back(prefix.empty() ? tok : prefix + " " + tok);
      }
    }
    level = std::move(next);
  }
  const std::string source_text = "the fixed source";
  for (const auto& [prefix, dist] : hand_table) {
    oracle.set_distribution(source_text, prefix, dist);
  }

  sig::QuotationInstance inst;
  inst.novel_id = "n";
  inst.quote_id = "q";
  inst.text = source_text;
  sig::PromptTemplate t = sig::find_template("none-none");
  sig::RenderedSource src = sig::render_source(inst, t, oracle.tokenizer(), 64);

  std::size_t enumerated = 0;
  double max_err = 0.0;
  std::vector<std::vector<std::size_t>> stack;
  std::vector<std::size_t> current;
  std::function<void()> recurse = [&]() {
    if (!current.empty()) {
      std::string target;
      for (std::size_t i : current) {
        if (!target.empty()) target += ' ';
        target += vocab[i];
      }
      double expected = 0.0;
      std::string prefix;
      for (std::size_t i : current) {
        expected += hand_table.at(prefix).at(vocab[i]);
        if (!prefix.empty()) prefix += ' ';
        prefix += vocab[i];
      }
      expected /= static_cast<double>(current.size());

      sig::CharacterEntry cand;
      cand.character_id = target;
      cand.canonical_name = target;
      sig::CandidateScore score = sig::score_candidate(src, cand, t, oracle);
      max_err = std::max(max_err, std::abs(score.score - expected));
      ++enumerated;
    }
    if (current.size() == 6) return;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      current.push_back(i);
      recurse();
      current.pop_back();
    }
  };
  recurse();

  char detail[128];
  std::snprintf(detail, sizeof(detail), "%zu targets enumerated, max |err| = %.2e", enumerated,
                max_err);
  report("criterion-1 scoring-oracle-equivalence",
         enumerated == 19530 && max_err < 1e-9 && timer.seconds() < 10.0, detail,
         timer.seconds());
}

// ---------------------------------------------------------------- criterion 2
// The reported training loss equals the independent recomputation from
// teacher_forced_probs within 1e-5, over 100 random pairs.
void criterion_2() {
  Timer timer;
  sig::TinyBackendConfig cfg;
  cfg.emb_dim = 24;
  cfg.hidden = 32;
  cfg.seed = 77;
  cfg.max_source_tokens = 96;
  sig::TinySeq2Seq model(cfg);

  sig::nn::Rng rng(55);
  auto random_text = [&](std::size_t max_len) {
    std::string out;
    std::size_t len = 1 + rng.bits() % max_len;
    for (std::size_t i = 0; i < len; ++i) {
      if (i) out += ' ';
      out += "w" + std::to_string(rng.bits() % 60);
    }
    return out;
  };
  std::vector<std::string> texts;
  for (int i = 0; i < 80; ++i) texts.push_back(random_text(16));
  model.prepare_training(texts);

  double max_err = 0.0;
  std::size_t pairs_checked = 0;
  for (int batch_no = 0; batch_no < 10; ++batch_no) {
    std::vector<sig::SequencePair> batch;
    for (int i = 0; i < 10; ++i) {
      batch.push_back({model.tokenizer().encode_source(random_text(16)),
                       model.tokenizer().encode_target(random_text(8))});
    }
    double expected = 0.0;
    for (const auto& pair : batch) {
      for (double p : model.teacher_forced_probs(pair)) expected -= std::log(p);
    }
    expected /= static_cast<double>(batch.size());
    double reported = model.fit_step(batch);
    max_err = std::max(max_err, std::abs(reported - expected));
    pairs_checked += batch.size();
  }
  char detail[128];
  std::snprintf(detail, sizeof(detail), "%zu pairs, max |loss err| = %.2e", pairs_checked,
                max_err);
  report("criterion-2 loss-score-consistency", max_err < 1e-5 && timer.seconds() < 60.0, detail,
         timer.seconds());
}

// ---------------------------------------------------------------- criterion 3
// Synthetic end-to-end through the CLI binary: train the tiny backend on a
// 1500-quotation cue corpus, hold out two of ten novels (20%), require SIG
// top-1 >= 0.95 and SIG^D resolved-accuracy >= 0.90.
void criterion_3() {
  Timer timer;
  fs::path work = fs::temp_directory_path() / "sig_acceptance_e2e";
  fs::remove_all(work);
  fs::create_directories(work);
  auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };

  bool steps_ok = true;
  steps_ok &= run_cli("synth --out " + q(work / "data") +
                      " --novels 10 --quotes-per-novel 150 --seed 7") == 0;
  fs::path corpus = work / "data" / "corpus.jsonl";
  steps_ok &= run_cli("split --corpus " + q(corpus) + " --out " + q(work / "splits") +
                      " --protocol cross --folds 1 --test-novels 2 --seed 2") == 0;
  fs::path splits = work / "splits" / "splits.jsonl";
  steps_ok &= run_cli("train --corpus " + q(corpus) + " --split " + q(splits) +
                      " --fold 0 --template sig --backend tiny --epochs 15 --batch-size 16 " +
                      "--emb-dim 48 --hidden 64 --budget 160 --seed 4 --out " +
                      q(work / "ckpt")) == 0;
  steps_ok &= run_cli("predict --corpus " + q(corpus) + " --split " + q(splits) +
                      " --fold 0 --checkpoint " + q(work / "ckpt") + " --mode sig --out " +
                      q(work / "preds_sig.jsonl")) == 0;
  steps_ok &= run_cli("predict --corpus " + q(corpus) + " --split " + q(splits) +
                      " --fold 0 --checkpoint " + q(work / "ckpt") + " --mode sig_d --out " +
                      q(work / "preds_sigd.jsonl")) == 0;
  steps_ok &= run_cli("evaluate --corpus " + q(corpus) + " --split " + q(splits) +
                      " --predictions " + q(work / "preds_sig.jsonl") + " --out " +
                      q(work / "report_sig")) == 0;
  steps_ok &= run_cli("evaluate --corpus " + q(corpus) + " --split " + q(splits) +
                      " --predictions " + q(work / "preds_sigd.jsonl") + " --out " +
                      q(work / "report_sigd")) == 0;

  double sig_acc = 0.0, sigd_acc = 0.0;
  if (steps_ok) {
    std::ifstream a(work / "report_sig" / "report.json");
    std::ifstream b(work / "report_sigd" / "report.json");
    if (a && b) {
      sig_acc = nlohmann::json::parse(a).at("overall").at("mean").get<double>();
      sigd_acc = nlohmann::json::parse(b).at("overall").at("mean").get<double>();
    } else {
      steps_ok = false;
    }
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "pipeline %s, SIG top-1 = %.4f (need >= 0.95), SIG^D resolved = %.4f (need >= "
                "0.90)",
                steps_ok ? "ok" : "FAILED", sig_acc, sigd_acc);
  report("criterion-3 synthetic-end-to-end",
         steps_ok && sig_acc >= 0.95 && sigd_acc >= 0.90 && timer.seconds() < 600.0, detail,
         timer.seconds());
}

// ---------------------------------------------------------------- criterion 4
// Split protocol invariants over 100 seeds on a 22-novel mock corpus.
void criterion_4() {
  Timer timer;
  sig::NovelCorpus corpus;
  for (int i = 0; i < 22; ++i) {
    std::string novel_id = "novel_" + std::to_string(10 + i);
    sig::Novel novel;
    novel.roster.novel_id = novel_id;
    sig::CharacterEntry c;
    c.character_id = "c";
    c.canonical_name = "Speaker";
    novel.roster.entries.push_back(c);
    for (int j = 0; j < 2; ++j) {
      sig::QuotationInstance inst;
      inst.novel_id = novel_id;
      inst.quote_id = "q" + std::to_string(j);
      inst.text = "line";
      inst.quote_type = sig::QuoteType::Explicit;
      inst.speaker_id = "c";
      novel.quotations.push_back(inst);
    }
    corpus.novels.emplace(novel_id, std::move(novel));
  }

  bool ok = true;
  for (std::uint64_t seed = 0; seed < 100 && ok; ++seed) {
    auto folds = sig::make_cross_domain_splits(corpus, 5, 4, seed);
    ok &= folds.size() == 5;
    std::set<std::string> tested;
    for (const auto& fold : folds) {
      auto test_novels = fold.test_novels();
      ok &= test_novels.size() == 4;
      for (const auto& n : test_novels) {
        ok &= !fold.train_novels().count(n);
        ok &= tested.insert(n).second;  // pairwise disjoint across folds
      }
      for (const auto& key : fold.train_ids) ok &= !fold.test_ids.count(key);
    }
    ok &= sig::serialize_splits(folds) ==
          sig::serialize_splits(sig::make_cross_domain_splits(corpus, 5, 4, seed));
  }
  report("criterion-4 split-protocol-invariants", ok && timer.seconds() < 10.0,
         "100 seeds, 5 folds x 4 novels, disjointness + determinism", timer.seconds());
}

// ---------------------------------------------------------------- criterion 5
// Real-PDNC corpus statistics against the published table. Runs only when
// the dataset is present (SIG_PDNC_DIR).
void criterion_5() {
  Timer timer;
  const char* dir = std::getenv("SIG_PDNC_DIR");
  if (!dir || !fs::exists(dir)) {
    skip("criterion-5 pdnc-corpus-statistics",
         "PDNC dataset not present; set SIG_PDNC_DIR to the release root to enable");
    return;
  }
  sig::IngestResult result = sig::parse_pdnc(dir);
  sig::NovelCorpus filtered = sig::filter_minor_speakers(result.corpus, 10);

  auto within = [](double value, double target, double tol) {
    return std::abs(value - target) <= tol * target;
  };
  sig::SplitSpec in_domain = sig::make_in_domain_split(filtered);
  sig::StatsReport in_stats = sig::corpus_stats(filtered, &in_domain);
  bool in_ok = within(static_cast<double>(in_stats.side("train")->overall.total), 11235, 0.01) &&
               within(static_cast<double>(in_stats.side("test")->overall.total), 22589, 0.01) &&
               in_stats.side("train")->overall.explicit_ratio() == 1.0 &&
               in_stats.side("test")->overall.explicit_ratio() == 0.0;

  // the published cross-domain row is one random fold; search seeds for one
  // matching within the tolerance
  bool cross_ok = false;
  for (std::uint64_t seed = 0; seed < 50 && !cross_ok; ++seed) {
    for (const auto& fold : sig::make_cross_domain_splits(filtered, 5, 4, seed)) {
      sig::StatsReport s = sig::corpus_stats(filtered, &fold);
      if (within(static_cast<double>(s.side("train")->overall.total), 28105, 0.01) &&
          within(static_cast<double>(s.side("test")->overall.total), 5989, 0.01) &&
          within(s.side("train")->overall.explicit_ratio(), 0.328, 0.01) &&
          within(s.side("test")->overall.explicit_ratio(), 0.347, 0.01)) {
        cross_ok = true;
        break;
      }
    }
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "ingested %zu quotations, in-domain %s, cross-domain fold %s",
                result.corpus.quotation_count(), in_ok ? "ok" : "off",
                cross_ok ? "found" : "not found");
  report("criterion-5 pdnc-corpus-statistics", in_ok && cross_ok && timer.seconds() < 300.0,
         detail, timer.seconds());
}

// ---------------------------------------------------------------- criterion 6
// Metric properties on 1,000 randomized prediction fixtures.
void criterion_6() {
  Timer timer;
  sig::nn::Rng rng(606);
  bool ok = true;
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    sig::NovelCorpus corpus;
    sig::SplitSpec split;
    sig::Novel novel;
    novel.roster.novel_id = "n";
    const char* ids[] = {"A", "B", "C", "D", "E"};
    for (const char* id : ids) {
      sig::CharacterEntry e;
      e.character_id = id;
      e.canonical_name = std::string("Name ") + id;
      novel.roster.entries.push_back(e);
    }
    std::size_t n = 4 + rng.bits() % 30;
    std::vector<sig::RankedPrediction> preds;
    for (std::size_t i = 0; i < n; ++i) {
      sig::QuotationInstance inst;
      inst.novel_id = "n";
      inst.quote_id = "q" + std::to_string(i);
      inst.text = "line";
      inst.quote_type = static_cast<sig::QuoteType>(rng.bits() % 3);
      inst.speaker_id = ids[rng.bits() % 5];
      novel.quotations.push_back(inst);
      split.test_ids.insert({"n", inst.quote_id});

      sig::RankedPrediction p;
      p.novel_id = "n";
      p.quote_id = inst.quote_id;
      std::vector<std::size_t> order{0, 1, 2, 3, 4};
      for (std::size_t k = order.size(); k > 1; --k) {
        std::swap(order[k - 1], order[rng.bits() % k]);
      }
      double score = 1.0;
      for (std::size_t idx : order) {
        sig::CandidateScore c;
        c.character_id = ids[idx];
        c.score = score;
        score *= 0.8;
        p.ranked.push_back(c);
      }
      p.chosen = p.ranked.front().character_id;
      preds.push_back(std::move(p));
    }
    corpus.novels.emplace("n", std::move(novel));
    sig::EvalReport report = sig::evaluate_predictions(preds, corpus, split);
    for (std::size_t k = 1; k < report.topk.size(); ++k) {
      ok &= report.topk[k].accuracy() >= report.topk[k - 1].accuracy();
    }
    ok &= report.topk.size() == 5;
    ok &= report.topk[4].accuracy() == 1.0;  // closure at full roster depth
    ok &= report.non_explicit.correct ==
          report.anaphoric_cell.correct + report.implicit_cell.correct;
    ok &= report.non_explicit.total ==
          report.anaphoric_cell.total + report.implicit_cell.total;
    if (report.non_explicit.defined()) {
      double weighted =
          (report.anaphoric_cell.accuracy() * static_cast<double>(report.anaphoric_cell.total) +
           report.implicit_cell.accuracy() * static_cast<double>(report.implicit_cell.total)) /
          static_cast<double>(report.non_explicit.total);
      ok &= std::abs(report.non_explicit.accuracy() - weighted) < 1e-12;
    }
  }
  report("criterion-6 metric-properties", ok && timer.seconds() < 10.0,
         "1000 randomized fixtures: top-k monotone, non-explicit count-weighted",
         timer.seconds());
}

// ---------------------------------------------------------------- criterion 7
// Alias/parse suite: the Beaver ambiguity plus a 50-character fuzz roster
// with punctuated and case-varied aliases round-tripping through
// render_target -> parse -> resolve.
void criterion_7() {
  Timer timer;
  bool ok = true;

  sig::CharacterRoster narnia;
  narnia.novel_id = "narnia";
  {
    sig::CharacterEntry mr;
    mr.character_id = "mr_beaver";
    mr.canonical_name = "Mr. Beaver";
    sig::CharacterEntry mrs;
    mrs.character_id = "mrs_beaver";
    mrs.canonical_name = "Mrs. Beaver";
    narnia.entries = {mr, mrs};
  }
  sig::Resolution beaver = sig::resolve_name("Beaver", narnia);
  ok &= beaver.kind == sig::Resolution::Kind::Ambiguous && beaver.character_ids.size() == 2;

  sig::nn::Rng rng(707);
  sig::CharacterRoster fuzz;
  fuzz.novel_id = "fuzz";
  const char* first[] = {"Anne", "George", "Mary-Jane", "O'Hara", "Beatrix", "Tom", "Lucinda",
                         "Edmund", "Florence", "Quentin"};
  const char* title[] = {"Dr.", "Mrs.", "Mr.", "Prof.", "Sir"};
  for (int i = 0; i < 50; ++i) {
    sig::CharacterEntry e;
    e.character_id = "char_" + std::to_string(i);
    e.canonical_name = std::string(title[rng.bits() % 5]) + " " + first[rng.bits() % 10] + " " +
                       std::to_string(i);  // index keeps names unique
    std::string upper = e.canonical_name;
    for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    e.aliases.push_back(upper + " the Elder");
    e.aliases.push_back("old " + e.canonical_name + "!");
    fuzz.entries.push_back(e);
  }
  ok &= sig::roster_violations(fuzz).empty();

  sig::PromptTemplate t = sig::default_template();
  for (const auto& e : fuzz.entries) {
    std::string rendered = sig::render_target(e, t, nullptr);
    std::string parsed = sig::parse_speaker_clause(rendered, t);
    sig::Resolution r = sig::resolve_name(parsed, fuzz);
    ok &= r.resolved_to(e.character_id);
    // alias forms resolve to the same character
    for (const auto& alias : e.aliases) {
      ok &= sig::resolve_name(alias, fuzz).resolved_to(e.character_id);
    }
  }
  report("criterion-7 alias-parse-suite", ok && timer.seconds() < 5.0,
         "Beaver ambiguity + 50-character fuzz roster round-trip", timer.seconds());
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; i += 2) {
    if (std::string(argv[i]) == "--cli") g_cli = argv[i + 1];
  }
  std::printf("acceptance suite (cli: %s)\n", g_cli.c_str());
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  skip("criterion-8 full-scale-reproduction",
       "optional, non-gating: fine-tuning a pretrained encoder-decoder on full PDNC is a "
       "multi-hour GPU run; see README");
  if (g_failures) {
    std::printf("%d criterion(s) FAILED\n", g_failures);
  } else {
    std::printf("all gating criteria passed\n");
  }
  return g_failures;
}
