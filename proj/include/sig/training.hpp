#pragma once

// Training-pair construction and the fine-tuning loop. Pairs are a pure
// function of (corpus, split side, template): gold speakers are verbalized
// under their canonical names, deterministically ordered by (novel_id,
// quote_id). The loop drives Backend::fit_step and persists a checkpoint
// plus a manifest with per-epoch losses and a dataset fingerprint.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sig/corpus.hpp"
#include "sig/splits.hpp"
#include "sig/templates.hpp"
#include "sig/tiny_backend.hpp"

namespace sig {

struct TrainingConfig {
  std::string template_name = default_template_name();
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 3e-3;
  std::size_t max_source_tokens = 160;
  std::uint64_t seed = 1;
  std::filesystem::path checkpoint_dir;

  void validate() const {
    if (epochs < 1) throw Error("training config: epochs must be >= 1");
    if (batch_size < 1) throw Error("training config: batch_size must be >= 1");
    if (learning_rate <= 0.0) throw Error("training config: learning_rate must be positive");
    if (max_source_tokens < 8) throw Error("training config: max_source_tokens too small");
  }
};

struct TrainingPair {
  QuoteKey key;
  RenderedPair pair;
};

inline std::vector<TrainingPair> build_training_pairs(const NovelCorpus& corpus,
                                                      const SplitSpec& split, SplitSide side,
                                                      const PromptTemplate& t,
                                                      const Tokenizer& tokenizer,
                                                      std::size_t budget) {
  std::vector<TrainingPair> out;
  // std::set iteration order is already (novel_id, quote_id)
  for (const auto& key : side_ids(split, side)) {
    const QuotationInstance* inst = corpus.find_quotation(key);
    if (!inst) {
      throw Error("split references unknown quotation '" + key.novel_id + "/" + key.quote_id +
                  "'");
    }
    const CharacterRoster& roster = corpus.novel(key.novel_id).roster;
    const CharacterEntry* gold = roster.find(inst->speaker_id);
    if (!gold) {
      throw Error("gold speaker '" + inst->speaker_id + "' of quotation '" + key.novel_id + "/" +
                  key.quote_id + "' does not resolve in the roster");
    }
    TargetAux aux;
    if (t.aux_task == AuxTask::Addressee) {
      std::vector<CharacterEntry> addressees;
      for (const auto& entry : roster.entries) {  // roster order
        for (const auto& id : inst->addressee_ids) {
          if (entry.character_id == id) {
            addressees.push_back(entry);
            break;
          }
        }
      }
      aux.addressees = std::move(addressees);
    } else if (t.aux_task == AuxTask::Fiction) {
      aux.fiction = key.novel_id;
    }
    TrainingPair tp;
    tp.key = key;
    tp.pair.source = render_source(*inst, t, tokenizer, budget);
    tp.pair.target_text = render_target(*gold, t, &aux);
    out.push_back(std::move(tp));
  }
  return out;
}

// Content hash of the training-pair dump; recorded in the manifest so an
// evaluation report is traceable to the exact data it was trained on.
inline std::string training_pairs_fingerprint(const std::vector<TrainingPair>& pairs) {
  std::ostringstream dump;
  for (const auto& p : pairs) {
    dump << p.key.novel_id << '\t' << p.key.quote_id << '\t' << p.pair.source.text << '\t'
         << p.pair.target_text << '\n';
  }
  return fnv1a64_hex(dump.str());
}

struct TrainResult {
  std::filesystem::path checkpoint_dir;
  std::vector<double> epoch_losses;  // cumulative across resumes
  std::string dataset_fingerprint;
};

// Training pairs carry the backend's terminator so the model learns to stop;
// scored targets at inference do not (the candidate score averages over the
// target template tokens only).
inline SequencePair encode_training_pair(const Backend& backend, std::string_view source_text,
                                         std::string_view target_text) {
  SequencePair sp;
  sp.source_tokens = backend.tokenizer().encode_source(source_text);
  sp.target_tokens = backend.tokenizer().encode_target(target_text);
  if (auto eos = backend.tokenizer().terminator_id()) sp.target_tokens.push_back(*eos);
  return sp;
}

inline nlohmann::ordered_json load_manifest(const std::filesystem::path& checkpoint_dir) {
  std::ifstream in(checkpoint_dir / "manifest.json", std::ios::binary);
  if (!in) throw Error("no manifest.json under '" + checkpoint_dir.string() + "'");
  return nlohmann::ordered_json::parse(in);
}

inline TrainResult train(const NovelCorpus& corpus, const SplitSpec& split,
                         const TrainingConfig& config, TinySeq2Seq& backend,
                         bool resume = false) {
  config.validate();
  if (!backend.trainable()) throw Error("backend '" + backend.id() + "' is not trainable");
  PromptTemplate t = find_template(config.template_name);

  auto pairs = build_training_pairs(corpus, split, SplitSide::Train, t, backend.tokenizer(),
                                    config.max_source_tokens);
  if (pairs.empty()) throw Error("training split is empty");

  std::vector<double> previous_losses;
  if (resume) {
    if (!backend.initialized()) {
      throw Error("resume requested but the backend holds no checkpoint weights");
    }
    auto manifest = load_manifest(config.checkpoint_dir);
    previous_losses = manifest.value("epoch_losses", std::vector<double>{});
  } else {
    std::vector<std::string> texts;
    texts.reserve(pairs.size() * 2);
    for (const auto& p : pairs) {
      texts.push_back(p.pair.source.text);
      texts.push_back(p.pair.target_text);
    }
    backend.prepare_training(texts);
  }

  std::vector<SequencePair> encoded;
  encoded.reserve(pairs.size());
  for (const auto& p : pairs) {
    encoded.push_back(encode_training_pair(backend, p.pair.source.text, p.pair.target_text));
  }

  TrainResult result;
  result.checkpoint_dir = config.checkpoint_dir;
  result.dataset_fingerprint = training_pairs_fingerprint(pairs);
  result.epoch_losses = previous_losses;

  const std::size_t epoch_offset = previous_losses.size();
  std::vector<std::size_t> order(encoded.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 rng(config.seed * 1000003ULL +
                        static_cast<std::uint64_t>(epoch_offset + static_cast<std::size_t>(epoch)));
    seeded_shuffle(order, rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::vector<SequencePair> batch;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(config.batch_size)) {
      batch.clear();
      for (std::size_t j = i;
           j < std::min(order.size(), i + static_cast<std::size_t>(config.batch_size)); ++j) {
        batch.push_back(encoded[order[j]]);
      }
      double batch_loss = backend.fit_step(batch);
      loss_sum += batch_loss * static_cast<double>(batch.size());
      seen += batch.size();
    }
    result.epoch_losses.push_back(loss_sum / static_cast<double>(seen));
  }

  namespace fs = std::filesystem;
  fs::create_directories(config.checkpoint_dir);
  backend.save(config.checkpoint_dir);
  nlohmann::ordered_json manifest;
  manifest["backend"] = backend.id();
  manifest["template"] = t.name;
  manifest["aux_task"] = to_string(t.aux_task);
  manifest["seed"] = config.seed;
  manifest["epochs"] = result.epoch_losses.size();
  manifest["batch_size"] = config.batch_size;
  manifest["learning_rate"] = config.learning_rate;
  manifest["max_source_tokens"] = config.max_source_tokens;
  manifest["dataset_fingerprint"] = result.dataset_fingerprint;
  manifest["epoch_losses"] = result.epoch_losses;
  manifest["hyperparams"] = backend.hyperparams_json();
  std::ofstream out(config.checkpoint_dir / "manifest.json", std::ios::binary);
  if (!out) throw Error("cannot write manifest under '" + config.checkpoint_dir.string() + "'");
  out << manifest.dump(2) << '\n';
  return result;
}

}  // namespace sig
