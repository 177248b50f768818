// sig — speaker attribution over annotated literary corpora.
//
// Subcommands cover the full pipeline: ingest -> split -> train -> predict
// -> evaluate, plus the encoder baseline, the zero-shot LLM runner, the
// embedding viz, and a synthetic demo-corpus generator. Every command that
// writes artifacts drops a run manifest with content hashes of its inputs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sig/corpus.hpp"
#include "sig/corpus_io.hpp"
#include "sig/encoder_baseline.hpp"
#include "sig/evaluation.hpp"
#include "sig/inference.hpp"
#include "sig/llm.hpp"
#include "sig/llm_http.hpp"
#include "sig/pdnc.hpp"
#include "sig/splits.hpp"
#include "sig/synthetic.hpp"
#include "sig/templates.hpp"
#include "sig/tiny_backend.hpp"
#include "sig/training.hpp"
#include "sig/tsne.hpp"
#include "sig/viz.hpp"
#include "sig/wp.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "missing";
  std::ostringstream ss;
  ss << in.rdbuf();
  return sig::fnv1a64_hex(ss.str());
}

void write_run_manifest(const fs::path& out_path, const std::string& command,
                        const ordered_json& config, const std::vector<fs::path>& inputs) {
  ordered_json j;
  j["tool"] = "sig";
  j["version"] = kToolVersion;
  j["command"] = command;
  j["config"] = config;
  auto& in = j["inputs"] = ordered_json::object();
  for (const auto& p : inputs) in[p.string()] = file_hash(p);
  fs::path manifest = fs::is_directory(out_path) || !out_path.has_extension()
                          ? out_path / "run_manifest.json"
                          : fs::path(out_path.string() + ".manifest.json");
  fs::create_directories(manifest.parent_path());
  std::ofstream out(manifest, std::ios::binary);
  out << j.dump(2) << '\n';
}

// JSON configuration file whose values OVERRIDE command-line flags. Keys use
// the long flag spelling without the leading dashes.
class ConfigBinder {
 public:
  template <typename T>
  void bind(const std::string& key, T& var) {
    setters_[key] = [&var](const nlohmann::json& v) { var = v.get<T>(); };
  }

  void apply(const std::string& path) const {
    if (path.empty()) return;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw sig::Error("cannot open config file '" + path + "'");
    nlohmann::json j = nlohmann::json::parse(in);
    for (const auto& [key, value] : j.items()) {
      auto it = setters_.find(key);
      if (it == setters_.end()) throw sig::Error("config file: unknown key '" + key + "'");
      it->second(value);
    }
  }

 private:
  std::map<std::string, std::function<void(const nlohmann::json&)>> setters_;
};

sig::NovelCorpus load_corpus_or_die(const std::string& path) {
  sig::IngestResult result = sig::load_corpus(path);
  std::size_t dropped = 0;
  for (const auto& r : result.rejects) {
    if (r.kind == "record") ++dropped;
  }
  if (dropped > 0) {
    std::cerr << "warning: " << dropped << " records rejected while loading '" << path << "'\n";
  }
  return std::move(result.corpus);
}

const sig::SplitSpec& pick_fold(const std::vector<sig::SplitSpec>& splits, int fold) {
  for (const auto& s : splits) {
    if (s.fold_index == fold) return s;
  }
  throw sig::Error("split file has no fold " + std::to_string(fold));
}

ordered_json stats_side_json(const sig::StatsSide& side) {
  auto cell = [](const sig::StatsCell& c) {
    return ordered_json{{"total", c.total},
                        {"explicit", c.explicit_count},
                        {"anaphoric", c.anaphoric_count},
                        {"implicit", c.implicit_count},
                        {"explicit_ratio", c.explicit_ratio()}};
  };
  ordered_json j;
  j["overall"] = cell(side.overall);
  auto& per_novel = j["per_novel"] = ordered_json::object();
  for (const auto& [novel, c] : side.per_novel) per_novel[novel] = cell(c);
  return j;
}

int cmd_synth(const std::string& out_dir, int novels, int quotes, std::uint64_t seed) {
  sig::SyntheticSpec spec;
  spec.novels = novels;
  spec.quotes_per_novel = quotes;
  spec.seed = seed;
  sig::NovelCorpus corpus = sig::make_synthetic_corpus(spec);
  fs::create_directories(out_dir);
  sig::save_corpus(corpus, fs::path(out_dir) / "corpus.jsonl");
  write_run_manifest(out_dir, "synth",
                     {{"novels", novels}, {"quotes_per_novel", quotes}, {"seed", seed}}, {});
  std::cout << "wrote " << corpus.quotation_count() << " quotations across "
            << corpus.novels.size() << " novels to " << out_dir << "/corpus.jsonl\n";
  return 0;
}

int cmd_ingest(const std::string& format, const std::string& in_path, const std::string& out_dir,
               const std::string& wp_novel_id) {
  sig::IngestResult result;
  if (format == "pdnc") {
    result = sig::parse_pdnc(in_path);
  } else if (format == "wp") {
    result = sig::parse_wp(in_path, wp_novel_id);
  } else if (format == "normalized") {
    result = sig::load_corpus(in_path);
  } else {
    throw sig::Error("unknown ingest format '" + format + "'");
  }
  fs::create_directories(out_dir);
  sig::save_corpus(result.corpus, fs::path(out_dir) / "corpus.jsonl");
  sig::save_rejects(result.rejects, fs::path(out_dir) / "rejects.jsonl");
  write_run_manifest(out_dir, "ingest", {{"format", format}, {"in", in_path}},
                     {fs::path(in_path)});
  std::size_t dropped = 0, warnings = 0;
  for (const auto& r : result.rejects) (r.kind == "record" ? dropped : warnings)++;
  std::cout << "ingested " << result.corpus.quotation_count() << " quotations across "
            << result.corpus.novels.size() << " novels (" << dropped << " records rejected, "
            << warnings << " warnings)\n";
  return 0;
}

int cmd_split(const std::string& corpus_path, const std::string& out_dir,
              const std::string& protocol, int folds, int test_novels, std::uint64_t seed,
              int min_speaker_quotes) {
  sig::NovelCorpus corpus = load_corpus_or_die(corpus_path);
  if (min_speaker_quotes > 1) {
    corpus = sig::filter_minor_speakers(corpus, min_speaker_quotes);
  }
  std::vector<sig::SplitSpec> splits;
  if (protocol == "cross") {
    splits = sig::make_cross_domain_splits(corpus, folds, test_novels, seed);
  } else if (protocol == "indomain") {
    splits = {sig::make_in_domain_split(corpus)};
  } else {
    throw sig::Error("unknown split protocol '" + protocol + "'");
  }
  fs::create_directories(out_dir);
  sig::save_splits(splits, fs::path(out_dir) / "splits.jsonl");

  ordered_json stats = ordered_json::array();
  for (const auto& split : splits) {
    sig::StatsReport report = sig::corpus_stats(corpus, &split);
    ordered_json j;
    j["fold"] = split.fold_index;
    j["name"] = split.name;
    for (const auto& [side, data] : report.sides) j[side] = stats_side_json(data);
    stats.push_back(std::move(j));
  }
  {
    std::ofstream out(fs::path(out_dir) / "stats.json", std::ios::binary);
    out << stats.dump(2) << '\n';
  }
  write_run_manifest(out_dir, "split",
                     {{"protocol", protocol},
                      {"folds", folds},
                      {"test-novels", test_novels},
                      {"seed", seed},
                      {"min-speaker-quotes", min_speaker_quotes}},
                     {fs::path(corpus_path)});
  for (const auto& split : splits) {
    std::cout << split.name << " fold " << split.fold_index << ": train "
              << split.train_ids.size() << " quotes / " << split.train_novels().size()
              << " novels, test " << split.test_ids.size() << " quotes / "
              << split.test_novels().size() << " novels\n";
  }
  return 0;
}

int cmd_train(const std::string& corpus_path, const std::string& split_path, int fold,
              const std::string& template_name, const std::string& backend_id, int epochs,
              int batch_size, double lr, std::size_t budget, std::uint64_t seed,
              const std::string& out_dir, bool resume, std::size_t emb_dim, std::size_t hidden) {
  if (backend_id != "tiny") {
    throw sig::Error("backend '" + backend_id + "' is not trainable; use --backend tiny");
  }
  sig::NovelCorpus corpus = load_corpus_or_die(corpus_path);
  auto splits = sig::load_splits(split_path);
  const sig::SplitSpec& split = pick_fold(splits, fold);

  std::unique_ptr<sig::TinySeq2Seq> backend;
  if (resume) {
    backend = sig::TinySeq2Seq::load(out_dir);
  } else {
    sig::TinyBackendConfig cfg;
    cfg.emb_dim = emb_dim;
    cfg.hidden = hidden;
    cfg.learning_rate = lr;
    cfg.seed = seed;
    cfg.max_source_tokens = budget;
    backend = std::make_unique<sig::TinySeq2Seq>(cfg);
  }

  sig::TrainingConfig config;
  config.template_name = template_name;
  config.epochs = epochs;
  config.batch_size = batch_size;
  config.learning_rate = lr;
  config.max_source_tokens = budget;
  config.seed = seed;
  config.checkpoint_dir = out_dir;

  sig::TrainResult result = sig::train(corpus, split, config, *backend, resume);
  write_run_manifest(out_dir, "train",
                     {{"template", template_name},
                      {"backend", backend_id},
                      {"fold", fold},
                      {"epochs", epochs},
                      {"batch-size", batch_size},
                      {"lr", lr},
                      {"budget", budget},
                      {"seed", seed},
                      {"resume", resume}},
                     {fs::path(corpus_path), fs::path(split_path)});
  std::cout << "trained " << result.epoch_losses.size() << " epochs; loss "
            << (result.epoch_losses.empty() ? 0.0 : result.epoch_losses.front()) << " -> "
            << (result.epoch_losses.empty() ? 0.0 : result.epoch_losses.back())
            << "; checkpoint at " << out_dir << "\n";
  return 0;
}

int cmd_predict(const std::string& corpus_path, const std::string& split_path, int fold,
                const std::string& checkpoint, const std::string& mode, const std::string& out_file,
                const std::string& score_space, const std::string& score_aliases,
                const std::string& strategy, int beam_width, std::size_t max_length) {
  sig::NovelCorpus corpus = load_corpus_or_die(corpus_path);
  auto splits = sig::load_splits(split_path);
  const sig::SplitSpec& split = pick_fold(splits, fold);
  auto backend = sig::TinySeq2Seq::load(checkpoint);
  auto manifest = sig::load_manifest(checkpoint);
  sig::PromptTemplate t = sig::find_template(manifest.at("template").get<std::string>());

  fs::create_directories(fs::path(out_file).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(out_file).parent_path());
  if (mode == "sig") {
    sig::ScoreOptions options;
    if (score_space == "logprob") {
      options.space = sig::ScoreSpace::LogProb;
    } else if (score_space != "prob") {
      throw sig::Error("unknown score space '" + score_space + "'");
    }
    if (score_aliases == "max") {
      options.aliases = sig::AliasScoring::Max;
    } else if (score_aliases != "canonical") {
      throw sig::Error("unknown alias scoring '" + score_aliases + "'");
    }
    std::vector<sig::RankedPrediction> preds;
    for (const auto& key : split.test_ids) {
      const sig::QuotationInstance* inst = corpus.find_quotation(key);
      if (!inst) throw sig::Error("split references unknown quotation '" + key.quote_id + "'");
      preds.push_back(sig::classify_by_generation(*inst, corpus.novel(key.novel_id).roster, t,
                                                  *backend, 0, options));
    }
    sig::save_predictions(preds, out_file);
    std::cout << "wrote " << preds.size() << " sig predictions to " << out_file << "\n";
  } else if (mode == "sig_d") {
    sig::GenerationOptions options;
    options.max_length = max_length;
    if (strategy == "beam") {
      options.strategy = sig::DecodeStrategy::Beam;
      options.beam_width = beam_width;
    } else if (strategy != "greedy") {
      throw sig::Error("unknown decode strategy '" + strategy + "'");
    }
    std::vector<sig::ParsedPrediction> preds;
    for (const auto& key : split.test_ids) {
      const sig::QuotationInstance* inst = corpus.find_quotation(key);
      if (!inst) throw sig::Error("split references unknown quotation '" + key.quote_id + "'");
      preds.push_back(sig::direct_generate_speaker(*inst, corpus.novel(key.novel_id).roster, t,
                                                   *backend, 0, options));
    }
    sig::save_predictions(preds, out_file);
    std::cout << "wrote " << preds.size() << " sig_d predictions to " << out_file << "\n";
  } else {
    throw sig::Error("unknown mode '" + mode + "' (use sig or sig_d)");
  }
  write_run_manifest(fs::path(out_file), "predict",
                     {{"mode", mode},
                      {"fold", fold},
                      {"checkpoint", checkpoint},
                      {"score-space", score_space},
                      {"score-aliases", score_aliases},
                      {"strategy", strategy}},
                     {fs::path(corpus_path), fs::path(split_path),
                      fs::path(checkpoint) / "weights.bin"});
  return 0;
}

int cmd_evaluate(const std::string& corpus_path, const std::string& split_path,
                 const std::vector<std::string>& prediction_files, const std::string& out_dir) {
  sig::NovelCorpus corpus = load_corpus_or_die(corpus_path);
  auto splits = sig::load_splits(split_path);

  std::vector<sig::EvalReport> reports;
  for (const auto& file : prediction_files) {
    sig::PredictionFile preds = sig::load_predictions(file);
    std::set<sig::QuoteKey> covered;
    if (preds.is_sig()) {
      for (const auto& p : preds.ranked) covered.insert({p.novel_id, p.quote_id});
    } else {
      for (const auto& p : preds.parsed) covered.insert({p.novel_id, p.quote_id});
    }
    const sig::SplitSpec* matched = nullptr;
    for (const auto& s : splits) {
      if (s.test_ids == covered) {
        matched = &s;
        break;
      }
    }
    if (!matched) {
      throw sig::Error("predictions file '" + file +
                       "' does not cover the test set of any fold in '" + split_path + "'");
    }
    reports.push_back(preds.is_sig() ? sig::evaluate_predictions(preds.ranked, corpus, *matched)
                                     : sig::evaluate_predictions(preds.parsed, corpus, *matched));
  }
  std::sort(reports.begin(), reports.end(),
            [](const sig::EvalReport& a, const sig::EvalReport& b) {
              return a.fold_index < b.fold_index;
            });
  sig::AggregateReport aggregate = sig::aggregate_folds(reports);
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "report.json", std::ios::binary);
    out << sig::to_json(aggregate).dump(2) << '\n';
  }
  std::vector<fs::path> inputs{fs::path(corpus_path), fs::path(split_path)};
  for (const auto& f : prediction_files) inputs.emplace_back(f);
  write_run_manifest(out_dir, "evaluate", {{"predictions", prediction_files}}, inputs);
  std::cout << sig::format_table(aggregate);
  return 0;
}

int cmd_encoder_train(const std::string& corpus_path, const std::string& split_path, int fold,
                      const std::string& template_name, int epochs, int batch_size, double lr,
                      std::uint64_t seed, std::size_t budget, const std::string& out_dir,
                      std::size_t emb_dim, std::size_t hidden) {
  sig::NovelCorpus corpus = load_corpus_or_die(corpus_path);
  auto splits = sig::load_splits(split_path);
  const sig::SplitSpec& split = pick_fold(splits, fold);

  sig::EncoderConfig cfg;
  cfg.template_name = template_name;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.learning_rate = lr;
  cfg.seed = seed;
  cfg.max_source_tokens = budget;
  cfg.emb_dim = emb_dim;
  cfg.hidden = hidden;
  cfg.checkpoint_dir = out_dir;

  sig::EncoderClassifier model(cfg);
  std::vector<double> losses = model.train(corpus, split);
  model.save(out_dir);
  {
    ordered_json manifest;
    manifest["backend"] = "encoder";
    manifest["template"] = template_name;
    manifest["seed"] = seed;
    manifest["epochs"] = losses.size();
    manifest["epoch_losses"] = losses;
    manifest["labels"] = model.label_space().labels.size();
    std::ofstream out(fs::path(out_dir) / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << '\n';
  }
  write_run_manifest(out_dir, "encoder-train",
                     {{"template", template_name}, {"fold", fold}, {"epochs", epochs}},
                     {fs::path(corpus_path), fs::path(split_path)});
  std::cout << "trained encoder baseline over " << model.label_space().labels.size()
            << " labels; loss " << (losses.empty() ? 0.0 : losses.front()) << " -> "
            << (losses.empty() ? 0.0 : losses.back()) << "\n";
  return 0;
}

int cmd_encoder_predict(const std::string& corpus_path, const std::string& split_path, int fold,
                        const std::string& checkpoint, const std::string& out_file) {
  sig::NovelCorpus corpus = load_corpus_or_die(corpus_path);
  auto splits = sig::load_splits(split_path);
  const sig::SplitSpec& split = pick_fold(splits, fold);
  auto model = sig::EncoderClassifier::load(checkpoint);
  std::vector<sig::RankedPrediction> preds;
  for (const auto& key : split.test_ids) {
    const sig::QuotationInstance* inst = corpus.find_quotation(key);
    if (!inst) throw sig::Error("split references unknown quotation '" + key.quote_id + "'");
    preds.push_back(model->to_ranked_prediction(*inst));
  }
  sig::save_predictions(preds, out_file);
  write_run_manifest(fs::path(out_file), "encoder-predict",
                     {{"fold", fold}, {"checkpoint", checkpoint}},
                     {fs::path(corpus_path), fs::path(split_path)});
  std::cout << "wrote " << preds.size() << " encoder predictions to " << out_file << "\n";
  return 0;
}

int cmd_llm(const std::string& corpus_path, const std::string& split_path, int fold,
            const std::string& client_kind, const std::string& stub_fixture,
            const std::string& base_url, const std::string& model, const std::string& style_name,
            const std::string& cache_dir, const std::string& out_dir, int max_retries,
            int max_in_flight) {
  sig::NovelCorpus corpus = load_corpus_or_die(corpus_path);
  auto splits = sig::load_splits(split_path);
  const sig::SplitSpec& split = pick_fold(splits, fold);

  std::unique_ptr<sig::LlmClient> client;
  if (client_kind == "stub") {
    if (stub_fixture.empty()) throw sig::Error("--client stub requires --stub-fixture");
    client = std::make_unique<sig::StubLlmClient>(sig::StubLlmClient::from_fixture(stub_fixture));
  } else if (client_kind == "http") {
    if (base_url.empty() || model.empty()) {
      throw sig::Error("--client http requires --base-url and --model");
    }
    client = std::make_unique<sig::HttpLlmClient>(base_url, model);
  } else {
    throw sig::Error("unknown client '" + client_kind + "' (use stub or http)");
  }

  sig::ZeroShotOptions options;
  options.style = style_name == "plain" ? sig::PromptStyle::Plain
                                        : sig::PromptStyle::ChainOfThought;
  options.max_retries = max_retries;
  std::unique_ptr<sig::ResponseCache> cache;
  if (!cache_dir.empty()) cache = std::make_unique<sig::ResponseCache>(cache_dir);

  std::vector<sig::QuoteKey> keys(split.test_ids.begin(), split.test_ids.end());
  std::vector<sig::ZeroShotResult> results(keys.size());
  {
    std::mutex client_mutex;
    std::size_t next = 0;
    std::mutex next_mutex;
    auto worker = [&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard<std::mutex> lock(next_mutex);
          if (next >= keys.size()) return;
          i = next++;
        }
        const sig::QuotationInstance* inst = corpus.find_quotation(keys[i]);
        const sig::CharacterRoster& roster = corpus.novel(keys[i].novel_id).roster;
        std::lock_guard<std::mutex> lock(client_mutex);  // one request at a time per client
        results[i] = sig::llm_zero_shot(*inst, roster, *client, options, cache.get());
      }
    };
    int n_threads = std::max(1, max_in_flight);
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "responses.jsonl", std::ios::binary);
    for (const auto& r : results) {
      ordered_json j;
      j["novel_id"] = r.key.novel_id;
      j["quote_id"] = r.key.quote_id;
      j["prompt_hash"] = r.prompt_hash;
      j["response"] = r.response;
      j["from_cache"] = r.from_cache;
      out << j.dump() << '\n';
    }
  }

  sig::EvalReport report;
  report.split_name = split.name;
  report.fold_index = split.fold_index;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const sig::QuotationInstance* inst = corpus.find_quotation(keys[i]);
    const sig::CharacterEntry* gold = corpus.novel(keys[i].novel_id).roster.find(inst->speaker_id);
    bool correct = gold && sig::lenient_match(results[i].response, *gold);
    switch (inst->quote_type) {
      case sig::QuoteType::Explicit:
        report.explicit_cell.add(correct);
        break;
      case sig::QuoteType::Anaphoric:
        report.anaphoric_cell.add(correct);
        report.non_explicit.add(correct);
        break;
      case sig::QuoteType::Implicit:
        report.implicit_cell.add(correct);
        report.non_explicit.add(correct);
        break;
    }
    report.overall.add(correct);
  }
  {
    std::ofstream out(fs::path(out_dir) / "lenient_report.json", std::ios::binary);
    out << sig::to_json(report).dump(2) << '\n';
  }
  write_run_manifest(out_dir, "llm",
                     {{"client", client_kind}, {"style", style_name}, {"fold", fold}},
                     {fs::path(corpus_path), fs::path(split_path)});
  std::printf("lenient accuracy: total %.4f, non-explicit %.4f (%zu responses)\n",
              report.overall.accuracy(), report.non_explicit.accuracy(), keys.size());
  return 0;
}

int cmd_viz(const std::string& corpus_path, const std::string& predictions_path,
            const std::string& checkpoint, const std::string& out_dir, double perplexity,
            int iterations, std::uint64_t seed) {
  sig::NovelCorpus corpus = load_corpus_or_die(corpus_path);
  sig::PredictionFile preds = sig::load_predictions(predictions_path);
  std::vector<sig::QuoteKey> keys;
  if (preds.is_sig()) {
    for (const auto& p : preds.ranked) keys.push_back({p.novel_id, p.quote_id});
  } else {
    for (const auto& p : preds.parsed) keys.push_back({p.novel_id, p.quote_id});
  }
  auto backend = sig::TinySeq2Seq::load(checkpoint);
  auto manifest = sig::load_manifest(checkpoint);
  sig::PromptTemplate t = sig::find_template(manifest.at("template").get<std::string>());

  auto embeddings = sig::extract_speaker_embeddings(corpus, keys, t, *backend);
  std::vector<std::vector<double>> vectors;
  vectors.reserve(embeddings.size());
  for (const auto& e : embeddings) vectors.push_back(e.vec);

  sig::TsneOptions options;
  options.perplexity = perplexity;
  options.iterations = iterations;
  options.seed = seed;
  auto coords = sig::tsne_2d(vectors, options);

  fs::create_directories(out_dir);
  sig::write_coords_tsv(embeddings, coords, fs::path(out_dir) / "coords.tsv");
  sig::write_scatter_svg(embeddings, coords, fs::path(out_dir) / "scatter.svg");
  write_run_manifest(out_dir, "viz",
                     {{"perplexity", perplexity}, {"iterations", iterations}, {"seed", seed}},
                     {fs::path(corpus_path), fs::path(predictions_path),
                      fs::path(checkpoint) / "weights.bin"});
  std::cout << "wrote " << coords.size() << " points to " << out_dir << "/coords.tsv and "
            << out_dir << "/scatter.svg\n";
  return 0;
}

int cmd_templates() {
  std::printf("%-26s %-14s %-6s %-12s %s\n", "name", "source_infix", "mask", "target_prefix",
              "aux");
  for (const auto& t : sig::template_catalog()) {
    std::string aux = sig::to_string(t.aux_task);
    if (t.aux_task != sig::AuxTask::None) {
      aux += " (\"" + t.aux_source_infix + "\" / \"" + t.aux_target_prefix + "\")";
    }
    std::printf("%-26s %-14s %-6s %-12s %s%s\n", t.name.c_str(), t.source_infix.c_str(),
                t.use_mask ? "yes" : "no", t.target_prefix.c_str(), aux.c_str(),
                t.name == sig::default_template_name() ? "  [default]" : "");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sig - speaker attribution for literary quotations"};
  app.require_subcommand(1);

  int exit_code = 0;
  auto run = [&exit_code](std::function<int()> fn) {
    return [fn = std::move(fn), &exit_code]() { exit_code = fn(); };
  };

  // ---- synth ----
  {
    auto* cmd = app.add_subcommand("synth", "generate a synthetic cue-pattern demo corpus");
    auto opts = std::make_shared<std::tuple<std::string, int, int, std::uint64_t, std::string>>(
        "", 10, 60, std::uint64_t{7}, "");
    cmd->add_option("--out", std::get<0>(*opts), "output directory")->required();
    cmd->add_option("--novels", std::get<1>(*opts), "number of novels");
    cmd->add_option("--quotes-per-novel", std::get<2>(*opts), "quotations per novel");
    cmd->add_option("--seed", std::get<3>(*opts), "generator seed");
    cmd->add_option("--config", std::get<4>(*opts), "JSON config overriding flags");
    cmd->callback(run([opts]() {
      ConfigBinder binder;
      binder.bind("out", std::get<0>(*opts));
      binder.bind("novels", std::get<1>(*opts));
      binder.bind("quotes-per-novel", std::get<2>(*opts));
      binder.bind("seed", std::get<3>(*opts));
      binder.apply(std::get<4>(*opts));
      return cmd_synth(std::get<0>(*opts), std::get<1>(*opts), std::get<2>(*opts),
                       std::get<3>(*opts));
    }));
  }

  // ---- ingest ----
  {
    auto* cmd = app.add_subcommand("ingest", "parse a source corpus into the normalized format");
    auto opts = std::make_shared<std::array<std::string, 5>>();
    (*opts)[3] = "WP";
    cmd->add_option("--format", (*opts)[0], "pdnc | wp | normalized")->required();
    cmd->add_option("--in", (*opts)[1], "source directory or file")->required();
    cmd->add_option("--out", (*opts)[2], "output directory")->required();
    cmd->add_option("--wp-novel-id", (*opts)[3], "novel id for WP-style input");
    cmd->add_option("--config", (*opts)[4], "JSON config overriding flags");
    cmd->callback(run([opts]() {
      ConfigBinder binder;
      binder.bind("format", (*opts)[0]);
      binder.bind("in", (*opts)[1]);
      binder.bind("out", (*opts)[2]);
      binder.bind("wp-novel-id", (*opts)[3]);
      binder.apply((*opts)[4]);
      return cmd_ingest((*opts)[0], (*opts)[1], (*opts)[2], (*opts)[3]);
    }));
  }

  // ---- split ----
  {
    auto* cmd = app.add_subcommand("split", "build evaluation splits and corpus statistics");
    struct SplitArgs {
      std::string corpus, out, protocol = "cross", config;
      int folds = 5, test_novels = 4, min_quotes = 1;
      std::uint64_t seed = 1;
    };
    auto a = std::make_shared<SplitArgs>();
    cmd->add_option("--corpus", a->corpus, "normalized corpus file")->required();
    cmd->add_option("--out", a->out, "output directory")->required();
    cmd->add_option("--protocol", a->protocol, "cross | indomain");
    cmd->add_option("--folds", a->folds, "number of cross-domain folds");
    cmd->add_option("--test-novels", a->test_novels, "held-out novels per fold");
    cmd->add_option("--seed", a->seed, "shuffle seed");
    cmd->add_option("--min-speaker-quotes", a->min_quotes,
                    "minor-speaker filter threshold (1 = off)");
    cmd->add_option("--config", a->config, "JSON config overriding flags");
    cmd->callback(run([a]() {
      ConfigBinder binder;
      binder.bind("corpus", a->corpus);
      binder.bind("out", a->out);
      binder.bind("protocol", a->protocol);
      binder.bind("folds", a->folds);
      binder.bind("test-novels", a->test_novels);
      binder.bind("seed", a->seed);
      binder.bind("min-speaker-quotes", a->min_quotes);
      binder.apply(a->config);
      return cmd_split(a->corpus, a->out, a->protocol, a->folds, a->test_novels, a->seed,
                       a->min_quotes);
    }));
  }

  // ---- train ----
  {
    auto* cmd = app.add_subcommand("train", "fine-tune a backend on a split's train side");
    struct TrainArgs {
      std::string corpus, split, tmpl = sig::default_template_name(), backend = "tiny", out,
                  config;
      int fold = 0, epochs = 30, batch_size = 16;
      double lr = 3e-3;
      std::size_t budget = 160, emb_dim = 48, hidden = 64;
      std::uint64_t seed = 1;
      bool resume = false;
    };
    auto a = std::make_shared<TrainArgs>();
    cmd->add_option("--corpus", a->corpus, "normalized corpus file")->required();
    cmd->add_option("--split", a->split, "splits file")->required();
    cmd->add_option("--fold", a->fold, "fold index");
    cmd->add_option("--template", a->tmpl, "prompt template name");
    cmd->add_option("--backend", a->backend, "backend id (tiny)");
    cmd->add_option("--epochs", a->epochs, "training epochs");
    cmd->add_option("--batch-size", a->batch_size, "batch size");
    cmd->add_option("--lr", a->lr, "learning rate");
    cmd->add_option("--budget", a->budget, "max source tokens");
    cmd->add_option("--seed", a->seed, "training seed");
    cmd->add_option("--emb-dim", a->emb_dim, "embedding width");
    cmd->add_option("--hidden", a->hidden, "hidden width");
    cmd->add_option("--out", a->out, "checkpoint directory")->required();
    cmd->add_flag("--resume", a->resume, "continue training from --out");
    cmd->add_option("--config", a->config, "JSON config overriding flags");
    cmd->callback(run([a]() {
      ConfigBinder binder;
      binder.bind("corpus", a->corpus);
      binder.bind("split", a->split);
      binder.bind("fold", a->fold);
      binder.bind("template", a->tmpl);
      binder.bind("backend", a->backend);
      binder.bind("epochs", a->epochs);
      binder.bind("batch-size", a->batch_size);
      binder.bind("lr", a->lr);
      binder.bind("budget", a->budget);
      binder.bind("seed", a->seed);
      binder.bind("emb-dim", a->emb_dim);
      binder.bind("hidden", a->hidden);
      binder.bind("out", a->out);
      binder.bind("resume", a->resume);
      binder.apply(a->config);
      return cmd_train(a->corpus, a->split, a->fold, a->tmpl, a->backend, a->epochs,
                       a->batch_size, a->lr, a->budget, a->seed, a->out, a->resume, a->emb_dim,
                       a->hidden);
    }));
  }

  // ---- predict ----
  {
    auto* cmd = app.add_subcommand("predict", "run inference over a fold's test side");
    struct PredictArgs {
      std::string corpus, split, checkpoint, mode = "sig", out, config;
      std::string score_space = "prob", score_aliases = "canonical", strategy = "greedy";
      int fold = 0, beam_width = 4;
      std::size_t max_length = 32;
    };
    auto a = std::make_shared<PredictArgs>();
    cmd->add_option("--corpus", a->corpus, "normalized corpus file")->required();
    cmd->add_option("--split", a->split, "splits file")->required();
    cmd->add_option("--fold", a->fold, "fold index");
    cmd->add_option("--checkpoint", a->checkpoint, "trained checkpoint directory")->required();
    cmd->add_option("--mode", a->mode, "sig | sig_d");
    cmd->add_option("--out", a->out, "predictions output file")->required();
    cmd->add_option("--score-space", a->score_space, "prob | logprob");
    cmd->add_option("--score-aliases", a->score_aliases, "canonical | max");
    cmd->add_option("--strategy", a->strategy, "greedy | beam (sig_d)");
    cmd->add_option("--beam-width", a->beam_width, "beam width when --strategy beam");
    cmd->add_option("--max-length", a->max_length, "max generated tokens (sig_d)");
    cmd->add_option("--config", a->config, "JSON config overriding flags");
    cmd->callback(run([a]() {
      ConfigBinder binder;
      binder.bind("corpus", a->corpus);
      binder.bind("split", a->split);
      binder.bind("fold", a->fold);
      binder.bind("checkpoint", a->checkpoint);
      binder.bind("mode", a->mode);
      binder.bind("out", a->out);
      binder.bind("score-space", a->score_space);
      binder.bind("score-aliases", a->score_aliases);
      binder.bind("strategy", a->strategy);
      binder.bind("beam-width", a->beam_width);
      binder.bind("max-length", a->max_length);
      binder.apply(a->config);
      return cmd_predict(a->corpus, a->split, a->fold, a->checkpoint, a->mode, a->out,
                         a->score_space, a->score_aliases, a->strategy, a->beam_width,
                         a->max_length);
    }));
  }

  // ---- evaluate ----
  {
    auto* cmd = app.add_subcommand("evaluate", "score prediction files and aggregate folds");
    struct EvalArgs {
      std::string corpus, split, out, config;
      std::vector<std::string> predictions;
    };
    auto a = std::make_shared<EvalArgs>();
    cmd->add_option("--corpus", a->corpus, "normalized corpus file")->required();
    cmd->add_option("--split", a->split, "splits file")->required();
    cmd->add_option("--predictions", a->predictions, "prediction files, one per fold")
        ->required()
        ->expected(-1);
    cmd->add_option("--out", a->out, "report output directory")->required();
    cmd->add_option("--config", a->config, "JSON config overriding flags");
    cmd->callback(run([a]() {
      ConfigBinder binder;
      binder.bind("corpus", a->corpus);
      binder.bind("split", a->split);
      binder.bind("predictions", a->predictions);
      binder.bind("out", a->out);
      binder.apply(a->config);
      return cmd_evaluate(a->corpus, a->split, a->predictions, a->out);
    }));
  }

  // ---- encoder-train ----
  {
    auto* cmd = app.add_subcommand("encoder-train", "train the encoder classifier baseline");
    struct EncArgs {
      std::string corpus, split, tmpl = sig::default_template_name(), out, config;
      int fold = 0, epochs = 20, batch_size = 16;
      double lr = 3e-3;
      std::uint64_t seed = 1;
      std::size_t budget = 160, emb_dim = 48, hidden = 64;
    };
    auto a = std::make_shared<EncArgs>();
    cmd->add_option("--corpus", a->corpus, "normalized corpus file")->required();
    cmd->add_option("--split", a->split, "splits file (in-domain)")->required();
    cmd->add_option("--fold", a->fold, "fold index");
    cmd->add_option("--template", a->tmpl, "prompt template name");
    cmd->add_option("--epochs", a->epochs, "training epochs");
    cmd->add_option("--batch-size", a->batch_size, "batch size");
    cmd->add_option("--lr", a->lr, "learning rate");
    cmd->add_option("--seed", a->seed, "training seed");
    cmd->add_option("--budget", a->budget, "max source tokens");
    cmd->add_option("--emb-dim", a->emb_dim, "embedding width");
    cmd->add_option("--hidden", a->hidden, "hidden width");
    cmd->add_option("--out", a->out, "checkpoint directory")->required();
    cmd->add_option("--config", a->config, "JSON config overriding flags");
    cmd->callback(run([a]() {
      ConfigBinder binder;
      binder.bind("corpus", a->corpus);
      binder.bind("split", a->split);
      binder.bind("fold", a->fold);
      binder.bind("template", a->tmpl);
      binder.bind("epochs", a->epochs);
      binder.bind("batch-size", a->batch_size);
      binder.bind("lr", a->lr);
      binder.bind("seed", a->seed);
      binder.bind("budget", a->budget);
      binder.bind("emb-dim", a->emb_dim);
      binder.bind("hidden", a->hidden);
      binder.bind("out", a->out);
      binder.apply(a->config);
      return cmd_encoder_train(a->corpus, a->split, a->fold, a->tmpl, a->epochs, a->batch_size,
                               a->lr, a->seed, a->budget, a->out, a->emb_dim, a->hidden);
    }));
  }

  // ---- encoder-predict ----
  {
    auto* cmd = app.add_subcommand("encoder-predict", "rank label space for a fold's test side");
    struct EncPredArgs {
      std::string corpus, split, checkpoint, out, config;
      int fold = 0;
    };
    auto a = std::make_shared<EncPredArgs>();
    cmd->add_option("--corpus", a->corpus, "normalized corpus file")->required();
    cmd->add_option("--split", a->split, "splits file")->required();
    cmd->add_option("--fold", a->fold, "fold index");
    cmd->add_option("--checkpoint", a->checkpoint, "encoder checkpoint directory")->required();
    cmd->add_option("--out", a->out, "predictions output file")->required();
    cmd->add_option("--config", a->config, "JSON config overriding flags");
    cmd->callback(run([a]() {
      ConfigBinder binder;
      binder.bind("corpus", a->corpus);
      binder.bind("split", a->split);
      binder.bind("fold", a->fold);
      binder.bind("checkpoint", a->checkpoint);
      binder.bind("out", a->out);
      binder.apply(a->config);
      return cmd_encoder_predict(a->corpus, a->split, a->fold, a->checkpoint, a->out);
    }));
  }

  // ---- llm ----
  {
    auto* cmd = app.add_subcommand("llm", "zero-shot instruction-model run with lenient scoring");
    struct LlmArgs {
      std::string corpus, split, client = "stub", stub_fixture, base_url, model,
                  style = "cot", cache, out, config;
      int fold = 0, max_retries = 3, max_in_flight = 1;
    };
    auto a = std::make_shared<LlmArgs>();
    cmd->add_option("--corpus", a->corpus, "normalized corpus file")->required();
    cmd->add_option("--split", a->split, "splits file")->required();
    cmd->add_option("--fold", a->fold, "fold index");
    cmd->add_option("--client", a->client, "stub | http");
    cmd->add_option("--stub-fixture", a->stub_fixture, "canned responses for the stub client");
    cmd->add_option("--base-url", a->base_url, "http client base URL");
    cmd->add_option("--model", a->model, "remote model name");
    cmd->add_option("--style", a->style, "plain | cot");
    cmd->add_option("--cache", a->cache, "response cache directory");
    cmd->add_option("--out", a->out, "output directory")->required();
    cmd->add_option("--max-retries", a->max_retries, "transport retries with backoff");
    cmd->add_option("--max-in-flight", a->max_in_flight, "bounded request parallelism");
    cmd->add_option("--config", a->config, "JSON config overriding flags");
    cmd->callback(run([a]() {
      ConfigBinder binder;
      binder.bind("corpus", a->corpus);
      binder.bind("split", a->split);
      binder.bind("fold", a->fold);
      binder.bind("client", a->client);
      binder.bind("stub-fixture", a->stub_fixture);
      binder.bind("base-url", a->base_url);
      binder.bind("model", a->model);
      binder.bind("style", a->style);
      binder.bind("cache", a->cache);
      binder.bind("out", a->out);
      binder.bind("max-retries", a->max_retries);
      binder.bind("max-in-flight", a->max_in_flight);
      binder.apply(a->config);
      return cmd_llm(a->corpus, a->split, a->fold, a->client, a->stub_fixture, a->base_url,
                     a->model, a->style, a->cache, a->out, a->max_retries, a->max_in_flight);
    }));
  }

  // ---- viz ----
  {
    auto* cmd = app.add_subcommand("viz", "t-SNE scatter of speaker-name decoder embeddings");
    struct VizArgs {
      std::string corpus, predictions, checkpoint, out, config;
      double perplexity = 30.0;
      int iterations = 500;
      std::uint64_t seed = 0;
    };
    auto a = std::make_shared<VizArgs>();
    cmd->add_option("--corpus", a->corpus, "normalized corpus file")->required();
    cmd->add_option("--predictions", a->predictions, "prediction file naming the quotations")
        ->required();
    cmd->add_option("--checkpoint", a->checkpoint, "trained checkpoint directory")->required();
    cmd->add_option("--out", a->out, "output directory")->required();
    cmd->add_option("--perplexity", a->perplexity, "t-SNE perplexity");
    cmd->add_option("--iterations", a->iterations, "t-SNE iterations");
    cmd->add_option("--seed", a->seed, "t-SNE seed");
    cmd->add_option("--config", a->config, "JSON config overriding flags");
    cmd->callback(run([a]() {
      ConfigBinder binder;
      binder.bind("corpus", a->corpus);
      binder.bind("predictions", a->predictions);
      binder.bind("checkpoint", a->checkpoint);
      binder.bind("out", a->out);
      binder.bind("perplexity", a->perplexity);
      binder.bind("iterations", a->iterations);
      binder.bind("seed", a->seed);
      binder.apply(a->config);
      return cmd_viz(a->corpus, a->predictions, a->checkpoint, a->out, a->perplexity,
                     a->iterations, a->seed);
    }));
  }

  // ---- templates ----
  {
    auto* cmd = app.add_subcommand("templates", "list the prompt-template catalog");
    cmd->callback(run([]() { return cmd_templates(); }));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
