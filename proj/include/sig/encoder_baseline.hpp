#pragma once

// Encoder-only classification baseline: the same rendered source template as
// SIG, a bidirectional GRU encoder, and a linear layer with softmax over the
// fixed label space of speakers observed in training. Pooling reads the
// hidden state at the mask position, falling back to the sequence start when
// the template has no mask. In-domain only: the label space cannot cover
// speakers unseen during training.

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "sig/corpus.hpp"
#include "sig/inference.hpp"
#include "sig/nn.hpp"
#include "sig/splits.hpp"
#include "sig/templates.hpp"
#include "sig/tiny_backend.hpp"

namespace sig {

struct SpeakerKey {
  std::string novel_id;
  std::string character_id;
  auto operator<=>(const SpeakerKey&) const = default;
};

struct LabelSpace {
  std::vector<SpeakerKey> labels;  // index order is the save/load-stable order
  std::map<SpeakerKey, int> index;

  static LabelSpace from_training_side(const NovelCorpus& corpus, const SplitSpec& split) {
    LabelSpace out;
    std::set<SpeakerKey> seen;
    for (const auto& key : split.train_ids) {
      const QuotationInstance* inst = corpus.find_quotation(key);
      if (!inst) {
        throw Error("split references unknown quotation '" + key.novel_id + "/" + key.quote_id +
                    "'");
      }
      seen.insert({key.novel_id, inst->speaker_id});
    }
    for (const auto& k : seen) {
      out.index.emplace(k, static_cast<int>(out.labels.size()));
      out.labels.push_back(k);
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& l : labels) {
      j.push_back({{"novel_id", l.novel_id}, {"character_id", l.character_id}});
    }
    return j;
  }
  void from_json(const nlohmann::json& j) {
    labels.clear();
    index.clear();
    for (const auto& o : j) {
      SpeakerKey k{o.at("novel_id").get<std::string>(), o.at("character_id").get<std::string>()};
      index.emplace(k, static_cast<int>(labels.size()));
      labels.push_back(std::move(k));
    }
  }
};

struct EncoderConfig {
  std::string template_name = default_template_name();
  int epochs = 20;
  int batch_size = 16;
  double learning_rate = 3e-3;
  double grad_clip = 5.0;
  std::size_t emb_dim = 48;
  std::size_t hidden = 64;
  std::size_t max_source_tokens = 160;
  std::uint64_t seed = 1;
  std::filesystem::path checkpoint_dir;

  void validate() const {
    if (epochs < 1) throw Error("encoder config: epochs must be >= 1");
    if (batch_size < 1) throw Error("encoder config: batch_size must be >= 1");
  }
};

class EncoderClassifier {
 public:
  explicit EncoderClassifier(EncoderConfig cfg = {}) : cfg_(std::move(cfg)) {
    adam_.lr = cfg_.learning_rate;
    adam_.clip = cfg_.grad_clip;
  }

  const EncoderConfig& config() const { return cfg_; }
  const LabelSpace& label_space() const { return labels_; }
  const WordTokenizer& word_tokenizer() const { return tok_; }
  bool initialized() const { return initialized_; }

  // Trains on the split's train side. Throws when a test-side gold speaker
  // falls outside the training label space (a cross-domain split).
  std::vector<double> train(const NovelCorpus& corpus, const SplitSpec& split) {
    cfg_.validate();
    labels_ = LabelSpace::from_training_side(corpus, split);
    for (const auto& key : split.test_ids) {
      const QuotationInstance* inst = corpus.find_quotation(key);
      if (!inst) {
        throw Error("split references unknown quotation '" + key.novel_id + "/" + key.quote_id +
                    "'");
      }
      if (!labels_.index.count({key.novel_id, inst->speaker_id})) {
        throw Error(
            "encoder baseline cannot handle unseen speakers: test speaker '" + inst->speaker_id +
            "' of novel '" + key.novel_id + "' never appears in the training side");
      }
    }

    PromptTemplate t = find_template(cfg_.template_name);
    struct Example {
      std::string source;
      int label;
    };
    std::vector<Example> examples;
    for (const auto& key : split.train_ids) {
      const QuotationInstance* inst = corpus.find_quotation(key);
      RenderedSource src = render_source(*inst, t, tok_, cfg_.max_source_tokens);
      int label = labels_.index.at({key.novel_id, inst->speaker_id});
      examples.push_back({std::move(src.text), label});
    }
    if (examples.empty()) throw Error("training split is empty");

    std::vector<std::string> texts;
    texts.reserve(examples.size());
    for (const auto& e : examples) texts.push_back(e.source);
    tok_.fit(texts);
    init_params();

    std::vector<std::vector<TokenId>> encoded;
    encoded.reserve(examples.size());
    for (const auto& e : examples) encoded.push_back(tok_.encode_source(e.source));

    std::vector<double> epoch_losses;
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      std::mt19937_64 rng(cfg_.seed * 1000003ULL + static_cast<std::uint64_t>(epoch));
      seeded_shuffle(order, rng);
      double loss_sum = 0.0;
      for (std::size_t i = 0; i < order.size();
           i += static_cast<std::size_t>(cfg_.batch_size)) {
        const std::size_t end =
            std::min(order.size(), i + static_cast<std::size_t>(cfg_.batch_size));
        adam_.zero_grads(params_);
        const double inv_batch = 1.0 / static_cast<double>(end - i);
        for (std::size_t j = i; j < end; ++j) {
          loss_sum += example_loss_and_grads(encoded[order[j]], examples[order[j]].label,
                                             inv_batch);
        }
        adam_.step(params_);
      }
      epoch_losses.push_back(loss_sum / static_cast<double>(examples.size()));
    }
    return epoch_losses;
  }

  // Full ranking over the label space, probability descending, index order
  // as the tie-break.
  std::vector<std::pair<SpeakerKey, double>> predict(const QuotationInstance& instance) const {
    if (!initialized_) throw Error("encoder classifier not trained or loaded");
    PromptTemplate t = find_template(cfg_.template_name);
    RenderedSource src = render_source(instance, t, tok_, cfg_.max_source_tokens);
    std::vector<TokenId> ids = tok_.encode_source(src.text);
    std::vector<double> probs = forward(ids, nullptr, nullptr);
    std::vector<std::size_t> order(probs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
    std::vector<std::pair<SpeakerKey, double>> out;
    out.reserve(order.size());
    for (std::size_t i : order) out.emplace_back(labels_.labels[i], probs[i]);
    return out;
  }

  // Adapts a label-space ranking to the shared prediction schema. Labels
  // from the instance's own novel keep their plain character_id; labels from
  // other novels are qualified as "<novel_id>::<character_id>" so they can
  // never collide with the gold id.
  RankedPrediction to_ranked_prediction(const QuotationInstance& instance) const {
    auto ranking = predict(instance);
    RankedPrediction pred;
    pred.novel_id = instance.novel_id;
    pred.quote_id = instance.quote_id;
    for (const auto& [key, prob] : ranking) {
      CandidateScore c;
      c.character_id = key.novel_id == instance.novel_id
                           ? key.character_id
                           : key.novel_id + "::" + key.character_id;
      c.target_text = key.character_id;
      c.score = prob;
      pred.ranked.push_back(std::move(c));
    }
    pred.chosen = pred.ranked.front().character_id;
    return pred;
  }

  void save(const std::filesystem::path& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
      std::ofstream out(dir / "vocab.json", std::ios::binary);
      out << tok_.to_json().dump();
    }
    {
      std::ofstream out(dir / "labels.json", std::ios::binary);
      out << labels_.to_json().dump();
    }
    std::ofstream out(dir / "weights.bin", std::ios::binary);
    if (!out) throw Error("cannot write weights under '" + dir.string() + "'");
    out.write(kMagic, 8);
    write_u64(out, tok_.vocab_size());
    write_u64(out, labels_.labels.size());
    write_u64(out, cfg_.emb_dim);
    write_u64(out, cfg_.hidden);
    write_u64(out, cfg_.max_source_tokens);
    std::size_t name_len = cfg_.template_name.size();
    write_u64(out, name_len);
    out.write(cfg_.template_name.data(), static_cast<std::streamsize>(name_len));
    for (const nn::Param* p : params_) {
      write_u64(out, p->w.rows);
      write_u64(out, p->w.cols);
      out.write(reinterpret_cast<const char*>(p->w.a.data()),
                static_cast<std::streamsize>(p->w.a.size() * sizeof(double)));
    }
  }

  static std::unique_ptr<EncoderClassifier> load(const std::filesystem::path& dir) {
    std::ifstream vin(dir / "vocab.json", std::ios::binary);
    std::ifstream lin(dir / "labels.json", std::ios::binary);
    std::ifstream win(dir / "weights.bin", std::ios::binary);
    if (!vin || !lin || !win) {
      throw Error("'" + dir.string() + "' is not a complete encoder checkpoint");
    }
    char magic[8];
    win.read(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) {
      throw Error("'" + dir.string() + "' is not an encoder checkpoint");
    }
    std::uint64_t vocab = read_u64(win);
    std::uint64_t n_labels = read_u64(win);
    EncoderConfig cfg;
    cfg.emb_dim = read_u64(win);
    cfg.hidden = read_u64(win);
    cfg.max_source_tokens = read_u64(win);
    std::uint64_t name_len = read_u64(win);
    cfg.template_name.resize(name_len);
    win.read(cfg.template_name.data(), static_cast<std::streamsize>(name_len));
    auto model = std::make_unique<EncoderClassifier>(cfg);
    model->tok_.from_json(nlohmann::json::parse(vin));
    model->labels_.from_json(nlohmann::json::parse(lin));
    if (model->tok_.vocab_size() != vocab || model->labels_.labels.size() != n_labels) {
      throw Error("encoder checkpoint size mismatch");
    }
    model->init_params();
    for (nn::Param* p : model->params_) {
      std::uint64_t rows = read_u64(win);
      std::uint64_t cols = read_u64(win);
      if (rows != p->w.rows || cols != p->w.cols) {
        throw Error("encoder checkpoint weight shape mismatch");
      }
      win.read(reinterpret_cast<char*>(p->w.a.data()),
               static_cast<std::streamsize>(p->w.a.size() * sizeof(double)));
    }
    if (!win) throw Error("truncated encoder checkpoint");
    return model;
  }

 private:
  static constexpr const char* kMagic = "SIGENC1\0";

  std::size_t V() const { return tok_.vocab_size(); }
  std::size_t D() const { return cfg_.emb_dim; }
  std::size_t H() const { return cfg_.hidden; }
  std::size_t L() const { return labels_.labels.size(); }

  void init_params() {
    nn::Rng rng(cfg_.seed);
    emb_.init(V(), D());
    nn::glorot_init(emb_.w, D(), D(), rng);
    fw_.init(D(), H());
    fw_.randomize(rng);
    bw_.init(D(), H());
    bw_.randomize(rng);
    cls_w_.init(L(), 2 * H());
    nn::glorot_init(cls_w_.w, 2 * H(), L(), rng);
    cls_b_.init(1, L());
    params_.clear();
    params_.push_back(&emb_);
    fw_.collect(params_);
    bw_.collect(params_);
    params_.push_back(&cls_w_);
    params_.push_back(&cls_b_);
    initialized_ = true;
  }

  std::size_t pool_position(const std::vector<TokenId>& ids) const {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] == WordTokenizer::kMask) return i;
    }
    return 0;  // sequence-start fallback
  }

  struct Caches {
    std::vector<nn::GruCache> fw, bw;
    std::vector<std::vector<double>> hf, hb;
    std::vector<double> pooled;
    std::size_t pool = 0;
  };

  std::vector<double> forward(const std::vector<TokenId>& ids, Caches* caches,
                              std::vector<double>* pooled_out) const {
    const std::size_t S = ids.size();
    std::vector<std::vector<double>> hf(S), hb(S);
    if (caches) {
      caches->fw.resize(S);
      caches->bw.resize(S);
    }
    std::vector<double> h(H(), 0.0), hnext(H());
    for (std::size_t i = 0; i < S; ++i) {
      auto x = emb_.w.row(static_cast<std::size_t>(ids[i]));
      fw_.forward(x, h, hnext, caches ? &caches->fw[i] : nullptr);
      hf[i] = hnext;
      h = hnext;
    }
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t i = S; i-- > 0;) {
      auto x = emb_.w.row(static_cast<std::size_t>(ids[i]));
      bw_.forward(x, h, hnext, caches ? &caches->bw[i] : nullptr);
      hb[i] = hnext;
      h = hnext;
    }
    const std::size_t pool = pool_position(ids);
    std::vector<double> pooled(2 * H());
    std::copy(hf[pool].begin(), hf[pool].end(), pooled.begin());
    std::copy(hb[pool].begin(), hb[pool].end(), pooled.begin() + static_cast<long>(H()));
    std::vector<double> logits(L());
    for (std::size_t i = 0; i < L(); ++i) logits[i] = cls_b_.w.a[i];
    nn::addmv(cls_w_.w, pooled, logits);
    nn::softmax(logits);
    if (caches) {
      caches->hf = std::move(hf);
      caches->hb = std::move(hb);
      caches->pooled = pooled;
      caches->pool = pool;
    }
    if (pooled_out) *pooled_out = pooled;
    return logits;
  }

  double example_loss_and_grads(const std::vector<TokenId>& ids, int label, double inv_batch) {
    Caches caches;
    std::vector<double> probs = forward(ids, &caches, nullptr);
    double loss = -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-300));

    std::vector<double> dlogits = probs;
    for (double& v : dlogits) v *= inv_batch;
    dlogits[static_cast<std::size_t>(label)] -= inv_batch;
    std::vector<double> dpooled(2 * H(), 0.0);
    nn::backmv(cls_w_.w, cls_w_.g, caches.pooled, dlogits, dpooled);
    for (std::size_t i = 0; i < L(); ++i) cls_b_.g.a[i] += dlogits[i];

    const std::size_t S = ids.size();
    std::vector<std::vector<double>> dx(S, std::vector<double>(D(), 0.0));
    {
      std::vector<double> carry(H(), 0.0);
      for (std::size_t i = S; i-- > 0;) {
        std::vector<double> dh(H(), 0.0);
        if (i == caches.pool) {
          for (std::size_t k = 0; k < H(); ++k) dh[k] = dpooled[k];
        }
        for (std::size_t k = 0; k < H(); ++k) dh[k] += carry[k];
        std::vector<double> next_carry(H(), 0.0);
        fw_.backward(caches.fw[i], dh, dx[i], next_carry);
        carry = std::move(next_carry);
      }
    }
    {
      std::vector<double> carry(H(), 0.0);
      for (std::size_t i = 0; i < S; ++i) {
        std::vector<double> dh(H(), 0.0);
        if (i == caches.pool) {
          for (std::size_t k = 0; k < H(); ++k) dh[k] = dpooled[H() + k];
        }
        for (std::size_t k = 0; k < H(); ++k) dh[k] += carry[k];
        std::vector<double> next_carry(H(), 0.0);
        bw_.backward(caches.bw[i], dh, dx[i], next_carry);
        carry = std::move(next_carry);
      }
    }
    for (std::size_t i = 0; i < S; ++i) {
      auto grow = emb_.g.row(static_cast<std::size_t>(ids[i]));
      for (std::size_t k = 0; k < D(); ++k) grow[k] += dx[i][k];
    }
    return loss;
  }

  static void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }

  EncoderConfig cfg_;
  WordTokenizer tok_;
  LabelSpace labels_;
  nn::Param emb_, cls_w_, cls_b_;
  nn::GruCell fw_, bw_;
  nn::Adam adam_;
  std::vector<nn::Param*> params_;
  bool initialized_ = false;
};

}  // namespace sig
