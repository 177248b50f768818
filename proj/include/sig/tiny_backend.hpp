#pragma once

// Trainable encoder-decoder backend, built from scratch: a bidirectional GRU
// encoder, an attention GRU decoder, and Adam. Small enough to train on a
// laptop CPU in minutes, large enough to learn surface attribution cues.
// Deterministic given a seed; evaluation-mode calls are bit-identical.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sig/backend.hpp"
#include "sig/nn.hpp"
#include "sig/text.hpp"

namespace sig {

// Word-level tokenizer: runs of word characters (letters, digits, apostrophe,
// non-ASCII bytes) form one piece, any other character is its own piece, and
// the special marker strings are recognized verbatim. join_pieces attaches
// closing punctuation to the preceding piece so decode("Speaker", ":", name)
// reads back as "Speaker: <name>".
class WordTokenizer : public Tokenizer {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr TokenId kMask = 4;

  WordTokenizer() {
    for (const auto& s : special_strings()) add_token(s);
  }

  static const std::vector<std::string>& special_strings() {
    static const std::vector<std::string> s{"<pad>", "<s>", "</s>", "<unk>", "<mask>"};
    return s;
  }

  std::vector<std::string> pieces(std::string_view text) const override {
    std::vector<std::string> out;
    std::size_t i = 0;
    const auto& specials = special_strings();
    while (i < text.size()) {
      unsigned char c = static_cast<unsigned char>(text[i]);
      if (is_space_byte(c)) {
        ++i;
        continue;
      }
      if (c == '<') {
        bool matched = false;
        for (const auto& s : specials) {
          if (text.substr(i, s.size()) == s) {
            out.push_back(s);
            i += s.size();
            matched = true;
            break;
          }
        }
        if (matched) continue;
      }
      if (is_word_byte(c)) {
        std::size_t b = i;
        while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
        out.emplace_back(text.substr(b, i - b));
      } else {
        out.emplace_back(text.substr(i, 1));
        ++i;
      }
    }
    return out;
  }

  std::string join_pieces(std::span<const std::string> pieces) const override {
    auto closing = [](const std::string& p) {
      if (p.size() != 1) return false;
      switch (p[0]) {
        case ',': case '.': case ';': case ':': case '!': case '?':
        case ')': case ']': case '}':
          return true;
        default:
          return false;
      }
    };
    auto opening = [](const std::string& p) {
      return p.size() == 1 && (p[0] == '(' || p[0] == '[' || p[0] == '{');
    };
    std::string out;
    bool suppress_space = false;
    for (const auto& p : pieces) {
      if (out.empty() || suppress_space || closing(p)) {
        out += p;
      } else {
        out.push_back(' ');
        out += p;
      }
      suppress_space = opening(p);
    }
    return out;
  }

  std::string mask_text() const override { return "<mask>"; }
  std::size_t source_overhead() const override { return 2; }  // <s> ... </s>

  std::vector<TokenId> encode(std::string_view text) const override {
    std::vector<TokenId> out;
    for (const auto& p : pieces(text)) out.push_back(id_of(p));
    return out;
  }
  std::vector<TokenId> encode_source(std::string_view text) const override {
    std::vector<TokenId> out{kBos};
    for (const auto& p : pieces(text)) out.push_back(id_of(p));
    out.push_back(kEos);
    return out;
  }
  std::vector<TokenId> encode_target(std::string_view text) const override {
    return encode(text);
  }
  std::optional<TokenId> terminator_id() const override { return kEos; }
  std::string decode(std::span<const TokenId> ids) const override {
    std::vector<std::string> keep;
    for (TokenId id : ids) {
      if (id == kPad || id == kBos || id == kEos) continue;
      keep.push_back(token(id));
    }
    return join_pieces(keep);
  }
  std::size_t vocab_size() const override { return vocab_.size(); }

  TokenId id_of(const std::string& piece) const {
    auto it = ids_.find(piece);
    return it == ids_.end() ? kUnk : it->second;
  }
  const std::string& token(TokenId id) const { return vocab_.at(static_cast<std::size_t>(id)); }

  // Builds the vocabulary from training texts: specials first, then pieces
  // by descending frequency with lexicographic tie-break.
  void fit(std::span<const std::string> texts, std::size_t max_vocab = 0) {
    std::map<std::string, std::size_t> counts;
    for (const auto& t : texts) {
      for (const auto& p : pieces(t)) ++counts[p];
    }
    std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    vocab_.clear();
    ids_.clear();
    for (const auto& s : special_strings()) add_token(s);
    for (const auto& [piece, count] : items) {
      if (max_vocab > 0 && vocab_.size() >= max_vocab) break;
      add_token(piece);
    }
  }

  nlohmann::json to_json() const { return nlohmann::json(vocab_); }
  void from_json(const nlohmann::json& j) {
    vocab_.clear();
    ids_.clear();
    for (const auto& tok : j) add_token(tok.get<std::string>());
  }

 private:
  void add_token(const std::string& tok) {
    if (ids_.count(tok)) return;
    ids_.emplace(tok, static_cast<TokenId>(vocab_.size()));
    vocab_.push_back(tok);
  }

  std::vector<std::string> vocab_;
  std::map<std::string, TokenId> ids_;
};

struct TinyBackendConfig {
  std::size_t emb_dim = 48;
  std::size_t hidden = 64;
  double learning_rate = 3e-3;
  double grad_clip = 5.0;
  std::uint64_t seed = 1;
  std::size_t max_source_tokens = 160;
  std::size_t max_vocab = 0;  // 0 = unlimited
};

class TinySeq2Seq : public Backend {
 public:
  explicit TinySeq2Seq(TinyBackendConfig cfg = {}) : cfg_(cfg) {
    adam_.lr = cfg_.learning_rate;
    adam_.clip = cfg_.grad_clip;
  }

  std::string id() const override { return "tiny"; }
  const Tokenizer& tokenizer() const override { return tok_; }
  WordTokenizer& word_tokenizer() { return tok_; }
  std::size_t max_source_tokens() const override { return cfg_.max_source_tokens; }
  bool trainable() const override { return true; }
  bool supports_embeddings() const override { return true; }
  const TinyBackendConfig& config() const { return cfg_; }
  bool initialized() const { return initialized_; }

  // Raw parameter access, for inspection and finite-difference checks.
  const std::vector<nn::Param*>& parameters() { return params_; }

  // Vocabulary from the training texts, then parameter init. Must run once
  // before the first fit_step unless the model was loaded from a checkpoint.
  void prepare_training(std::span<const std::string> texts) {
    tok_.fit(texts, cfg_.max_vocab);
    init_params();
  }

  StepProbabilities teacher_forced_probs(const SequencePair& pair) const override {
    require_ready(pair);
    Encoded enc = encode_pass(pair.source_tokens, nullptr);
    StepProbabilities probs;
    probs.reserve(pair.target_tokens.size());
    std::vector<double> state = enc.s0;
    std::vector<double> next(H());
    std::vector<double> dist(V());
    for (std::size_t t = 0; t < pair.target_tokens.size(); ++t) {
      TokenId prev = t == 0 ? WordTokenizer::kBos : pair.target_tokens[t - 1];
      decode_step(enc, state, prev, next, dist, nullptr);
      probs.push_back(dist[static_cast<std::size_t>(pair.target_tokens[t])]);
      state = next;
    }
    return probs;
  }

  std::vector<std::vector<double>> target_token_embeddings(const SequencePair& pair) const override {
    require_ready(pair);
    Encoded enc = encode_pass(pair.source_tokens, nullptr);
    std::vector<std::vector<double>> out;
    out.reserve(pair.target_tokens.size());
    std::vector<double> state = enc.s0;
    std::vector<double> next(H());
    std::vector<double> dist(V());
    for (std::size_t t = 0; t < pair.target_tokens.size(); ++t) {
      TokenId prev = t == 0 ? WordTokenizer::kBos : pair.target_tokens[t - 1];
      decode_step(enc, state, prev, next, dist, nullptr);
      out.push_back(next);
      state = next;
    }
    return out;
  }

  std::vector<TokenId> free_generate(std::span<const TokenId> source_tokens,
                                     const GenerationOptions& options) const override {
    SequencePair probe{std::vector<TokenId>(source_tokens.begin(), source_tokens.end()), {}};
    require_ready(probe);
    if (options.strategy == DecodeStrategy::Beam && options.beam_width > 1) {
      return beam_generate(probe.source_tokens, options);
    }
    Encoded enc = encode_pass(probe.source_tokens, nullptr);
    std::vector<TokenId> out;
    std::vector<double> state = enc.s0;
    std::vector<double> next(H());
    std::vector<double> dist(V());
    TokenId prev = WordTokenizer::kBos;
    for (std::size_t step = 0; step < options.max_length; ++step) {
      decode_step(enc, state, prev, next, dist, nullptr);
      TokenId best = 0;
      for (std::size_t i = 1; i < dist.size(); ++i) {
        if (dist[i] > dist[static_cast<std::size_t>(best)]) best = static_cast<TokenId>(i);
      }
      out.push_back(best);
      if (best == WordTokenizer::kEos) break;
      state = next;
      prev = best;
    }
    return out;
  }

  double fit_step(std::span<const SequencePair> batch) override {
    if (batch.empty()) throw BackendError("fit_step requires a non-empty batch");
    if (!initialized_) throw BackendError("tiny backend not initialized: call prepare_training first");
    for (const auto& pair : batch) require_ready(pair);
    adam_.zero_grads(params_);
    double loss = 0.0;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (const auto& pair : batch) loss += pair_loss_and_grads(pair, inv_batch);
    loss *= inv_batch;
    adam_.step(params_);
    return loss;
  }

  void save(const std::filesystem::path& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
      std::ofstream out(dir / "vocab.json", std::ios::binary);
      if (!out) throw Error("cannot write vocab to '" + dir.string() + "'");
      out << tok_.to_json().dump();
    }
    std::ofstream out(dir / "weights.bin", std::ios::binary);
    if (!out) throw Error("cannot write weights to '" + dir.string() + "'");
    out.write(kMagic, 8);
    write_u64(out, 1);  // format version
    write_u64(out, V());
    write_u64(out, cfg_.emb_dim);
    write_u64(out, cfg_.hidden);
    write_u64(out, cfg_.max_source_tokens);
    write_u64(out, cfg_.seed);
    write_f64(out, cfg_.learning_rate);
    write_f64(out, cfg_.grad_clip);
    write_u64(out, static_cast<std::uint64_t>(adam_.t));
    for (const nn::Param* p : params_) {
      write_u64(out, p->w.rows);
      write_u64(out, p->w.cols);
      write_block(out, p->w.a);
      write_block(out, p->m.a);
      write_block(out, p->v.a);
    }
  }

  static std::unique_ptr<TinySeq2Seq> load(const std::filesystem::path& dir) {
    std::ifstream vin(dir / "vocab.json", std::ios::binary);
    if (!vin) throw Error("no vocab.json under '" + dir.string() + "'");
    std::ifstream win(dir / "weights.bin", std::ios::binary);
    if (!win) throw Error("no weights.bin under '" + dir.string() + "'");

    char magic[8];
    win.read(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) {
      throw Error("'" + dir.string() + "' is not a tiny-backend checkpoint");
    }
    std::uint64_t version = read_u64(win);
    if (version != 1) throw Error("unsupported checkpoint version");
    std::uint64_t vocab = read_u64(win);
    TinyBackendConfig cfg;
    cfg.emb_dim = read_u64(win);
    cfg.hidden = read_u64(win);
    cfg.max_source_tokens = read_u64(win);
    cfg.seed = read_u64(win);
    cfg.learning_rate = read_f64(win);
    cfg.grad_clip = read_f64(win);
    auto model = std::make_unique<TinySeq2Seq>(cfg);
    model->adam_.t = static_cast<long long>(read_u64(win));
    model->tok_.from_json(nlohmann::json::parse(vin));
    if (model->tok_.vocab_size() != vocab) {
      throw Error("checkpoint vocab size mismatch between vocab.json and weights.bin");
    }
    model->init_params();
    for (nn::Param* p : model->params_) {
      std::uint64_t rows = read_u64(win);
      std::uint64_t cols = read_u64(win);
      if (rows != p->w.rows || cols != p->w.cols) {
        throw Error("checkpoint weight shape mismatch");
      }
      read_block(win, p->w.a);
      read_block(win, p->m.a);
      read_block(win, p->v.a);
    }
    if (!win) throw Error("truncated checkpoint weights");
    return model;
  }

  nlohmann::json hyperparams_json() const {
    return {{"emb_dim", cfg_.emb_dim},
            {"hidden", cfg_.hidden},
            {"learning_rate", cfg_.learning_rate},
            {"grad_clip", cfg_.grad_clip},
            {"max_source_tokens", cfg_.max_source_tokens},
            {"optimizer", "adam"},
            {"vocab_size", V()}};
  }

 private:
  static constexpr const char* kMagic = "SIGTINY1";

  std::size_t V() const { return tok_.vocab_size(); }
  std::size_t D() const { return cfg_.emb_dim; }
  std::size_t H() const { return cfg_.hidden; }

  void init_params() {
    nn::Rng rng(cfg_.seed);
    emb_.init(V(), D());
    nn::glorot_init(emb_.w, D(), D(), rng);
    enc_fw_.init(D(), H());
    enc_fw_.randomize(rng);
    enc_bw_.init(D(), H());
    enc_bw_.randomize(rng);
    bridge_w_.init(H(), 2 * H());
    nn::glorot_init(bridge_w_.w, 2 * H(), H(), rng);
    bridge_b_.init(1, H());
    dec_.init(D() + 2 * H(), H());
    dec_.randomize(rng);
    attn_w_.init(H(), 2 * H());
    nn::glorot_init(attn_w_.w, 2 * H(), H(), rng);
    out_w_.init(V(), H() + 2 * H());
    nn::glorot_init(out_w_.w, H() + 2 * H(), V(), rng);
    out_b_.init(1, V());
    params_.clear();
    params_.push_back(&emb_);
    enc_fw_.collect(params_);
    enc_bw_.collect(params_);
    params_.push_back(&bridge_w_);
    params_.push_back(&bridge_b_);
    dec_.collect(params_);
    params_.push_back(&attn_w_);
    params_.push_back(&out_w_);
    params_.push_back(&out_b_);
    initialized_ = true;
  }

  void require_ready(const SequencePair& pair) const {
    if (!initialized_) {
      throw BackendError("tiny backend not initialized: train it or load a checkpoint");
    }
    check_source_length(pair);
    auto check_ids = [&](const std::vector<TokenId>& ids) {
      for (TokenId id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= V()) {
          throw BackendError("token id " + std::to_string(id) + " outside vocabulary of " +
                             std::to_string(V()));
        }
      }
    };
    check_ids(pair.source_tokens);
    check_ids(pair.target_tokens);
  }

  struct Encoded {
    std::vector<std::vector<double>> M;   // S x 2H encoder states
    std::vector<std::vector<double>> av;  // S x H, attn_w * M_i
    std::vector<double> bridge_in;        // [h_fw_last ; h_bw_first]
    std::vector<double> s0;               // initial decoder state
  };

  struct EncoderCaches {
    std::vector<nn::GruCache> fw;  // indexed by position
    std::vector<nn::GruCache> bw;  // indexed by position
  };

  Encoded encode_pass(const std::vector<TokenId>& src, EncoderCaches* caches) const {
    const std::size_t S = src.size();
    if (S == 0) throw BackendError("empty source sequence");
    Encoded enc;
    enc.M.assign(S, std::vector<double>(2 * H(), 0.0));
    if (caches) {
      caches->fw.resize(S);
      caches->bw.resize(S);
    }
    std::vector<double> h(H(), 0.0), hnext(H());
    for (std::size_t i = 0; i < S; ++i) {
      auto x = emb_.w.row(static_cast<std::size_t>(src[i]));
      enc_fw_.forward(x, h, hnext, caches ? &caches->fw[i] : nullptr);
      std::copy(hnext.begin(), hnext.end(), enc.M[i].begin());
      h = hnext;
    }
    std::vector<double> hf_last = h;
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t ii = S; ii-- > 0;) {
      auto x = emb_.w.row(static_cast<std::size_t>(src[ii]));
      enc_bw_.forward(x, h, hnext, caches ? &caches->bw[ii] : nullptr);
      std::copy(hnext.begin(), hnext.end(), enc.M[ii].begin() + static_cast<long>(H()));
      h = hnext;
    }
    enc.bridge_in.resize(2 * H());
    std::copy(hf_last.begin(), hf_last.end(), enc.bridge_in.begin());
    std::copy(h.begin(), h.end(), enc.bridge_in.begin() + static_cast<long>(H()));
    enc.s0.assign(H(), 0.0);
    for (std::size_t i = 0; i < H(); ++i) enc.s0[i] = bridge_b_.w.a[i];
    nn::addmv(bridge_w_.w, enc.bridge_in, enc.s0);
    for (double& v : enc.s0) v = std::tanh(v);
    enc.av.assign(S, std::vector<double>(H(), 0.0));
    for (std::size_t i = 0; i < S; ++i) nn::addmv(attn_w_.w, enc.M[i], enc.av[i]);
    return enc;
  }

  struct StepCache {
    TokenId y_prev = 0;
    std::vector<double> s_prev, alpha, ctx, u, s_out, oc, probs;
    nn::GruCache gru;
  };

  // One decoder step: attention over M with the incoming state, GRU update,
  // output distribution. `state` is s_{t-1}; `next` receives s_t.
  void decode_step(const Encoded& enc, const std::vector<double>& state, TokenId y_prev,
                   std::vector<double>& next, std::vector<double>& dist, StepCache* cache) const {
    const std::size_t S = enc.M.size();
    std::vector<double> e(S);
    for (std::size_t i = 0; i < S; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < H(); ++k) acc += state[k] * enc.av[i][k];
      e[i] = acc;
    }
    nn::softmax(e);
    std::vector<double> ctx(2 * H(), 0.0);
    for (std::size_t i = 0; i < S; ++i) {
      const double a = e[i];
      for (std::size_t k = 0; k < 2 * H(); ++k) ctx[k] += a * enc.M[i][k];
    }
    std::vector<double> u(D() + 2 * H());
    auto yemb = emb_.w.row(static_cast<std::size_t>(y_prev));
    std::copy(yemb.begin(), yemb.end(), u.begin());
    std::copy(ctx.begin(), ctx.end(), u.begin() + static_cast<long>(D()));
    dec_.forward(u, state, next, cache ? &cache->gru : nullptr);
    std::vector<double> oc(H() + 2 * H());
    std::copy(next.begin(), next.end(), oc.begin());
    std::copy(ctx.begin(), ctx.end(), oc.begin() + static_cast<long>(H()));
    dist.assign(V(), 0.0);
    for (std::size_t i = 0; i < V(); ++i) dist[i] = out_b_.w.a[i];
    nn::addmv(out_w_.w, oc, dist);
    nn::softmax(dist);
    if (cache) {
      cache->y_prev = y_prev;
      cache->s_prev = state;
      cache->alpha = std::move(e);
      cache->ctx = std::move(ctx);
      cache->u = std::move(u);
      cache->s_out = next;
      cache->oc = std::move(oc);
      cache->probs = dist;
    }
  }

  // Forward + backward for one pair; returns its NLL and accumulates
  // gradients scaled by inv_batch.
  double pair_loss_and_grads(const SequencePair& pair, double inv_batch) {
    EncoderCaches enc_caches;
    Encoded enc = encode_pass(pair.source_tokens, &enc_caches);
    const std::size_t S = pair.source_tokens.size();
    const std::size_t m = pair.target_tokens.size();

    std::vector<StepCache> steps(m);
    double loss = 0.0;
    {
      std::vector<double> state = enc.s0;
      std::vector<double> next(H());
      std::vector<double> dist;
      for (std::size_t t = 0; t < m; ++t) {
        TokenId prev = t == 0 ? WordTokenizer::kBos : pair.target_tokens[t - 1];
        decode_step(enc, state, prev, next, dist, &steps[t]);
        double p = dist[static_cast<std::size_t>(pair.target_tokens[t])];
        loss -= std::log(std::max(p, 1e-300));
        state = next;
      }
    }

    // ----- backward -----
    std::vector<std::vector<double>> dM(S, std::vector<double>(2 * H(), 0.0));
    std::vector<double> ds(H(), 0.0);  // grad wrt s_t flowing backward
    std::vector<double> wts(2 * H());  // attn_w^T s_prev, reused per step

    for (std::size_t t = m; t-- > 0;) {
      StepCache& sc = steps[t];
      const TokenId y_t = pair.target_tokens[t];

      std::vector<double> dlogits = sc.probs;
      for (double& v : dlogits) v *= inv_batch;
      dlogits[static_cast<std::size_t>(y_t)] -= inv_batch;

      std::vector<double> doc(H() + 2 * H(), 0.0);
      nn::backmv(out_w_.w, out_w_.g, sc.oc, dlogits, doc);
      for (std::size_t i = 0; i < V(); ++i) out_b_.g.a[i] += dlogits[i];

      std::vector<double> ds_total(H());
      for (std::size_t i = 0; i < H(); ++i) ds_total[i] = ds[i] + doc[i];
      std::vector<double> dctx(2 * H());
      for (std::size_t i = 0; i < 2 * H(); ++i) dctx[i] = doc[H() + i];

      std::vector<double> du(D() + 2 * H(), 0.0);
      std::vector<double> ds_prev(H(), 0.0);
      dec_.backward(sc.gru, ds_total, du, ds_prev);

      {
        auto grow = emb_.g.row(static_cast<std::size_t>(sc.y_prev));
        for (std::size_t i = 0; i < D(); ++i) grow[i] += du[i];
        for (std::size_t i = 0; i < 2 * H(); ++i) dctx[i] += du[D() + i];
      }

      // ctx = sum alpha_i M_i
      std::vector<double> dalpha(S);
      for (std::size_t i = 0; i < S; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 2 * H(); ++k) acc += enc.M[i][k] * dctx[k];
        dalpha[i] = acc;
        const double a = sc.alpha[i];
        for (std::size_t k = 0; k < 2 * H(); ++k) dM[i][k] += a * dctx[k];
      }
      // softmax backward
      double dot = 0.0;
      for (std::size_t i = 0; i < S; ++i) dot += sc.alpha[i] * dalpha[i];
      std::fill(wts.begin(), wts.end(), 0.0);
      for (std::size_t k = 0; k < 2 * H(); ++k) {
        double acc = 0.0;
        for (std::size_t r = 0; r < H(); ++r) acc += attn_w_.w(r, k) * sc.s_prev[r];
        wts[k] = acc;
      }
      for (std::size_t i = 0; i < S; ++i) {
        const double de = sc.alpha[i] * (dalpha[i] - dot);
        if (de == 0.0) continue;
        // e_i = s_prev . (attn_w M_i)
        for (std::size_t r = 0; r < H(); ++r) {
          ds_prev[r] += de * enc.av[i][r];
          double* garr = attn_w_.g.a.data() + r * attn_w_.g.cols;
          const double coef = de * sc.s_prev[r];
          for (std::size_t k = 0; k < 2 * H(); ++k) garr[k] += coef * enc.M[i][k];
        }
        for (std::size_t k = 0; k < 2 * H(); ++k) dM[i][k] += de * wts[k];
      }
      ds = std::move(ds_prev);
    }

    // bridge: s0 = tanh(bridge_w * bridge_in + bridge_b)
    {
      std::vector<double> dpre(H());
      for (std::size_t i = 0; i < H(); ++i) {
        dpre[i] = ds[i] * (1.0 - enc.s0[i] * enc.s0[i]);
        bridge_b_.g.a[i] += dpre[i];
      }
      std::vector<double> dbridge(2 * H(), 0.0);
      nn::backmv(bridge_w_.w, bridge_w_.g, enc.bridge_in, dpre, dbridge);
      for (std::size_t i = 0; i < H(); ++i) {
        dM[S - 1][i] += dbridge[i];          // h_fw at the last position
        dM[0][H() + i] += dbridge[H() + i];  // h_bw at the first position
      }
    }

    // encoder BPTT, both directions, accumulating embedding grads
    std::vector<std::vector<double>> dx(S, std::vector<double>(D(), 0.0));
    {
      std::vector<double> carry(H(), 0.0);
      for (std::size_t i = S; i-- > 0;) {
        std::vector<double> dh(H());
        for (std::size_t k = 0; k < H(); ++k) dh[k] = dM[i][k] + carry[k];
        std::vector<double> next_carry(H(), 0.0);
        enc_fw_.backward(enc_caches.fw[i], dh, dx[i], next_carry);
        carry = std::move(next_carry);
      }
    }
    {
      std::vector<double> carry(H(), 0.0);
      for (std::size_t i = 0; i < S; ++i) {
        std::vector<double> dh(H());
        for (std::size_t k = 0; k < H(); ++k) dh[k] = dM[i][H() + k] + carry[k];
        std::vector<double> next_carry(H(), 0.0);
        enc_bw_.backward(enc_caches.bw[i], dh, dx[i], next_carry);
        carry = std::move(next_carry);
      }
    }
    for (std::size_t i = 0; i < S; ++i) {
      auto grow = emb_.g.row(static_cast<std::size_t>(pair.source_tokens[i]));
      for (std::size_t k = 0; k < D(); ++k) grow[k] += dx[i][k];
    }
    return loss;
  }

  std::vector<TokenId> beam_generate(const std::vector<TokenId>& src,
                                     const GenerationOptions& options) const {
    Encoded enc = encode_pass(src, nullptr);
    struct Hyp {
      std::vector<TokenId> toks;
      double logp = 0.0;
      std::vector<double> state;
      bool done = false;
    };
    const std::size_t width = static_cast<std::size_t>(std::max(options.beam_width, 1));
    std::vector<Hyp> beam{{.toks = {}, .logp = 0.0, .state = enc.s0, .done = false}};
    std::vector<double> next(H());
    std::vector<double> dist;
    for (std::size_t step = 0; step < options.max_length; ++step) {
      bool all_done = true;
      std::vector<Hyp> candidates;
      for (const Hyp& h : beam) {
        if (h.done) {
          candidates.push_back(h);
          continue;
        }
        all_done = false;
        TokenId prev = h.toks.empty() ? WordTokenizer::kBos : h.toks.back();
        decode_step(enc, h.state, prev, next, dist, nullptr);
        std::vector<TokenId> order(dist.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<TokenId>(i);
        std::partial_sort(order.begin(), order.begin() + static_cast<long>(std::min(width, order.size())),
                          order.end(), [&](TokenId a, TokenId b) {
                            double pa = dist[static_cast<std::size_t>(a)];
                            double pb = dist[static_cast<std::size_t>(b)];
                            if (pa != pb) return pa > pb;
                            return a < b;
                          });
        for (std::size_t i = 0; i < std::min(width, order.size()); ++i) {
          Hyp c = h;
          TokenId tok = order[i];
          c.toks.push_back(tok);
          c.logp += std::log(std::max(dist[static_cast<std::size_t>(tok)], 1e-300));
          c.state = next;
          c.done = tok == WordTokenizer::kEos;
          candidates.push_back(std::move(c));
        }
      }
      if (all_done) break;
      std::stable_sort(candidates.begin(), candidates.end(), [](const Hyp& a, const Hyp& b) {
        if (a.logp != b.logp) return a.logp > b.logp;
        return a.toks < b.toks;
      });
      if (candidates.size() > width) candidates.resize(width);
      beam = std::move(candidates);
    }
    const Hyp* best = nullptr;
    for (const Hyp& h : beam) {
      if (h.done && (!best || h.logp > best->logp)) best = &h;
    }
    if (!best) {
      for (const Hyp& h : beam) {
        if (!best || h.logp > best->logp) best = &h;
      }
    }
    return best ? best->toks : std::vector<TokenId>{};
  }

  static void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static void write_block(std::ostream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  static std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }
  static double read_f64(std::istream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }
  static void read_block(std::istream& in, std::vector<double>& v) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
  }

  TinyBackendConfig cfg_;
  WordTokenizer tok_;
  nn::Param emb_, bridge_w_, bridge_b_, attn_w_, out_w_, out_b_;
  nn::GruCell enc_fw_, enc_bw_, dec_;
  nn::Adam adam_;
  std::vector<nn::Param*> params_;
  bool initialized_ = false;
};

}  // namespace sig
