#pragma once

// Speaker-name embedding extraction and the 2-D scatter outputs: one
// embedding per quotation (mean over the gold speaker-name target tokens
// from the final decoder layer), projected with t-SNE, colored by novel,
// written as raw coordinates plus a static SVG.

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sig/backend.hpp"
#include "sig/corpus.hpp"
#include "sig/templates.hpp"
#include "sig/tsne.hpp"

namespace sig {

struct SpeakerEmbedding {
  QuoteKey key;
  std::vector<double> vec;
};

// Mean decoder embedding over the tokens of the gold speaker's canonical
// name within the rendered target.
inline std::vector<SpeakerEmbedding> extract_speaker_embeddings(
    const NovelCorpus& corpus, const std::vector<QuoteKey>& keys, const PromptTemplate& t,
    const Backend& backend, std::size_t budget = 0) {
  if (!backend.supports_embeddings()) {
    throw BackendError("embeddings unsupported by backend '" + backend.id() + "'");
  }
  if (budget == 0) budget = backend.max_source_tokens();
  const Tokenizer& tok = backend.tokenizer();
  std::vector<SpeakerEmbedding> out;
  out.reserve(keys.size());
  for (const auto& key : keys) {
    const QuotationInstance* inst = corpus.find_quotation(key);
    if (!inst) throw Error("unknown quotation '" + key.novel_id + "/" + key.quote_id + "'");
    const CharacterRoster& roster = corpus.novel(key.novel_id).roster;
    const CharacterEntry* gold = roster.find(inst->speaker_id);
    if (!gold) throw Error("gold speaker missing for '" + key.quote_id + "'");

    RenderedSource source = render_source(*inst, t, tok, budget);
    std::string target = render_target(*gold, t, nullptr);
    SequencePair pair;
    pair.source_tokens = tok.encode_source(source.text);
    pair.target_tokens = tok.encode_target(target);
    auto vectors = backend.target_token_embeddings(pair);

    const std::size_t prefix_len = tok.count_tokens(t.target_prefix);
    const std::size_t name_len = tok.count_tokens(gold->canonical_name);
    SpeakerEmbedding emb;
    emb.key = key;
    if (vectors.empty()) throw Error("no decoder embeddings for '" + key.quote_id + "'");
    const std::size_t width = vectors[0].size();
    emb.vec.assign(width, 0.0);
    std::size_t used = 0;
    for (std::size_t i = prefix_len; i < prefix_len + name_len && i < vectors.size(); ++i) {
      for (std::size_t k = 0; k < width; ++k) emb.vec[k] += vectors[i][k];
      ++used;
    }
    if (used == 0) {
      emb.vec = vectors.front();
    } else {
      for (double& v : emb.vec) v /= static_cast<double>(used);
    }
    out.push_back(std::move(emb));
  }
  return out;
}

inline void write_coords_tsv(const std::vector<SpeakerEmbedding>& embeddings,
                             const std::vector<std::array<double, 2>>& coords,
                             const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write coordinates file '" + path.string() + "'");
  out << "novel_id\tquote_id\tx\ty\n";
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    out << embeddings[i].key.novel_id << '\t' << embeddings[i].key.quote_id << '\t'
        << coords[i][0] << '\t' << coords[i][1] << '\n';
  }
}

// Scatter plot, one color per novel, with a legend.
inline void write_scatter_svg(const std::vector<SpeakerEmbedding>& embeddings,
                              const std::vector<std::array<double, 2>>& coords,
                              const std::filesystem::path& path) {
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                  "#bcbd22", "#17becf", "#aec7e8", "#ffbb78"};
  constexpr int kPaletteSize = 12;
  const double width = 720, height = 540, margin = 40;

  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    min_x = std::min(min_x, coords[i][0]);
    max_x = std::max(max_x, coords[i][0]);
    min_y = std::min(min_y, coords[i][1]);
    max_y = std::max(max_y, coords[i][1]);
  }
  double span_x = std::max(max_x - min_x, 1e-9);
  double span_y = std::max(max_y - min_y, 1e-9);

  std::vector<std::string> novels;
  auto color_of = [&](const std::string& novel_id) {
    for (std::size_t i = 0; i < novels.size(); ++i) {
      if (novels[i] == novel_id) return palette[i % kPaletteSize];
    }
    novels.push_back(novel_id);
    return palette[(novels.size() - 1) % kPaletteSize];
  };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write SVG file '" + path.string() + "'");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < coords.size(); ++i) {
    double px = margin + (coords[i][0] - min_x) / span_x * (width - 2 * margin - 120);
    double py = margin + (1.0 - (coords[i][1] - min_y) / span_y) * (height - 2 * margin);
    out << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"3\" fill=\""
        << color_of(embeddings[i].key.novel_id) << "\" fill-opacity=\"0.8\"/>\n";
  }
  for (std::size_t i = 0; i < novels.size(); ++i) {
    double ly = margin + static_cast<double>(i) * 18.0;
    out << "<circle cx=\"" << width - 130 << "\" cy=\"" << ly << "\" r=\"4\" fill=\""
        << palette[i % kPaletteSize] << "\"/>\n";
    out << "<text x=\"" << width - 120 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << novels[i] << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace sig
