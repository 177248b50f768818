#pragma once

// Both inference modes. Classification by generation scores every roster
// candidate by the length-averaged generation probability of its rendered
// target and ranks them (ties broken by roster order). Direct generation
// decodes freely, parses the speaker clause, and resolves it against the
// roster's names and aliases.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sig/backend.hpp"
#include "sig/corpus.hpp"
#include "sig/templates.hpp"

namespace sig {

enum class ScoreSpace { Prob, LogProb };
enum class AliasScoring { Canonical, Max };

struct ScoreOptions {
  ScoreSpace space = ScoreSpace::Prob;       // averaged probability by default
  AliasScoring aliases = AliasScoring::Canonical;
};

struct CandidateScore {
  std::string character_id;
  std::string target_text;
  double score = 0.0;
  StepProbabilities step_probs;
};

struct RankedPrediction {
  std::string novel_id;
  std::string quote_id;
  std::vector<CandidateScore> ranked;  // score descending, ties by roster order
  std::string chosen;                  // ranked[0]
};

struct Resolution {
  enum class Kind { Resolved, Ambiguous, Unresolved };
  Kind kind = Kind::Unresolved;
  std::vector<std::string> character_ids;  // 1 for Resolved, >1 for Ambiguous

  static Resolution resolved(std::string id) {
    return {Kind::Resolved, {std::move(id)}};
  }
  static Resolution ambiguous(std::vector<std::string> ids) {
    return {Kind::Ambiguous, std::move(ids)};
  }
  static Resolution unresolved() { return {}; }
  bool resolved_to(std::string_view id) const {
    return kind == Kind::Resolved && character_ids.size() == 1 && character_ids[0] == id;
  }
};

inline std::string to_string(Resolution::Kind k) {
  switch (k) {
    case Resolution::Kind::Resolved: return "resolved";
    case Resolution::Kind::Ambiguous: return "ambiguous";
    default: return "unresolved";
  }
}

struct ParsedPrediction {
  std::string novel_id;
  std::string quote_id;
  std::string raw_output;
  std::string parsed_name;
  Resolution resolution;
};

// Normalized exact match against canonical names and aliases; failing that,
// a substring match (the generated name inside a candidate name) that is
// unique resolves, several matches are ambiguous, none is unresolved.
inline Resolution resolve_name(std::string_view name, const CharacterRoster& roster) {
  std::string n = normalize_name(name);
  if (n.empty()) return Resolution::unresolved();
  std::vector<std::string> exact;
  std::vector<std::string> partial;
  for (const auto& entry : roster.entries) {
    bool is_exact = false;
    bool is_partial = false;
    for (const auto& cand_name : entry.all_names()) {
      std::string cn = normalize_name(cand_name);
      if (cn == n) {
        is_exact = true;
        break;
      }
      if (contains_substring(cn, n)) is_partial = true;
    }
    if (is_exact) {
      exact.push_back(entry.character_id);
    } else if (is_partial) {
      partial.push_back(entry.character_id);
    }
  }
  if (exact.size() == 1) return Resolution::resolved(exact[0]);
  if (exact.size() > 1) return Resolution::ambiguous(std::move(exact));
  if (partial.size() == 1) return Resolution::resolved(partial[0]);
  if (partial.size() > 1) return Resolution::ambiguous(std::move(partial));
  return Resolution::unresolved();
}

namespace detail {

inline double score_from_probs(const StepProbabilities& probs, ScoreSpace space) {
  if (probs.empty()) throw Error("cannot score an empty target");
  double acc = 0.0;
  for (double p : probs) acc += space == ScoreSpace::Prob ? p : std::log(std::max(p, 1e-300));
  return acc / static_cast<double>(probs.size());
}

inline CandidateScore score_one_target(const RenderedSource& source, std::string target_text,
                                       const std::string& character_id, const Backend& backend,
                                       ScoreSpace space) {
  SequencePair pair;
  pair.source_tokens = backend.tokenizer().encode_source(source.text);
  pair.target_tokens = backend.tokenizer().encode_target(target_text);
  CandidateScore out;
  out.character_id = character_id;
  out.target_text = std::move(target_text);
  out.step_probs = backend.teacher_forced_probs(pair);
  out.score = score_from_probs(out.step_probs, space);
  return out;
}

}  // namespace detail

// Score of one candidate: the arithmetic mean of the per-step
// probabilities over the full rendered target (prefix tokens included).
// Scored targets never carry the auxiliary clause.
inline CandidateScore score_candidate(const RenderedSource& source,
                                      const CharacterEntry& candidate, const PromptTemplate& t,
                                      const Backend& backend, const ScoreOptions& options = {}) {
  CandidateScore best = detail::score_one_target(
      source, render_target(candidate, t, nullptr), candidate.character_id, backend,
      options.space);
  if (options.aliases == AliasScoring::Max) {
    for (const auto& alias : candidate.aliases) {
      CharacterEntry as_alias = candidate;
      as_alias.canonical_name = alias;
      CandidateScore s = detail::score_one_target(
          source, render_target(as_alias, t, nullptr), candidate.character_id, backend,
          options.space);
      if (s.score > best.score) best = std::move(s);
    }
  }
  return best;
}

using CandidateFilter = std::function<bool(const CharacterEntry&)>;

inline RankedPrediction classify_by_generation(const QuotationInstance& instance,
                                               const CharacterRoster& roster,
                                               const PromptTemplate& t, const Backend& backend,
                                               std::size_t budget = 0,
                                               const ScoreOptions& options = {},
                                               const CandidateFilter& filter = nullptr) {
  if (budget == 0) budget = backend.max_source_tokens();
  RenderedSource source = render_source(instance, t, backend.tokenizer(), budget);
  RankedPrediction pred;
  pred.novel_id = instance.novel_id;
  pred.quote_id = instance.quote_id;
  try {
    for (const auto& entry : roster.entries) {
      if (filter && !filter(entry)) continue;
      pred.ranked.push_back(score_candidate(source, entry, t, backend, options));
    }
  } catch (const BackendError& e) {
    throw BackendError(std::string(e.what()) + " (while scoring quote '" + instance.quote_id +
                       "')");
  }
  if (pred.ranked.empty()) throw Error("no candidates for quote '" + instance.quote_id + "'");
  std::stable_sort(pred.ranked.begin(), pred.ranked.end(),
                   [](const CandidateScore& a, const CandidateScore& b) {
                     return a.score > b.score;
                   });
  pred.chosen = pred.ranked.front().character_id;
  return pred;
}

// Splits generated text into the speaker clause: everything after the first
// target_prefix, ending at the aux clause, a newline, or end of output.
inline std::string parse_speaker_clause(const std::string& raw, const PromptTemplate& t) {
  std::size_t start = 0;
  if (!t.target_prefix.empty()) {
    std::size_t pos = raw.find(t.target_prefix);
    if (pos == std::string::npos) return {};
    start = pos + t.target_prefix.size();
  }
  std::size_t end = raw.size();
  if (t.aux_task != AuxTask::None && !t.aux_target_prefix.empty()) {
    std::size_t aux = raw.find(t.aux_target_prefix, start);
    if (aux != std::string::npos) end = aux;
  }
  std::size_t nl = raw.find('\n', start);
  if (nl != std::string::npos && nl < end) end = nl;
  return trim(raw.substr(start, end - start));
}

inline ParsedPrediction direct_generate_speaker(const QuotationInstance& instance,
                                                const CharacterRoster& roster,
                                                const PromptTemplate& t, const Backend& backend,
                                                std::size_t budget = 0,
                                                const GenerationOptions& options = {}) {
  if (budget == 0) budget = backend.max_source_tokens();
  RenderedSource source = render_source(instance, t, backend.tokenizer(), budget);
  std::vector<TokenId> source_tokens = backend.tokenizer().encode_source(source.text);
  ParsedPrediction pred;
  pred.novel_id = instance.novel_id;
  pred.quote_id = instance.quote_id;
  try {
    std::vector<TokenId> generated = backend.free_generate(source_tokens, options);
    pred.raw_output = backend.tokenizer().decode(generated);
  } catch (const BackendError& e) {
    throw BackendError(std::string(e.what()) + " (while generating for quote '" +
                       instance.quote_id + "')");
  }
  pred.parsed_name = parse_speaker_clause(pred.raw_output, t);
  pred.resolution = pred.parsed_name.empty() ? Resolution::unresolved()
                                             : resolve_name(pred.parsed_name, roster);
  return pred;
}

inline std::vector<std::string> top_k(const RankedPrediction& pred, std::size_t k) {
  if (k < 1 || k > pred.ranked.size()) {
    throw Error("top_k: k = " + std::to_string(k) + " out of range for a ranking of " +
                std::to_string(pred.ranked.size()));
  }
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(pred.ranked[i].character_id);
  return out;
}

// --- prediction dump: one JSON record per quotation ---

inline std::string serialize_predictions(const std::vector<RankedPrediction>& preds) {
  std::ostringstream out;
  for (const auto& p : preds) {
    nlohmann::ordered_json j;
    j["mode"] = "sig";
    j["novel_id"] = p.novel_id;
    j["quote_id"] = p.quote_id;
    j["chosen"] = p.chosen;
    auto& ranked = j["ranked"] = nlohmann::ordered_json::array();
    for (const auto& c : p.ranked) {
      ranked.push_back({{"character_id", c.character_id}, {"score", c.score}});
    }
    out << j.dump() << '\n';
  }
  return out.str();
}

inline std::string serialize_predictions(const std::vector<ParsedPrediction>& preds) {
  std::ostringstream out;
  for (const auto& p : preds) {
    nlohmann::ordered_json j;
    j["mode"] = "sig_d";
    j["novel_id"] = p.novel_id;
    j["quote_id"] = p.quote_id;
    j["raw_output"] = p.raw_output;
    j["parsed_name"] = p.parsed_name;
    j["resolution"] = to_string(p.resolution.kind);
    j["character_ids"] = p.resolution.character_ids;
    out << j.dump() << '\n';
  }
  return out.str();
}

struct PredictionFile {
  std::vector<RankedPrediction> ranked;
  std::vector<ParsedPrediction> parsed;
  bool is_sig() const { return parsed.empty(); }
  std::size_t size() const { return is_sig() ? ranked.size() : parsed.size(); }
};

inline PredictionFile load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open predictions file '" + path.string() + "'");
  PredictionFile out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error("malformed prediction record at line " + std::to_string(line_no));
    }
    std::string mode = j.value("mode", std::string{"sig"});
    if (mode == "sig") {
      RankedPrediction p;
      p.novel_id = j.at("novel_id").get<std::string>();
      p.quote_id = j.at("quote_id").get<std::string>();
      p.chosen = j.at("chosen").get<std::string>();
      for (const auto& r : j.at("ranked")) {
        CandidateScore c;
        c.character_id = r.at("character_id").get<std::string>();
        c.score = r.at("score").get<double>();
        p.ranked.push_back(std::move(c));
      }
      out.ranked.push_back(std::move(p));
    } else if (mode == "sig_d") {
      ParsedPrediction p;
      p.novel_id = j.at("novel_id").get<std::string>();
      p.quote_id = j.at("quote_id").get<std::string>();
      p.raw_output = j.value("raw_output", std::string{});
      p.parsed_name = j.value("parsed_name", std::string{});
      std::string res = j.value("resolution", std::string{"unresolved"});
      p.resolution.kind = res == "resolved"    ? Resolution::Kind::Resolved
                          : res == "ambiguous" ? Resolution::Kind::Ambiguous
                                               : Resolution::Kind::Unresolved;
      if (j.contains("character_ids")) {
        p.resolution.character_ids = j["character_ids"].get<std::vector<std::string>>();
      }
      out.parsed.push_back(std::move(p));
    } else {
      throw Error("unknown prediction mode '" + mode + "' at line " + std::to_string(line_no));
    }
  }
  return out;
}

inline void save_predictions(const std::vector<RankedPrediction>& preds,
                             const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write predictions file '" + path.string() + "'");
  out << serialize_predictions(preds);
}

inline void save_predictions(const std::vector<ParsedPrediction>& preds,
                             const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write predictions file '" + path.string() + "'");
  out << serialize_predictions(preds);
}

}  // namespace sig
