#pragma once

// Metrics and aggregation: accuracy by quote type, the non-explicit bucket,
// top-k accuracy from rankings, mean/median across folds, and the lenient
// substring metric for free-text responses. Reports keep raw counts so the
// published table formats can be reproduced without recomputing from
// rounded values.

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sig/corpus.hpp"
#include "sig/inference.hpp"

namespace sig {

struct EvalCell {
  std::size_t correct = 0;
  std::size_t total = 0;

  bool defined() const { return total > 0; }
  double accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
  void add(bool ok) {
    ++total;
    if (ok) ++correct;
  }
};

struct EvalReport {
  std::string split_name;
  int fold_index = 0;
  EvalCell overall;
  EvalCell explicit_cell;
  EvalCell anaphoric_cell;
  EvalCell implicit_cell;
  EvalCell non_explicit;           // anaphoric plus implicit
  std::vector<EvalCell> topk;      // index i holds acc@(i+1); empty without rankings
};

namespace detail {

struct GoldInfo {
  std::string speaker_id;
  QuoteType type = QuoteType::Implicit;
};

inline std::map<QuoteKey, GoldInfo> gold_map(const NovelCorpus& corpus, const SplitSpec& split) {
  std::map<QuoteKey, GoldInfo> out;
  for (const auto& key : split.test_ids) {
    const QuotationInstance* inst = corpus.find_quotation(key);
    if (!inst) {
      throw Error("split references unknown quotation '" + key.novel_id + "/" + key.quote_id +
                  "'");
    }
    out.emplace(key, GoldInfo{inst->speaker_id, inst->quote_type});
  }
  return out;
}

inline void check_coverage(const std::map<QuoteKey, GoldInfo>& gold,
                           const std::vector<QuoteKey>& predicted) {
  std::set<QuoteKey> seen;
  std::vector<std::string> extra, duplicate;
  for (const auto& key : predicted) {
    if (!seen.insert(key).second) duplicate.push_back(key.novel_id + "/" + key.quote_id);
    if (!gold.count(key)) extra.push_back(key.novel_id + "/" + key.quote_id);
  }
  std::vector<std::string> missing;
  for (const auto& [key, info] : gold) {
    if (!seen.count(key)) missing.push_back(key.novel_id + "/" + key.quote_id);
  }
  auto head = [](const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < std::min<std::size_t>(v.size(), 10); ++i) {
      if (i) out += ", ";
      out += v[i];
    }
    if (v.size() > 10) out += ", ... (" + std::to_string(v.size()) + " total)";
    return out;
  };
  if (!missing.empty() || !extra.empty() || !duplicate.empty()) {
    std::string msg = "predictions do not cover the test split exactly.";
    if (!missing.empty()) msg += " missing: " + head(missing) + ".";
    if (!extra.empty()) msg += " extra: " + head(extra) + ".";
    if (!duplicate.empty()) msg += " duplicated: " + head(duplicate) + ".";
    throw Error(msg);
  }
}

inline void tally(EvalReport& report, QuoteType type, bool correct) {
  report.overall.add(correct);
  switch (type) {
    case QuoteType::Explicit:
      report.explicit_cell.add(correct);
      break;
    case QuoteType::Anaphoric:
      report.anaphoric_cell.add(correct);
      report.non_explicit.add(correct);
      break;
    case QuoteType::Implicit:
      report.implicit_cell.add(correct);
      report.non_explicit.add(correct);
      break;
  }
}

}  // namespace detail

// SIG evaluation: a prediction is correct iff the chosen character_id equals
// the gold speaker. Rankings also produce the top-k vector up to k = 5 (or
// the shallowest ranking, whichever is smaller).
inline EvalReport evaluate_predictions(const std::vector<RankedPrediction>& predictions,
                                       const NovelCorpus& corpus, const SplitSpec& split) {
  auto gold = detail::gold_map(corpus, split);
  std::vector<QuoteKey> keys;
  keys.reserve(predictions.size());
  for (const auto& p : predictions) keys.push_back({p.novel_id, p.quote_id});
  detail::check_coverage(gold, keys);

  EvalReport report;
  report.split_name = split.name;
  report.fold_index = split.fold_index;

  std::size_t depth = 5;
  for (const auto& p : predictions) depth = std::min(depth, p.ranked.size());
  report.topk.assign(depth, EvalCell{});

  for (const auto& p : predictions) {
    const auto& info = gold.at({p.novel_id, p.quote_id});
    detail::tally(report, info.type, p.chosen == info.speaker_id);
    std::size_t gold_rank = p.ranked.size();
    for (std::size_t i = 0; i < p.ranked.size(); ++i) {
      if (p.ranked[i].character_id == info.speaker_id) {
        gold_rank = i;
        break;
      }
    }
    for (std::size_t k = 0; k < depth; ++k) report.topk[k].add(gold_rank <= k);
  }
  return report;
}

// SIG^D evaluation: correct iff the parse resolved to exactly the gold
// speaker; ambiguous and unresolved both count as incorrect.
inline EvalReport evaluate_predictions(const std::vector<ParsedPrediction>& predictions,
                                       const NovelCorpus& corpus, const SplitSpec& split) {
  auto gold = detail::gold_map(corpus, split);
  std::vector<QuoteKey> keys;
  keys.reserve(predictions.size());
  for (const auto& p : predictions) keys.push_back({p.novel_id, p.quote_id});
  detail::check_coverage(gold, keys);

  EvalReport report;
  report.split_name = split.name;
  report.fold_index = split.fold_index;
  for (const auto& p : predictions) {
    const auto& info = gold.at({p.novel_id, p.quote_id});
    detail::tally(report, info.type, p.resolution.resolved_to(info.speaker_id));
  }
  return report;
}

inline double topk_accuracy(const std::vector<RankedPrediction>& predictions,
                            const std::map<QuoteKey, std::string>& gold, std::size_t k) {
  if (k < 1) throw Error("topk_accuracy: k must be >= 1");
  if (predictions.empty()) throw Error("topk_accuracy: no predictions");
  std::size_t hits = 0;
  for (const auto& p : predictions) {
    if (p.ranked.size() < k) {
      throw Error("topk_accuracy: prediction for '" + p.quote_id + "' has ranking depth " +
                  std::to_string(p.ranked.size()) + " < k = " + std::to_string(k));
    }
    auto it = gold.find({p.novel_id, p.quote_id});
    if (it == gold.end()) throw Error("topk_accuracy: no gold label for '" + p.quote_id + "'");
    for (std::size_t i = 0; i < k; ++i) {
      if (p.ranked[i].character_id == it->second) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

// Lenient metric for free-text responses: true iff the gold name or one of
// its aliases appears as a word-boundary substring after normalization.
inline bool lenient_match(std::string_view response, const CharacterEntry& gold) {
  std::string resp = normalize_name(response);
  for (const auto& name : gold.all_names()) {
    if (contains_word_boundary(resp, normalize_name(name))) return true;
  }
  return false;
}

// --- cross-fold aggregation ---

struct AggregateCell {
  double mean = 0.0;
  double median = 0.0;
  std::size_t folds = 0;        // folds where the cell was populated
  std::size_t total_count = 0;  // summed instance counts

  bool defined() const { return folds > 0; }
};

struct AggregateReport {
  int n_folds = 0;
  AggregateCell overall, explicit_cell, anaphoric_cell, implicit_cell, non_explicit;
  std::vector<AggregateCell> topk;
  std::vector<EvalReport> folds;  // raw per-fold cells, kept verbatim
};

namespace detail {

inline AggregateCell aggregate_cell(const std::vector<EvalReport>& reports,
                                    const EvalCell EvalReport::* member) {
  AggregateCell out;
  std::vector<double> values;
  for (const auto& r : reports) {
    const EvalCell& cell = r.*member;
    if (!cell.defined()) continue;
    values.push_back(cell.accuracy());
    out.total_count += cell.total;
  }
  out.folds = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  out.median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return out;
}

}  // namespace detail

inline AggregateReport aggregate_folds(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw Error("aggregate_folds: need at least one report");
  AggregateReport out;
  out.n_folds = static_cast<int>(reports.size());
  out.folds = reports;
  out.overall = detail::aggregate_cell(reports, &EvalReport::overall);
  out.explicit_cell = detail::aggregate_cell(reports, &EvalReport::explicit_cell);
  out.anaphoric_cell = detail::aggregate_cell(reports, &EvalReport::anaphoric_cell);
  out.implicit_cell = detail::aggregate_cell(reports, &EvalReport::implicit_cell);
  out.non_explicit = detail::aggregate_cell(reports, &EvalReport::non_explicit);

  std::size_t depth = SIZE_MAX;
  bool any_topk = false;
  for (const auto& r : reports) {
    if (r.topk.empty()) {
      depth = 0;
    } else {
      any_topk = true;
      depth = std::min(depth, r.topk.size());
    }
  }
  if (any_topk && depth > 0 && depth != SIZE_MAX) {
    for (std::size_t k = 0; k < depth; ++k) {
      AggregateCell cell;
      std::vector<double> values;
      for (const auto& r : reports) {
        values.push_back(r.topk[k].accuracy());
        cell.total_count += r.topk[k].total;
      }
      cell.folds = values.size();
      double sum = 0.0;
      for (double v : values) sum += v;
      cell.mean = sum / static_cast<double>(values.size());
      std::sort(values.begin(), values.end());
      std::size_t n = values.size();
      cell.median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
      out.topk.push_back(cell);
    }
  }
  return out;
}

// --- serialization and the human-readable table ---

inline nlohmann::ordered_json to_json(const EvalCell& c) {
  return {{"correct", c.correct}, {"total", c.total}, {"accuracy", c.accuracy()}};
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["split"] = r.split_name;
  j["fold"] = r.fold_index;
  j["overall"] = to_json(r.overall);
  j["explicit"] = to_json(r.explicit_cell);
  j["anaphoric"] = to_json(r.anaphoric_cell);
  j["implicit"] = to_json(r.implicit_cell);
  j["non_explicit"] = to_json(r.non_explicit);
  auto& topk = j["topk"] = nlohmann::ordered_json::array();
  for (const auto& cell : r.topk) topk.push_back(to_json(cell));
  return j;
}

inline nlohmann::ordered_json to_json(const AggregateReport& r) {
  auto cell = [](const AggregateCell& c) {
    return nlohmann::ordered_json{
        {"mean", c.mean}, {"median", c.median}, {"folds", c.folds}, {"count", c.total_count}};
  };
  nlohmann::ordered_json j;
  j["n_folds"] = r.n_folds;
  j["overall"] = cell(r.overall);
  j["explicit"] = cell(r.explicit_cell);
  j["anaphoric"] = cell(r.anaphoric_cell);
  j["implicit"] = cell(r.implicit_cell);
  j["non_explicit"] = cell(r.non_explicit);
  auto& topk = j["topk"] = nlohmann::ordered_json::array();
  for (const auto& c : r.topk) topk.push_back(cell(c));
  auto& folds = j["folds"] = nlohmann::ordered_json::array();
  for (const auto& f : r.folds) folds.push_back(to_json(f));
  return j;
}

// mean/median layout, one row per cell
inline std::string format_table(const AggregateReport& r) {
  auto fmt = [](const AggregateCell& c) {
    if (!c.defined()) return std::string("   -/-  ");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f/%.2f", c.mean, c.median);
    return std::string(buf);
  };
  std::string out;
  out += "cell           mean/median   n\n";
  auto row = [&](const char* name, const AggregateCell& c) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-14s %-12s %zu\n", name, fmt(c).c_str(), c.total_count);
    out += buf;
  };
  row("total", r.overall);
  row("non-explicit", r.non_explicit);
  row("explicit", r.explicit_cell);
  row("anaphoric", r.anaphoric_cell);
  row("implicit", r.implicit_cell);
  for (std::size_t k = 0; k < r.topk.size(); ++k) {
    std::string name = "top-" + std::to_string(k + 1);
    row(name.c_str(), r.topk[k]);
  }
  return out;
}

}  // namespace sig
