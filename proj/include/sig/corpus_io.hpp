#pragma once

// Canonical interchange formats: the normalized corpus (one JSON object per
// line, rosters first, then quotations in source order), SplitSpec records
// (one line per fold/side/novel/quote), and the rejects report. Byte-stable:
// keys are emitted in a fixed order so identical inputs serialize identically.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sig/corpus.hpp"

namespace sig {

using ordered_json = nlohmann::ordered_json;

inline ordered_json roster_record_json(const std::string& novel_id, const CharacterEntry& e) {
  ordered_json j;
  j["novel_id"] = novel_id;
  j["character_id"] = e.character_id;
  j["canonical_name"] = e.canonical_name;
  j["aliases"] = e.aliases;
  j["gender"] = to_string(e.gender);
  return j;
}

inline ordered_json quotation_record_json(const QuotationInstance& q) {
  ordered_json j;
  j["novel_id"] = q.novel_id;
  j["quote_id"] = q.quote_id;
  j["text"] = q.text;
  j["left_context"] = q.left_context;
  j["right_context"] = q.right_context;
  j["quote_type"] = to_string(q.quote_type);
  j["speaker_id"] = q.speaker_id;
  j["addressee_ids"] = q.addressee_ids;
  return j;
}

inline std::string serialize_corpus(const NovelCorpus& corpus) {
  std::ostringstream out;
  for (const auto& [novel_id, novel] : corpus.novels) {
    for (const auto& e : novel.roster.entries) {
      out << roster_record_json(novel_id, e).dump() << '\n';
    }
  }
  for (const auto& [novel_id, novel] : corpus.novels) {
    for (const auto& q : novel.quotations) {
      out << quotation_record_json(q).dump() << '\n';
    }
  }
  return out.str();
}

inline void save_corpus(const NovelCorpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus file '" + path.string() + "'");
  out << serialize_corpus(corpus);
}

// Parses the normalized line-delimited format. Malformed lines and records
// violating the data-model invariants are collected into the rejects report.
inline IngestResult load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file '" + path.string() + "'");
  IngestResult result;
  CorpusBuilder builder(&result.rejects);

  std::set<std::string> novels_seen;
  std::vector<QuotationInstance> quotes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      builder.reject("", "line " + std::to_string(line_no), "record", "malformed JSON line");
      continue;
    }
    try {
      std::string novel_id = j.at("novel_id").get<std::string>();
      if (j.contains("character_id")) {
        CharacterEntry e;
        e.character_id = j.at("character_id").get<std::string>();
        e.canonical_name = j.at("canonical_name").get<std::string>();
        if (j.contains("aliases")) e.aliases = j["aliases"].get<std::vector<std::string>>();
        e.gender = j.contains("gender") && !j["gender"].is_null()
                       ? gender_from_string(j["gender"].get<std::string>())
                       : Gender::Unknown;
        if (novels_seen.insert(novel_id).second) builder.begin_novel(novel_id);
        builder.add_character(novel_id, std::move(e));
      } else if (j.contains("quote_id")) {
        QuotationInstance q;
        q.novel_id = novel_id;
        q.quote_id = j.at("quote_id").get<std::string>();
        q.text = j.at("text").get<std::string>();
        q.left_context = j.value("left_context", std::string{});
        q.right_context = j.value("right_context", std::string{});
        auto type = quote_type_from_string(j.at("quote_type").get<std::string>());
        if (!type) {
          builder.reject(novel_id, q.quote_id, "record",
                         "unknown quote_type '" + j["quote_type"].get<std::string>() + "'");
          continue;
        }
        q.quote_type = *type;
        q.speaker_id = j.at("speaker_id").get<std::string>();
        if (j.contains("addressee_ids")) {
          q.addressee_ids = j["addressee_ids"].get<std::vector<std::string>>();
        }
        quotes.push_back(std::move(q));
      } else {
        builder.reject(novel_id, "line " + std::to_string(line_no), "record",
                       "record is neither a roster nor a quotation record");
      }
    } catch (const nlohmann::json::exception& e) {
      builder.reject("", "line " + std::to_string(line_no), "record",
                     std::string("missing or mistyped field: ") + e.what());
    }
  }
  for (auto& q : quotes) {
    const std::string novel_id = q.novel_id;
    if (!novels_seen.count(novel_id)) {
      builder.reject(novel_id, q.quote_id, "record", "no roster records for novel");
      continue;
    }
    builder.add_quotation(novel_id, std::move(q));
  }
  result.corpus = builder.take();
  return result;
}

inline std::string serialize_rejects(const std::vector<RejectRecord>& rejects) {
  std::ostringstream out;
  for (const auto& r : rejects) {
    ordered_json j;
    j["novel_id"] = r.novel_id;
    j["record_id"] = r.record_id;
    j["kind"] = r.kind;
    j["reason"] = r.reason;
    out << j.dump() << '\n';
  }
  return out.str();
}

inline void save_rejects(const std::vector<RejectRecord>& rejects,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write rejects file '" + path.string() + "'");
  out << serialize_rejects(rejects);
}

// --- SplitSpec serialization: one record per (fold, side, novel_id, quote_id).

inline std::string serialize_splits(const std::vector<SplitSpec>& splits) {
  std::ostringstream out;
  for (const auto& s : splits) {
    for (bool train_side : {true, false}) {
      const char* side = train_side ? "train" : "test";
      const auto& ids = train_side ? s.train_ids : s.test_ids;
      for (const auto& key : ids) {
        ordered_json j;
        j["name"] = s.name;
        j["fold"] = s.fold_index;
        j["side"] = side;
        j["novel_id"] = key.novel_id;
        j["quote_id"] = key.quote_id;
        out << j.dump() << '\n';
      }
    }
  }
  return out.str();
}

inline void save_splits(const std::vector<SplitSpec>& splits, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write splits file '" + path.string() + "'");
  out << serialize_splits(splits);
}

inline std::vector<SplitSpec> load_splits(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open splits file '" + path.string() + "'");
  std::map<int, SplitSpec> folds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error("malformed split record at line " + std::to_string(line_no));
    }
    int fold = j.at("fold").get<int>();
    SplitSpec& spec = folds[fold];
    spec.name = j.at("name").get<std::string>();
    spec.fold_index = fold;
    QuoteKey key{j.at("novel_id").get<std::string>(), j.at("quote_id").get<std::string>()};
    std::string side = j.at("side").get<std::string>();
    if (side == "train") {
      spec.train_ids.insert(std::move(key));
    } else if (side == "test") {
      spec.test_ids.insert(std::move(key));
    } else {
      throw Error("unknown split side '" + side + "' at line " + std::to_string(line_no));
    }
  }
  std::vector<SplitSpec> out;
  for (auto& [fold, spec] : folds) out.push_back(std::move(spec));
  return out;
}

}  // namespace sig
