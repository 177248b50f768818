#pragma once

// WP-style adapter (single-novel corpora with a manually collected name
// list). Expected layout (documented in docs/wp_format.md):
//
//   <root>/name_list.txt     one role per line: "canonical" or
//                            "canonical<TAB>alias1;alias2"
//   <root>/instances.jsonl   one object per line with keys:
//                            id, text, left_context, right_context, speaker,
//                            optional quote_type, optional addressees
//
// Instances without a three-way quote type are marked implicit, so only
// total accuracy is meaningful for such corpora. A missing name list is a
// fatal error.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sig/corpus.hpp"
#include "sig/pdnc.hpp"

namespace sig {

inline IngestResult parse_wp(const std::filesystem::path& root,
                             const std::string& novel_id = "WP") {
  namespace fs = std::filesystem;
  fs::path names_path = root / "name_list.txt";
  fs::path instances_path = root / "instances.jsonl";
  if (!fs::exists(names_path)) {
    throw Error("missing name list for novel '" + novel_id + "': expected " +
                names_path.string());
  }
  if (!fs::exists(instances_path)) {
    throw Error("missing instances file: expected " + instances_path.string());
  }

  IngestResult result;
  CorpusBuilder builder(&result.rejects);
  builder.begin_novel(novel_id);

  {
    std::ifstream in(names_path, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      std::string stripped = trim(line);
      if (stripped.empty() || stripped[0] == '#') continue;
      CharacterEntry e;
      auto tab = stripped.find('\t');
      if (tab == std::string::npos) {
        e.canonical_name = stripped;
      } else {
        e.canonical_name = trim(stripped.substr(0, tab));
        e.aliases = detail::split_list(stripped.substr(tab + 1));
      }
      e.character_id = e.canonical_name;
      builder.add_character(novel_id, std::move(e));
    }
  }
  detail::NameIndex names(builder.novel(novel_id).roster);

  std::ifstream in(instances_path, std::ios::binary);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      builder.reject(novel_id, "line " + std::to_string(line_no), "record",
                     "malformed JSON line");
      continue;
    }
    QuotationInstance q;
    q.novel_id = novel_id;
    q.quote_id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>()
                                                         : "q" + std::to_string(line_no);
    q.text = j.value("text", j.value("quote", std::string{}));
    q.left_context = j.value("left_context", std::string{});
    q.right_context = j.value("right_context", std::string{});
    if (j.contains("quote_type")) {
      auto type = quote_type_from_string(j["quote_type"].get<std::string>());
      q.quote_type = type.value_or(QuoteType::Implicit);
    } else {
      q.quote_type = QuoteType::Implicit;
    }
    std::string speaker_label = j.value("speaker", std::string{});
    const std::string* speaker_id = names.resolve(speaker_label);
    if (!speaker_id) {
      builder.reject(novel_id, q.quote_id, "record",
                     "unresolvable speaker label '" + speaker_label + "'");
      continue;
    }
    q.speaker_id = *speaker_id;
    if (j.contains("addressees")) {
      for (const auto& a : j["addressees"]) {
        const std::string* id = names.resolve(a.get<std::string>());
        if (id) {
          q.addressee_ids.push_back(*id);
        } else {
          builder.reject(novel_id, q.quote_id, "warning",
                         "unresolvable addressee label '" + a.get<std::string>() + "'; dropped");
        }
      }
    }
    builder.add_quotation(novel_id, std::move(q));
  }
  result.corpus = builder.take();
  return result;
}

}  // namespace sig
