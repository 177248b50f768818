#pragma once

// PDNC-style adapter. Expected layout (documented in docs/pdnc_format.md):
//
//   <root>/<novel_id>/character_info.csv
//   <root>/<novel_id>/quotation_info.csv
//   <root>/<novel_id>/novel_text.txt        (only for byte-offset contexts)
//
// character_info.csv columns (case-insensitive, extras ignored):
//   id (optional; defaults to the name), name | character | main name,
//   aliases (';'-separated, optional), gender (optional)
// quotation_info.csv columns:
//   qid | quote id | id, qtext | text | quote, qtype | quote type | type,
//   speaker, addressees (';'-separated, optional), and either
//   leftcontext/rightcontext or startbyte/endbyte into novel_text.txt.
//
// Speaker and addressee labels are names resolved against the roster.
// Records with multiple simultaneous speakers (';'-separated) are rejected.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sig/corpus.hpp"
#include "sig/csv.hpp"

namespace sig {

namespace detail {

inline std::vector<std::string> split_list(std::string_view s, char sep = ';') {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      std::string t = trim(cur);
      if (!t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  std::string t = trim(cur);
  if (!t.empty()) out.push_back(t);
  return out;
}

// name -> character_id lookup over canonical names and aliases
class NameIndex {
 public:
  explicit NameIndex(const CharacterRoster& roster) {
    for (const auto& e : roster.entries) {
      for (const auto& name : e.all_names()) {
        index_.emplace(normalize_name(name), e.character_id);
      }
    }
  }
  const std::string* resolve(std::string_view label) const {
    auto it = index_.find(normalize_name(label));
    return it == index_.end() ? nullptr : &it->second;
  }

 private:
  std::map<std::string, std::string> index_;
};

// Paragraph-level context windows around a byte span: the previous paragraph
// through the quote start on the left, the quote end through the end of the
// next paragraph on the right.
struct ParagraphContext {
  std::string left;
  std::string right;
};

inline ParagraphContext paragraph_context(const std::string& text, std::size_t begin,
                                          std::size_t end) {
  begin = std::min(begin, text.size());
  end = std::min(std::max(end, begin), text.size());
  std::vector<std::size_t> starts{0};
  for (std::size_t i = 0; i + 1 < text.size(); ++i) {
    if (text[i] == '\n' && text[i + 1] == '\n') {
      std::size_t j = i + 1;
      while (j < text.size() && text[j] == '\n') ++j;
      if (j < text.size()) starts.push_back(j);
      i = j - 1;
    }
  }
  auto paragraph_of = [&](std::size_t pos) {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      if (starts[i] <= pos) idx = i;
    }
    return idx;
  };
  std::size_t left_par = paragraph_of(begin);
  std::size_t left_from = starts[left_par == 0 ? 0 : left_par - 1];
  std::size_t right_par = paragraph_of(end);
  std::size_t right_to =
      right_par + 2 < starts.size() ? starts[right_par + 2] : text.size();
  ParagraphContext ctx;
  ctx.left = collapse_whitespace(text.substr(left_from, begin - left_from));
  ctx.right = collapse_whitespace(text.substr(end, right_to - end));
  return ctx;
}

}  // namespace detail

inline IngestResult parse_pdnc(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  IngestResult result;
  CorpusBuilder builder(&result.rejects);
  if (!fs::exists(root)) throw Error("PDNC directory '" + root.string() + "' does not exist");

  std::vector<fs::path> novel_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) novel_dirs.push_back(entry.path());
  }
  std::sort(novel_dirs.begin(), novel_dirs.end());

  for (const auto& dir : novel_dirs) {
    const std::string novel_id = dir.filename().string();
    fs::path roster_path = dir / "character_info.csv";
    fs::path quotes_path = dir / "quotation_info.csv";
    if (!fs::exists(quotes_path)) continue;  // not a novel directory
    if (!fs::exists(roster_path)) {
      throw Error("missing roster file for novel '" + novel_id + "': expected " +
                  roster_path.string());
    }
    builder.begin_novel(novel_id);

    {
      std::ifstream in(roster_path, std::ios::binary);
      csv::Table table(in);
      auto id_col = table.column_any({"id", "character id", "character_id"});
      auto name_col = table.column_any({"name", "character", "main name", "canonical_name"});
      if (!name_col) {
        throw Error("roster file for novel '" + novel_id + "' has no name column");
      }
      auto alias_col = table.column_any({"aliases", "alias"});
      auto gender_col = table.column_any({"gender"});
      for (const auto& row : table.rows()) {
        CharacterEntry e;
        e.canonical_name = trim(csv::Table::cell(row, name_col));
        e.character_id = trim(csv::Table::cell(row, id_col));
        if (e.character_id.empty()) e.character_id = e.canonical_name;
        e.aliases = detail::split_list(csv::Table::cell(row, alias_col));
        e.gender = gender_from_string(csv::Table::cell(row, gender_col));
        builder.add_character(novel_id, std::move(e));
      }
    }

    detail::NameIndex names(builder.novel(novel_id).roster);

    std::string novel_text;
    bool have_text = false;
    if (fs::exists(dir / "novel_text.txt")) {
      std::ifstream in(dir / "novel_text.txt", std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      novel_text = ss.str();
      have_text = true;
    }

    std::ifstream in(quotes_path, std::ios::binary);
    csv::Table table(in);
    auto qid_col = table.column_any({"qid", "quote id", "quote_id", "id"});
    auto text_col = table.column_any({"qtext", "text", "quote", "qspan"});
    auto type_col = table.column_any({"qtype", "quote type", "quote_type", "type"});
    auto speaker_col = table.column_any({"speaker"});
    auto addr_col = table.column_any({"addressees", "addressee"});
    auto left_col = table.column_any({"leftcontext", "left context", "left_context"});
    auto right_col = table.column_any({"rightcontext", "right context", "right_context"});
    auto start_col = table.column_any({"startbyte", "start byte", "start_byte"});
    auto end_col = table.column_any({"endbyte", "end byte", "end_byte"});
    if (!text_col || !speaker_col) {
      throw Error("quotation file for novel '" + novel_id + "' lacks text or speaker columns");
    }

    struct Row {
      QuotationInstance inst;
      long long start_byte = -1;
      std::size_t file_order = 0;
    };
    std::vector<Row> parsed;
    std::size_t row_no = 0;
    for (const auto& row : table.rows()) {
      ++row_no;
      Row r;
      r.file_order = row_no;
      QuotationInstance& q = r.inst;
      q.novel_id = novel_id;
      q.quote_id = trim(csv::Table::cell(row, qid_col));
      if (q.quote_id.empty()) q.quote_id = "q" + std::to_string(row_no);
      q.text = trim(csv::Table::cell(row, text_col));

      std::string type_raw = csv::Table::cell(row, type_col);
      auto type = quote_type_from_string(type_raw);
      if (!type) {
        // PDNC writes e.g. "Anaphoric (pronoun)"; take the first word
        auto words = split_whitespace(type_raw);
        if (!words.empty()) type = quote_type_from_string(words[0]);
      }
      if (!type) {
        builder.reject(novel_id, q.quote_id, "record",
                       "unknown quote type '" + type_raw + "'");
        continue;
      }
      q.quote_type = *type;

      std::string speaker_raw = csv::Table::cell(row, speaker_col);
      auto speaker_labels = detail::split_list(speaker_raw);
      if (speaker_labels.empty()) {
        builder.reject(novel_id, q.quote_id, "record", "empty speaker label");
        continue;
      }
      if (speaker_labels.size() > 1) {
        builder.reject(novel_id, q.quote_id, "record",
                       "multiple simultaneous speakers ('" + speaker_raw + "')");
        continue;
      }
      const std::string* speaker_id = names.resolve(speaker_labels[0]);
      if (!speaker_id) {
        builder.reject(novel_id, q.quote_id, "record",
                       "unresolvable speaker label '" + speaker_labels[0] + "'");
        continue;
      }
      q.speaker_id = *speaker_id;

      for (const auto& label : detail::split_list(csv::Table::cell(row, addr_col))) {
        const std::string* id = names.resolve(label);
        if (id) {
          q.addressee_ids.push_back(*id);
        } else {
          builder.reject(novel_id, q.quote_id, "warning",
                         "unresolvable addressee label '" + label + "'; dropped");
        }
      }

      if (left_col || right_col) {
        q.left_context = trim(csv::Table::cell(row, left_col));
        q.right_context = trim(csv::Table::cell(row, right_col));
      } else if (start_col && end_col && have_text) {
        try {
          std::size_t b = std::stoull(csv::Table::cell(row, start_col));
          std::size_t e = std::stoull(csv::Table::cell(row, end_col));
          r.start_byte = static_cast<long long>(b);
          auto ctx = detail::paragraph_context(novel_text, b, e);
          q.left_context = ctx.left;
          q.right_context = ctx.right;
        } catch (const std::exception&) {
          builder.reject(novel_id, q.quote_id, "warning",
                         "unparsable byte offsets; contexts left empty");
        }
      }
      parsed.push_back(std::move(r));
    }

    std::stable_sort(parsed.begin(), parsed.end(), [](const Row& a, const Row& b) {
      if (a.start_byte >= 0 && b.start_byte >= 0 && a.start_byte != b.start_byte) {
        return a.start_byte < b.start_byte;
      }
      return a.file_order < b.file_order;
    });
    for (auto& r : parsed) builder.add_quotation(novel_id, std::move(r.inst));
  }
  result.corpus = builder.take();
  return result;
}

}  // namespace sig
