#pragma once

// Normalized corpus data model: character rosters, quotation instances,
// per-novel groupings, and split specifications. All values are immutable
// after construction via CorpusBuilder; adapters route malformed records
// into a rejects report instead of dropping them silently.

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sig/text.hpp"

namespace sig {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Gender { Female, Male, Unknown };

inline std::string to_string(Gender g) {
  switch (g) {
    case Gender::Female: return "female";
    case Gender::Male: return "male";
    default: return "unknown";
  }
}

inline Gender gender_from_string(std::string_view s) {
  std::string n = normalize_name(s);
  if (n == "female" || n == "f" || n == "woman") return Gender::Female;
  if (n == "male" || n == "m" || n == "man") return Gender::Male;
  return Gender::Unknown;
}

enum class QuoteType { Explicit, Anaphoric, Implicit };

inline std::string to_string(QuoteType t) {
  switch (t) {
    case QuoteType::Explicit: return "explicit";
    case QuoteType::Anaphoric: return "anaphoric";
    default: return "implicit";
  }
}

inline std::optional<QuoteType> quote_type_from_string(std::string_view s) {
  std::string n = normalize_name(s);
  if (n == "explicit") return QuoteType::Explicit;
  if (n == "anaphoric") return QuoteType::Anaphoric;
  if (n == "implicit") return QuoteType::Implicit;
  return std::nullopt;
}

struct CharacterEntry {
  std::string character_id;
  std::string canonical_name;
  std::vector<std::string> aliases;
  Gender gender = Gender::Unknown;

  // canonical name plus aliases, in declaration order
  std::vector<std::string> all_names() const {
    std::vector<std::string> out;
    out.reserve(aliases.size() + 1);
    out.push_back(canonical_name);
    for (const auto& a : aliases) out.push_back(a);
    return out;
  }
};

struct CharacterRoster {
  std::string novel_id;
  std::vector<CharacterEntry> entries;

  const CharacterEntry* find(std::string_view character_id) const {
    for (const auto& e : entries) {
      if (e.character_id == character_id) return &e;
    }
    return nullptr;
  }

  // roster position, used as the deterministic tie-break everywhere
  std::optional<std::size_t> index_of(std::string_view character_id) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].character_id == character_id) return i;
    }
    return std::nullopt;
  }
};

// Violations of the roster invariants, if any. Empty means valid.
inline std::vector<std::string> roster_violations(const CharacterRoster& roster) {
  std::vector<std::string> issues;
  std::set<std::string> ids;
  std::map<std::string, std::string> seen_names;  // normalized -> character_id
  for (const auto& e : roster.entries) {
    if (e.canonical_name.empty()) {
      issues.push_back("character '" + e.character_id + "': empty canonical name");
      continue;
    }
    if (!ids.insert(e.character_id).second) {
      issues.push_back("duplicate character_id '" + e.character_id + "'");
    }
    std::string canon = normalize_name(e.canonical_name);
    for (const auto& a : e.aliases) {
      if (normalize_name(a) == canon) {
        issues.push_back("character '" + e.character_id + "': canonical name repeated in aliases");
      }
    }
    for (const auto& name : e.all_names()) {
      std::string n = normalize_name(name);
      auto [it, inserted] = seen_names.emplace(n, e.character_id);
      if (!inserted) {
        issues.push_back("name '" + name + "' of '" + e.character_id +
                         "' collides with a name of '" + it->second + "' after normalization");
      }
    }
  }
  return issues;
}

struct QuotationInstance {
  std::string novel_id;
  std::string quote_id;
  std::string text;           // the quotation q
  std::string left_context;   // c^l
  std::string right_context;  // c^r
  QuoteType quote_type = QuoteType::Implicit;
  std::string speaker_id;
  std::vector<std::string> addressee_ids;
};

struct Novel {
  CharacterRoster roster;
  std::vector<QuotationInstance> quotations;  // ordered by position in the source text
};

struct QuoteKey {
  std::string novel_id;
  std::string quote_id;
  auto operator<=>(const QuoteKey&) const = default;
};

struct NovelCorpus {
  std::map<std::string, Novel> novels;

  std::size_t quotation_count() const {
    std::size_t n = 0;
    for (const auto& [id, novel] : novels) n += novel.quotations.size();
    return n;
  }

  const Novel& novel(const std::string& novel_id) const {
    auto it = novels.find(novel_id);
    if (it == novels.end()) throw Error("unknown novel '" + novel_id + "'");
    return it->second;
  }

  const QuotationInstance* find_quotation(const QuoteKey& key) const {
    auto it = novels.find(key.novel_id);
    if (it == novels.end()) return nullptr;
    for (const auto& q : it->second.quotations) {
      if (q.quote_id == key.quote_id) return &q;
    }
    return nullptr;
  }
};

struct SplitSpec {
  std::string name;
  int fold_index = 0;
  std::set<QuoteKey> train_ids;
  std::set<QuoteKey> test_ids;

  std::set<std::string> train_novels() const {
    std::set<std::string> out;
    for (const auto& k : train_ids) out.insert(k.novel_id);
    return out;
  }
  std::set<std::string> test_novels() const {
    std::set<std::string> out;
    for (const auto& k : test_ids) out.insert(k.novel_id);
    return out;
  }
};

enum class SplitSide { Train, Test };

inline const std::set<QuoteKey>& side_ids(const SplitSpec& split, SplitSide side) {
  return side == SplitSide::Train ? split.train_ids : split.test_ids;
}

// One rejected or repaired source record. kind "record" means the record was
// dropped; "warning" means a field was repaired and the record kept.
struct RejectRecord {
  std::string novel_id;
  std::string record_id;
  std::string kind;  // "record" | "warning"
  std::string reason;
};

struct IngestResult {
  NovelCorpus corpus;
  std::vector<RejectRecord> rejects;
};

// Assembles a valid corpus from adapter output. Roster name collisions follow
// the first-wins policy; instances failing their invariants go to rejects.
class CorpusBuilder {
 public:
  explicit CorpusBuilder(std::vector<RejectRecord>* rejects) : rejects_(rejects) {}

  void begin_novel(const std::string& novel_id) {
    if (corpus_.novels.count(novel_id)) throw Error("duplicate novel_id '" + novel_id + "'");
    corpus_.novels[novel_id].roster.novel_id = novel_id;
  }

  void add_character(const std::string& novel_id, CharacterEntry entry) {
    Novel& novel = corpus_.novels.at(novel_id);
    auto& seen = seen_names_[novel_id];
    if (entry.canonical_name.empty()) {
      reject(novel_id, entry.character_id, "record", "empty canonical name");
      return;
    }
    if (novel.roster.find(entry.character_id)) {
      reject(novel_id, entry.character_id, "record", "duplicate character_id");
      return;
    }
    std::string canon = normalize_name(entry.canonical_name);
    if (seen.count(canon)) {
      reject(novel_id, entry.character_id, "record",
             "canonical name '" + entry.canonical_name + "' collides with an existing name");
      return;
    }
    std::vector<std::string> kept_aliases;
    std::set<std::string> local{canon};
    for (const auto& alias : entry.aliases) {
      std::string n = normalize_name(alias);
      if (n.empty() || n == canon || local.count(n) || seen.count(n)) {
        if (!n.empty() && n != canon) {
          reject(novel_id, entry.character_id, "warning",
                 "alias '" + alias + "' dropped (collides with an existing name)");
        }
        continue;
      }
      local.insert(n);
      kept_aliases.push_back(alias);
    }
    entry.aliases = std::move(kept_aliases);
    seen.insert(local.begin(), local.end());
    novel.roster.entries.push_back(std::move(entry));
  }

  void add_quotation(const std::string& novel_id, QuotationInstance inst) {
    Novel& novel = corpus_.novels.at(novel_id);
    if (inst.text.empty()) {
      reject(novel_id, inst.quote_id, "record", "empty quotation text");
      return;
    }
    if (!quote_ids_[novel_id].insert(inst.quote_id).second) {
      reject(novel_id, inst.quote_id, "record", "duplicate quote_id");
      return;
    }
    if (!novel.roster.find(inst.speaker_id)) {
      reject(novel_id, inst.quote_id, "record",
             "speaker '" + inst.speaker_id + "' does not resolve in the roster");
      return;
    }
    std::vector<std::string> kept;
    for (const auto& a : inst.addressee_ids) {
      if (novel.roster.find(a)) {
        kept.push_back(a);
      } else {
        reject(novel_id, inst.quote_id, "warning",
               "addressee '" + a + "' does not resolve in the roster; dropped");
      }
    }
    inst.addressee_ids = std::move(kept);
    novel.quotations.push_back(std::move(inst));
  }

  void reject(const std::string& novel_id, const std::string& record_id, std::string kind,
              std::string reason) {
    if (rejects_) rejects_->push_back({novel_id, record_id, std::move(kind), std::move(reason)});
  }

  // novel as assembled so far; adapters use it to resolve name labels
  const Novel& novel(const std::string& novel_id) const { return corpus_.novels.at(novel_id); }

  NovelCorpus take() { return std::move(corpus_); }

 private:
  NovelCorpus corpus_;
  std::map<std::string, std::set<std::string>> seen_names_;
  std::map<std::string, std::set<std::string>> quote_ids_;
  std::vector<RejectRecord>* rejects_;
};

}  // namespace sig
