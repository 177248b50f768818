#pragma once

// Prompt-template verbalization: the source side wraps a quotation and its
// contexts around an infix prompt and mask slots; the target side verbalizes
// a candidate speaker, optionally extended with an auxiliary clause
// (addressees, gender, or fiction). Rendering is pure and deterministic;
// segments are joined with single spaces.

#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sig/corpus.hpp"
#include "sig/tokenizer.hpp"

namespace sig {

enum class AuxTask { None, Addressee, Gender, Fiction };

inline std::string to_string(AuxTask t) {
  switch (t) {
    case AuxTask::Addressee: return "addressee";
    case AuxTask::Gender: return "gender";
    case AuxTask::Fiction: return "fiction";
    default: return "none";
  }
}

inline std::optional<AuxTask> aux_task_from_string(std::string_view s) {
  std::string n = normalize_name(s);
  if (n == "none" || n.empty()) return AuxTask::None;
  if (n == "addressee" || n == "addressees") return AuxTask::Addressee;
  if (n == "gender") return AuxTask::Gender;
  if (n == "fiction") return AuxTask::Fiction;
  return std::nullopt;
}

struct PromptTemplate {
  std::string name;
  std::string source_infix;        // inserted after the quotation
  bool use_mask = false;           // mask placeholder after source_infix
  std::string target_prefix;       // empty = the no-target-template variant
  AuxTask aux_task = AuxTask::None;
  std::string aux_source_infix;
  std::string aux_target_prefix;
};

inline void validate_template(const PromptTemplate& t) {
  if (t.aux_task != AuxTask::None && (t.aux_source_infix.empty() || t.aux_target_prefix.empty())) {
    throw Error("template '" + t.name + "': auxiliary task requires aux_source_infix and aux_target_prefix");
  }
}

struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Rendered model input with the boundary map of its salient segments.
struct RenderedSource {
  std::string text;
  SourceSpan quote;
  SourceSpan infix;                 // zero-width when the template has none
  std::vector<SourceSpan> masks;    // one per mask slot, in order
};

struct RenderedPair {
  RenderedSource source;
  std::string target_text;
};

namespace detail {

class SegmentWriter {
 public:
  SourceSpan append(std::string_view segment) {
    if (segment.empty()) return {text_.size(), text_.size()};
    if (!text_.empty()) text_.push_back(' ');
    SourceSpan span{text_.size(), text_.size() + segment.size()};
    text_.append(segment);
    return span;
  }
  std::string take() { return std::move(text_); }

 private:
  std::string text_;
};

}  // namespace detail

// Lays out: [start marker] c^l q infix [mask] [aux_infix mask] c^r [end
// marker], with the markers abstract (token-space, counted via
// tokenizer.source_overhead()). Contexts are truncated at their far ends;
// the remaining budget is split equally, odd token to c^l, and slack from a
// short context flows to the other side.
inline RenderedSource render_source(const QuotationInstance& instance, const PromptTemplate& t,
                                    const Tokenizer& tokenizer, std::size_t budget) {
  validate_template(t);
  const std::string mask = tokenizer.mask_text();

  std::size_t fixed = tokenizer.source_overhead();
  fixed += tokenizer.count_tokens(instance.text);
  fixed += tokenizer.count_tokens(t.source_infix);
  if (t.use_mask) fixed += tokenizer.count_tokens(mask);
  if (t.aux_task != AuxTask::None) {
    fixed += tokenizer.count_tokens(t.aux_source_infix);
    fixed += tokenizer.count_tokens(mask);
  }
  if (budget < fixed) {
    throw Error("source budget " + std::to_string(budget) +
                " cannot hold the quotation and template (" + std::to_string(fixed) +
                " tokens) for quote '" + instance.quote_id + "'");
  }
  const std::size_t remaining = budget - fixed;

  std::vector<std::string> left = tokenizer.pieces(instance.left_context);
  std::vector<std::string> right = tokenizer.pieces(instance.right_context);
  std::size_t keep_left = left.size();
  std::size_t keep_right = right.size();
  if (left.size() + right.size() > remaining) {
    std::size_t left_share = remaining / 2 + remaining % 2;
    std::size_t right_share = remaining / 2;
    if (left.size() < left_share) {
      left_share = left.size();
      right_share = remaining - left_share;
    } else if (right.size() < right_share) {
      right_share = right.size();
      left_share = remaining - right_share;
    }
    keep_left = left_share;
    keep_right = right_share;
  }

  std::span<const std::string> left_kept(left.data() + (left.size() - keep_left), keep_left);
  std::span<const std::string> right_kept(right.data(), keep_right);

  detail::SegmentWriter writer;
  RenderedSource out;
  writer.append(tokenizer.join_pieces(left_kept));
  out.quote = writer.append(instance.text);
  out.infix = writer.append(t.source_infix);
  if (t.use_mask) out.masks.push_back(writer.append(mask));
  if (t.aux_task != AuxTask::None) {
    writer.append(t.aux_source_infix);
    out.masks.push_back(writer.append(mask));
  }
  writer.append(tokenizer.join_pieces(right_kept));
  out.text = writer.take();
  return out;
}

// Gold-side payload for the auxiliary clause. Passing nullptr renders the
// inference-time target: the speaker clause only.
struct TargetAux {
  std::optional<std::vector<CharacterEntry>> addressees;  // roster order
  std::optional<std::string> fiction;                     // novel title/id
};

inline std::string render_target(const CharacterEntry& candidate, const PromptTemplate& t,
                                 const TargetAux* aux = nullptr) {
  validate_template(t);
  if (candidate.canonical_name.empty()) throw Error("candidate has no canonical name");
  std::string out;
  if (!t.target_prefix.empty()) {
    out = t.target_prefix;
    out.push_back(' ');
  }
  out += candidate.canonical_name;
  if (aux == nullptr || t.aux_task == AuxTask::None) return out;

  out.push_back(' ');
  out += t.aux_target_prefix;
  out.push_back(' ');
  switch (t.aux_task) {
    case AuxTask::Addressee: {
      if (!aux->addressees.has_value()) {
        throw Error("template '" + t.name + "' needs addressees to render a training target");
      }
      if (aux->addressees->empty()) {
        out += "none";
      } else {
        for (std::size_t i = 0; i < aux->addressees->size(); ++i) {
          if (i) out += ", ";
          out += (*aux->addressees)[i].canonical_name;
        }
      }
      break;
    }
    case AuxTask::Gender:
      out += to_string(candidate.gender);
      break;
    case AuxTask::Fiction:
      if (!aux->fiction.has_value()) {
        throw Error("template '" + t.name + "' needs the fiction title to render a training target");
      }
      out += *aux->fiction;
      break;
    case AuxTask::None:
      break;
  }
  return out;
}

// The six base source/target pairings plus the auxiliary-task variants of
// the best base pair. Names are stable identifiers usable as CLI values.
inline std::vector<PromptTemplate> template_catalog() {
  std::vector<PromptTemplate> out;
  auto base = [](std::string name, std::string infix, bool mask, std::string prefix) {
    PromptTemplate t;
    t.name = std::move(name);
    t.source_infix = std::move(infix);
    t.use_mask = mask;
    t.target_prefix = std::move(prefix);
    return t;
  };
  out.push_back(base("none-none", "", false, ""));
  out.push_back(base("replied_by-none", "replied by:", true, ""));
  out.push_back(base("replied_by-replied_by", "replied by:", true, "replied by:"));
  out.push_back(base("replied_by-speaker", "replied by:", true, "Speaker:"));
  out.push_back(base("speaker-replied_by", "Speaker:", true, "replied by:"));
  out.push_back(base("speaker-speaker", "Speaker:", true, "Speaker:"));

  auto aux = [&](std::string name, AuxTask task, std::string src_infix, std::string tgt_prefix) {
    PromptTemplate t = base(std::move(name), "replied by:", true, "Speaker:");
    t.aux_task = task;
    t.aux_source_infix = std::move(src_infix);
    t.aux_target_prefix = std::move(tgt_prefix);
    return t;
  };
  out.push_back(aux("sig", AuxTask::Addressee, "is listened by", "Addressee:"));
  out.push_back(aux("replied_by-speaker+gender", AuxTask::Gender, "whose gender is", "Gender:"));
  out.push_back(aux("replied_by-speaker+fiction", AuxTask::Fiction, "from the fiction", "Fiction:"));
  return out;
}

inline const std::string& default_template_name() {
  static const std::string name = "sig";
  return name;
}

inline PromptTemplate default_template() {
  for (auto& t : template_catalog()) {
    if (t.name == default_template_name()) return t;
  }
  throw Error("catalog is missing the default template");
}

inline PromptTemplate find_template(const std::string& name) {
  for (auto& t : template_catalog()) {
    if (t.name == name) return t;
  }
  throw Error("unknown template '" + name + "'");
}

// Template definitions from a JSON file: one object or an array of objects
// with keys matching the PromptTemplate fields.
inline std::vector<PromptTemplate> load_templates_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open template file '" + path.string() + "'");
  nlohmann::json j = nlohmann::json::parse(in);
  auto parse_one = [&](const nlohmann::json& o) {
    PromptTemplate t;
    t.name = o.at("name").get<std::string>();
    t.source_infix = o.value("source_infix", std::string{});
    t.use_mask = o.value("use_mask", false);
    t.target_prefix = o.value("target_prefix", std::string{});
    auto task = aux_task_from_string(o.value("aux_task", std::string{"none"}));
    if (!task) throw Error("template '" + t.name + "': unknown aux_task");
    t.aux_task = *task;
    t.aux_source_infix = o.value("aux_source_infix", std::string{});
    t.aux_target_prefix = o.value("aux_target_prefix", std::string{});
    validate_template(t);
    return t;
  };
  std::vector<PromptTemplate> out;
  if (j.is_array()) {
    for (const auto& o : j) out.push_back(parse_one(o));
  } else {
    out.push_back(parse_one(j));
  }
  return out;
}

// Catalog lookup with optional user-supplied definitions taking precedence.
inline PromptTemplate find_template(const std::string& name,
                                    const std::vector<PromptTemplate>& extra) {
  for (const auto& t : extra) {
    if (t.name == name) return t;
  }
  return find_template(name);
}

}  // namespace sig
