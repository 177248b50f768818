#pragma once

// Tokenization contract. The backend owns tokenization; every other module
// traffics in text plus backend-reported token counts. Sequence markers and
// the mask placeholder are backend-native: the template layer never
// hard-codes marker strings.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sig {

using TokenId = std::int32_t;

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  // Surface pieces of plain text, no specials. Counting and truncation work
  // on pieces so they stay independent of the id vocabulary.
  virtual std::vector<std::string> pieces(std::string_view text) const = 0;
  virtual std::string join_pieces(std::span<const std::string> pieces) const = 0;

  std::size_t count_tokens(std::string_view text) const { return pieces(text).size(); }

  // The literal placeholder inserted into source text for a mask slot.
  virtual std::string mask_text() const = 0;

  // Marker tokens encode_source adds around the text (abstract [CLS]/[SEP]).
  virtual std::size_t source_overhead() const = 0;

  virtual std::vector<TokenId> encode(std::string_view text) const = 0;
  virtual std::vector<TokenId> encode_source(std::string_view text) const = 0;

  // Exactly the tokens of the target template output: scoring runs over
  // these and nothing else. Training appends terminator_id() when present.
  virtual std::vector<TokenId> encode_target(std::string_view text) const = 0;
  virtual std::optional<TokenId> terminator_id() const { return std::nullopt; }

  virtual std::string decode(std::span<const TokenId> ids) const = 0;
  virtual std::size_t vocab_size() const = 0;
};

}  // namespace sig
