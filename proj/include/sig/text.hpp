#pragma once

// Small string utilities shared across the toolkit: name normalization for
// alias matching, word-boundary substring search, and content fingerprints.
// Case folding is ASCII-only; bytes >= 0x80 are passed through untouched and
// treated as word characters.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sig {

inline bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '_' || c == '\'' || c >= 0x80;
}

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) out.push_back(ascii_lower(c));
  return out;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space_byte(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space_byte(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_ws = false;
  for (char c : s) {
    if (is_space_byte(static_cast<unsigned char>(c))) {
      in_ws = true;
      continue;
    }
    if (in_ws && !out.empty()) out.push_back(' ');
    in_ws = false;
    out.push_back(c);
  }
  return out;
}

// Name normalization used for every alias join: case-fold, trim, collapse
// internal whitespace, strip trailing punctuation.
inline std::string normalize_name(std::string_view s) {
  std::string out = collapse_whitespace(trim(s));
  for (char& c : out) c = ascii_lower(c);
  auto is_trailing_punct = [](char c) {
    switch (c) {
      case '.': case ',': case ';': case ':': case '!': case '?':
      case '\'': case '"': case ')': case ']': case '}':
        return true;
      default:
        return false;
    }
  };
  while (!out.empty() && is_trailing_punct(out.back())) out.pop_back();
  while (!out.empty() && is_space_byte(static_cast<unsigned char>(out.back()))) out.pop_back();
  return out;
}

// Plain substring on already-normalized strings.
inline bool contains_substring(std::string_view hay, std::string_view needle) {
  return !needle.empty() && hay.find(needle) != std::string_view::npos;
}

// Word-boundary-aware substring: "ann" must not match inside "anne".
inline bool contains_word_boundary(std::string_view hay, std::string_view needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  std::size_t pos = 0;
  while ((pos = hay.find(needle, pos)) != std::string_view::npos) {
    bool left_ok = pos == 0 || !is_word_byte(static_cast<unsigned char>(hay[pos - 1]));
    std::size_t end = pos + needle.size();
    bool right_ok = end == hay.size() || !is_word_byte(static_cast<unsigned char>(hay[end]));
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space_byte(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t b = i;
    while (i < s.size() && !is_space_byte(static_cast<unsigned char>(s[i]))) ++i;
    if (i > b) out.emplace_back(s.substr(b, i - b));
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

// FNV-1a 64-bit, used for dataset fingerprints and cache keys.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : data) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string fnv1a64_hex(std::string_view data) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(data);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace sig
