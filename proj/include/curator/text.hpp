#pragma once

#include <string>
#include <string_view>

#include "curator/rng.hpp"

namespace curator {

// Canonical form used for contamination matching and dedup: lowercase
// (ASCII), runs of whitespace collapsed to one space, trimmed. Input is
// assumed to already be NFC-normalized UTF-8; non-ASCII bytes pass through.
std::string normalize_text(std::string_view text);

inline Hash128 text_fingerprint(std::string_view text) {
  return fingerprint128(normalize_text(text));
}

// Character count of a UTF-8 string (code points, not bytes).
std::size_t utf8_length(std::string_view text);

// Truncates to at most max_chars code points, never splitting a sequence.
std::string utf8_truncate(std::string_view text, std::size_t max_chars);

}  // namespace curator
