#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace webgym {

// Normalized tokens: lowercased runs of alphanumeric characters; bytes >= 0x80
// (multi-byte UTF-8) count as token characters so non-ASCII text stays
// searchable. Everything else separates.
std::vector<std::string> tokenize(std::string_view text);

// Whitespace-delimited chunk count. Stands in for a model tokenizer; episode
// budgets are scaled to it.
std::size_t approx_token_count(std::string_view text);

// Deterministic sentence split: a sentence ends at '.', '!' or '?' followed by
// whitespace/end-of-text, or at a newline. Results are trimmed; empties
// dropped.
std::vector<std::string> split_sentences(std::string_view text);

// First sentence of `text`, or the whole trimmed text when no boundary exists.
std::string first_sentence(std::string_view text);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// True if `needle` occurs in `haystack` as a whole token (tokenized match,
// case-insensitive). Multi-token needles match as a consecutive run.
bool contains_token_phrase(std::string_view haystack, std::string_view needle);

// At most `max_bytes` of `s`, backing off so a multi-byte UTF-8 sequence is
// never cut in half.
std::string utf8_prefix(std::string_view s, std::size_t max_bytes);

}  // namespace webgym
