#include "webgym/text.hpp"

#include "webgym/hash.hpp"

#include <algorithm>
#include <cctype>

namespace webgym {

namespace {

bool is_token_char(unsigned char c) {
    return std::isalnum(c) != 0 || c >= 0x80;
}

bool is_space(unsigned char c) {
    return std::isspace(c) != 0;
}

}  // namespace

std::string hex64(std::uint64_t v) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kHex[v & 0xF];
        v >>= 4;
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (is_token_char(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::size_t approx_token_count(std::string_view text) {
    std::size_t n = 0;
    bool in_chunk = false;
    for (unsigned char c : text) {
        if (is_space(c)) {
            in_chunk = false;
        } else if (!in_chunk) {
            in_chunk = true;
            ++n;
        }
    }
    return n;
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '\n') {
            std::string t = trim(cur);
            if (!t.empty()) out.push_back(std::move(t));
            cur.clear();
            continue;
        }
        cur.push_back(c);
        if (c == '.' || c == '!' || c == '?') {
            bool at_end = i + 1 >= text.size();
            if (at_end || is_space(static_cast<unsigned char>(text[i + 1]))) {
                std::string t = trim(cur);
                if (!t.empty()) out.push_back(std::move(t));
                cur.clear();
            }
        }
    }
    std::string t = trim(cur);
    if (!t.empty()) out.push_back(std::move(t));
    return out;
}

std::string first_sentence(std::string_view text) {
    auto sentences = split_sentences(text);
    if (sentences.empty()) return std::string(trim(text));
    return sentences.front();
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string utf8_prefix(std::string_view s, std::size_t max_bytes) {
    if (s.size() <= max_bytes) return std::string(s);
    std::size_t end = max_bytes;
    while (end > 0 && (static_cast<unsigned char>(s[end]) & 0xC0) == 0x80) --end;
    return std::string(s.substr(0, end));
}

bool contains_token_phrase(std::string_view haystack, std::string_view needle) {
    const auto h = tokenize(haystack);
    const auto n = tokenize(needle);
    if (n.empty() || h.size() < n.size()) return false;
    for (std::size_t i = 0; i + n.size() <= h.size(); ++i) {
        if (std::equal(n.begin(), n.end(), h.begin() + static_cast<std::ptrdiff_t>(i))) {
            return true;
        }
    }
    return false;
}

}  // namespace webgym
