#include "webgym/text.hpp"

#include <doctest.h>

using namespace webgym;

TEST_SUITE("text") {

TEST_CASE("tokenize lowercases and strips punctuation") {
    CHECK(tokenize("Hello, World! 42") == std::vector<std::string>{"hello", "world", "42"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("...").empty());
}

TEST_CASE("sentence split covers punctuation and newlines") {
    const auto s = split_sentences("First one. Second two!\nThird line\nFourth? Yes.");
    REQUIRE(s.size() == 5);
    CHECK(s[0] == "First one.");
    CHECK(s[1] == "Second two!");
    CHECK(s[2] == "Third line");
    CHECK(s[3] == "Fourth?");
    CHECK(s[4] == "Yes.");
}

TEST_CASE("dot inside a url does not end a sentence") {
    const auto s = split_sentences("See https://a.example/x for more. Done.");
    REQUIRE(s.size() == 2);
    CHECK(s[0] == "See https://a.example/x for more.");
}

TEST_CASE("first_sentence returns whole text when no boundary") {
    CHECK(first_sentence("no boundary here") == "no boundary here");
    CHECK(first_sentence("a. b. c.") == "a.");
}

TEST_CASE("approx_token_count counts whitespace chunks") {
    CHECK(approx_token_count("") == 0);
    CHECK(approx_token_count("one") == 1);
    CHECK(approx_token_count("  a b\tc\nd  ") == 4);
}

TEST_CASE("contains_token_phrase matches whole tokens only") {
    CHECK(contains_token_phrase("show me how to do it", "how"));
    CHECK_FALSE(contains_token_phrase("showcase of results", "how"));
    CHECK(contains_token_phrase("the most recent update", "most recent"));
    CHECK_FALSE(contains_token_phrase("the most magnificent recent", "most recent"));
}

TEST_CASE("utf8_prefix never splits a multi-byte sequence") {
    const std::string s = "ab\xE4\xB8\xAD";  // 'ab' + one 3-byte char
    CHECK(utf8_prefix(s, 5) == s);
    CHECK(utf8_prefix(s, 4) == "ab");
    CHECK(utf8_prefix(s, 3) == "ab");
    CHECK(utf8_prefix(s, 2) == "ab");
}

}  // TEST_SUITE
