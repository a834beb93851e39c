#include <doctest.h>

#include "etp/text.hpp"

using namespace etp;

TEST_CASE("tokenize_words splits punctuation off word boundaries") {
    auto toks = text::tokenize_words("Earl Scruggs was a musician who played banjo.");
    REQUIRE(toks.size() == 9);
    CHECK(toks[0] == "Earl");
    CHECK(toks[7] == "banjo");
    CHECK(toks[8] == ".");
}

TEST_CASE("tokenize_words keeps interior apostrophes and hyphens") {
    auto toks = text::tokenize_words("it's a well-known claim, \"quoted\".");
    CHECK(toks[0] == "it's");
    CHECK(toks[2] == "well-known");
    CHECK(toks[3] == "claim");
    CHECK(toks[4] == ",");
    CHECK(toks[5] == "\"");
    CHECK(toks[6] == "quoted");
}

TEST_CASE("tokenize_words on empty and whitespace input") {
    CHECK(text::tokenize_words("").empty());
    CHECK(text::tokenize_words("  \t\n ").empty());
}

TEST_CASE("is_punct_token") {
    CHECK(text::is_punct_token("."));
    CHECK(text::is_punct_token("!?"));
    CHECK_FALSE(text::is_punct_token("a."));
    CHECK_FALSE(text::is_punct_token(""));
}

TEST_CASE("fnv1a64 is stable") {
    CHECK(text::fnv1a64("") == 1469598103934665603ULL);
    CHECK(text::fnv1a64("a") == text::fnv1a64("a"));
    CHECK(text::fnv1a64("a") != text::fnv1a64("b"));
}

TEST_CASE("trim and join") {
    CHECK(text::trim("  x y\t") == "x y");
    CHECK(text::join({"a", "b"}, "|") == "a|b");
    CHECK(text::join({}, "|") == "");
}
