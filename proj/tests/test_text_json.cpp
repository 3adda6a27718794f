#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mars/errors.hpp"
#include "mars/json_extract.hpp"
#include "mars/text.hpp"
#include "test_support.hpp"

using namespace mars;

TEST_CASE("trim and lowercase") {
    CHECK(trim("  a b \t\n") == "a b");
    CHECK(trim("") == "");
    CHECK(trim(" \n ") == "");
    CHECK(to_lower("MiXeD 42!") == "mixed 42!");
}

TEST_CASE("whitespace splitting drops empty pieces") {
    CHECK(split_whitespace("  one \t two\nthree ") ==
          std::vector<std::string>{"one", "two", "three"});
    CHECK(split_whitespace("   ").empty());
    CHECK(split("a,b,,c", ',') == std::vector<std::string>{"a", "b", "", "c"});
}

TEST_CASE("join") {
    std::vector<std::string> parts{"x", "y", "z"};
    CHECK(join(parts, "/") == "x/y/z");
    CHECK(join(std::vector<std::string>{}, "/") == "");
}

TEST_CASE("clip_utf8 never splits a multibyte sequence") {
    CHECK(clip_utf8("abcdef", 3) == "abc");
    CHECK(clip_utf8("abc", 10) == "abc");
    // "aé" is 'a' + 2-byte é; clipping at 2 must not keep half of é.
    const std::string s = "a\xc3\xa9z";
    CHECK(clip_utf8(s, 2) == "a");
    CHECK(clip_utf8(s, 3) == "a\xc3\xa9");
    // 4-byte emoji boundary
    const std::string emoji = "\xf0\x9f\x98\x80yz";
    CHECK(clip_utf8(emoji, 3) == "");
    CHECK(clip_utf8(emoji, 4) == "\xf0\x9f\x98\x80");
}

TEST_CASE("normalize_ws collapses runs and lowercases") {
    CHECK(normalize_ws("  The\tQuick \n Fox ") == "the quick fox");
    CHECK(normalize_ws("") == "");
    CHECK(normalize_ws("ONE") == "one");
}

TEST_CASE("fnv1a64 reference vectors") {
    // Standard FNV-1a 64-bit test vectors.
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("payload extraction accepts the wrapper corpus") {
    const auto canonical = nlohmann::json::parse(test::read_file(test::data_path(
        "payload_wrappers/canonical.json")));
    for (int i = 1; i <= 20; ++i) {
        char name[48];
        std::snprintf(name, sizeof(name), "payload_wrappers/valid_%02d.txt", i);
        CAPTURE(name);
        const std::string text = test::read_file(test::data_path(name));
        CHECK(extract_first_json_object(text) == canonical);
    }
}

TEST_CASE("payload extraction rejects malformed bodies") {
    for (int i = 1; i <= 10; ++i) {
        char name[48];
        std::snprintf(name, sizeof(name), "payload_wrappers/malformed_%02d.txt", i);
        CAPTURE(name);
        const std::string text = test::read_file(test::data_path(name));
        CHECK_THROWS_AS(extract_first_json_object(text), MalformedPayload);
    }
}

TEST_CASE("extraction returns the first object and honors quoted braces") {
    auto j = extract_first_json_object(R"({"a": "open { brace"} {"b": 2})");
    CHECK(j == nlohmann::json{{"a", "open { brace"}});
    auto k = extract_first_json_object(R"(text {"nested": {"x": 1}} tail)");
    CHECK(k == nlohmann::json{{"nested", {{"x", 1}}}});
    // Escaped quote inside a string must not terminate the literal.
    auto e = extract_first_json_object(R"({"a": "quote \" and } brace"})");
    CHECK(e["a"] == "quote \" and } brace");
}
