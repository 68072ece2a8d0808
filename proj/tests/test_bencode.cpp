#include "doctest.h"

#include "btsupply/bencode.hpp"

#include <random>
#include <string>
#include <vector>

using namespace btsup;
using bencode::Value;

namespace {

// Random value generator for round-trip properties.
Value random_value(std::mt19937_64& rng, int depth) {
    auto random_bytes = [&rng]() {
        size_t len = rng() % 12;
        std::string s(len, '\0');
        for (auto& c : s) c = char(rng() & 0xff);
        return s;
    };
    int pick = depth >= 5 ? int(rng() % 2) : int(rng() % 4);
    switch (pick) {
    case 0:
        return Value(int64_t(rng()) >> (rng() % 40));
    case 1:
        return Value(random_bytes());
    case 2: {
        Value::List items;
        size_t n = rng() % 4;
        for (size_t i = 0; i < n; ++i) items.push_back(random_value(rng, depth + 1));
        return Value(std::move(items));
    }
    default: {
        Value v{Value::Dict{}};
        size_t n = rng() % 4;
        for (size_t i = 0; i < n; ++i) v.set(random_bytes(), random_value(rng, depth + 1));
        return v;
    }
    }
}

} // namespace

TEST_CASE("decode: definitional examples") {
    auto d = bencode::decode("i42e");
    CHECK(d.value.as_int() == 42);
    CHECK(d.consumed == 4);

    const std::string canonical_dict = "d3:cow3:moo4:spam4:eggse";
    auto d2 = bencode::decode(canonical_dict);
    CHECK(d2.consumed == canonical_dict.size());
    CHECK(d2.consumed == 24);
    REQUIRE(d2.value.is_dict());
    CHECK(d2.value.find("cow")->as_bytes() == "moo");
    CHECK(d2.value.find("spam")->as_bytes() == "eggs");
    CHECK(d2.canonical);

    CHECK_THROWS_AS(bencode::decode("i-0e"), bencode::Error);
}

TEST_CASE("encode: canonical forms") {
    CHECK(bencode::encode(Value(int64_t{0})) == "i0e");
    CHECK(bencode::encode(Value(int64_t{-7})) == "i-7e");
    CHECK(bencode::encode(Value::list({Value("x")})) == "l1:xe");
    // keys re-sorted on encode
    Value d = Value::dict({{"b", 1}, {"a", 2}});
    CHECK(bencode::encode(d) == "d1:ai2e1:bi1ee");
}

TEST_CASE("decode: trailing bytes are not an error") {
    auto d = bencode::decode("i1etrailing");
    CHECK(d.value.as_int() == 1);
    CHECK(d.consumed == 3);
}

TEST_CASE("decode: malformed corpus all rejected") {
    const std::vector<std::string> bad = {
        "",            // empty
        "i",           // truncated integer
        "ie",          // no digits
        "i12",         // unterminated
        "i-0e",        // negative zero
        "i-e",         // sign only
        "i01e",        // leading zero
        "i00e",        // leading zero
        "i--1e",       // double sign
        "i1-2e",       // junk inside
        "i9223372036854775808e",   // int64 overflow
        "i-9223372036854775809e",  // int64 underflow
        "5:abc",       // truncated string
        "5abc",        // missing colon
        "01:a",        // leading zero length
        ":abc",        // no length
        "l",           // unterminated list
        "li1e",        // unterminated list
        "d",           // unterminated dict
        "d3:cow",      // key without value
        "di1e3:cowe",  // non-string key
        "d1:a1:b1:a1:ce",  // duplicate key (sorted)
        "d1:b1:x1:a1:y1:a1:ze",  // duplicate key after unsorted
        "e",           // stray terminator
        "x",           // unknown type byte
        "2:a",         // truncated string payload
        "18446744073709551616:a",  // absurd length
        "9999999999:a" // length beyond input
    };
    for (const auto& s : bad) {
        CAPTURE(s);
        CHECK_THROWS_AS(bencode::decode(s), bencode::Error);
    }
}

TEST_CASE("decode: depth cap errors but never crashes") {
    std::string deep_ok, deep_bad;
    for (int i = 0; i < 63; ++i) deep_ok += "l";
    deep_ok += "i1e";
    for (int i = 0; i < 63; ++i) deep_ok += "e";
    CHECK_NOTHROW(bencode::decode(deep_ok));

    for (int i = 0; i < 80; ++i) deep_bad += "l";
    try {
        bencode::decode(deep_bad);
        FAIL("expected depth error");
    } catch (const bencode::Error& e) {
        CHECK(e.kind() == bencode::ErrorKind::depth_limit_exceeded);
    }

    bencode::DecodeOptions opts;
    opts.max_depth = 2;
    CHECK_THROWS_AS(bencode::decode("lllieeee", opts), bencode::Error);
}

TEST_CASE("decode: non-canonical dict order accepted and flagged") {
    // keys out of order: "b" before "a"
    auto d = bencode::decode("d1:bi1e1:ai2ee");
    CHECK(!d.canonical);
    // preserved order
    REQUIRE(d.value.as_dict().size() == 2);
    CHECK(d.value.as_dict()[0].first == "b");
    // re-encode canonicalizes
    CHECK(bencode::encode(d.value) == "d1:ai2e1:bi1ee");
}

TEST_CASE("property: encode/decode round trip, 10k random values") {
    std::mt19937_64 rng{42};
    for (int i = 0; i < 10000; ++i) {
        Value v = random_value(rng, 0);
        std::string enc = bencode::encode(v);
        auto dec = bencode::decode(enc);
        CHECK(dec.value == v);
        CHECK(dec.consumed == enc.size());
        CHECK(dec.canonical);
        // canonical inputs re-encode byte-identically
        CHECK(bencode::encode(dec.value) == enc);
    }
}

TEST_CASE("dict helpers") {
    Value v{Value::Dict{}};
    v.set("k", Value("v1"));
    v.set("k", Value("v2"));
    REQUIRE(v.as_dict().size() == 1);
    CHECK(v.find("k")->as_bytes() == "v2");
    CHECK(v.find("missing") == nullptr);
    CHECK(Value(int64_t{3}).find("x") == nullptr);

    // structural equality ignores insertion order
    Value a = Value::dict({{"x", 1}, {"y", 2}});
    Value b = Value::dict({{"y", 2}, {"x", 1}});
    CHECK(a == b);
    CHECK(a != Value::dict({{"x", 1}}));
}
