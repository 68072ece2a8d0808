#include "btsupply/bencode.hpp"

#include <algorithm>
#include <charconv>

namespace btsup::bencode {

namespace {

[[noreturn]] void fail(const std::string& msg) {
    throw Error(ErrorKind::malformed_syntax, msg);
}

struct Decoder {
    std::string_view in;
    size_t pos = 0;
    size_t max_depth;
    bool canonical = true;

    char peek() const {
        if (pos >= in.size()) fail("truncated value");
        return in[pos];
    }

    // Parses a decimal integer literal terminated by `term`. Rejects leading
    // zeros (except "0" itself), negative zero, and values outside int64.
    int64_t parse_int(char term) {
        size_t start = pos;
        bool neg = false;
        if (pos < in.size() && in[pos] == '-') {
            neg = true;
            ++pos;
        }
        size_t digits_start = pos;
        while (pos < in.size() && in[pos] >= '0' && in[pos] <= '9') ++pos;
        if (pos == digits_start) fail("integer literal has no digits");
        if (pos >= in.size() || in[pos] != term) fail("unterminated integer literal");
        std::string_view digits = in.substr(digits_start, pos - digits_start);
        if (digits.size() > 1 && digits[0] == '0') fail("leading zeros in integer literal");
        if (neg && digits == "0") fail("negative zero");
        int64_t out = 0;
        auto [p, ec] = std::from_chars(in.data() + start, in.data() + pos, out);
        if (ec != std::errc{} || p != in.data() + pos) fail("integer out of 64-bit range");
        ++pos; // consume terminator
        return out;
    }

    std::string parse_bytes() {
        size_t len_start = pos;
        while (pos < in.size() && in[pos] >= '0' && in[pos] <= '9') ++pos;
        if (pos == len_start) fail("expected string length");
        if (pos >= in.size() || in[pos] != ':') fail("unterminated string length");
        std::string_view digits = in.substr(len_start, pos - len_start);
        if (digits.size() > 1 && digits[0] == '0') fail("leading zeros in string length");
        uint64_t len = 0;
        auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), len);
        if (ec != std::errc{} || p != digits.data() + digits.size()) fail("string length out of range");
        ++pos; // ':'
        if (len > in.size() - pos) fail("truncated byte string");
        std::string out(in.substr(pos, len));
        pos += len;
        return out;
    }

    Value parse_value(size_t depth) {
        if (depth > max_depth)
            throw Error(ErrorKind::depth_limit_exceeded, "nesting depth exceeds cap");
        char c = peek();
        if (c == 'i') {
            ++pos;
            return Value(parse_int('e'));
        }
        if (c >= '0' && c <= '9') {
            return Value(parse_bytes());
        }
        if (c == 'l') {
            ++pos;
            Value::List items;
            while (peek() != 'e') items.push_back(parse_value(depth + 1));
            ++pos;
            return Value(std::move(items));
        }
        if (c == 'd') {
            ++pos;
            Value::Dict entries;
            std::string prev_key;
            bool first = true;
            while (peek() != 'e') {
                if (peek() < '0' || peek() > '9') fail("dict key must be a byte string");
                std::string key = parse_bytes();
                if (!first) {
                    if (key == prev_key) fail("duplicate dict key");
                    if (key < prev_key) {
                        // Out-of-order keys are accepted but flagged; exact
                        // duplicates anywhere in the dict are still rejected.
                        canonical = false;
                        for (const auto& [k, v] : entries)
                            if (k == key) fail("duplicate dict key");
                    }
                }
                Value v = parse_value(depth + 1);
                entries.emplace_back(std::move(key), std::move(v));
                prev_key = entries.back().first;
                first = false;
            }
            ++pos;
            return Value(std::move(entries));
        }
        fail("unexpected byte in bencode stream");
    }
};

void encode_into(const Value& v, std::string& out) {
    if (v.is_int()) {
        out.push_back('i');
        out.append(std::to_string(v.as_int()));
        out.push_back('e');
    } else if (v.is_bytes()) {
        const std::string& s = v.as_bytes();
        out.append(std::to_string(s.size()));
        out.push_back(':');
        out.append(s);
    } else if (v.is_list()) {
        out.push_back('l');
        for (const Value& item : v.as_list()) encode_into(item, out);
        out.push_back('e');
    } else {
        const Value::Dict& d = v.as_dict();
        std::vector<const std::pair<std::string, Value>*> sorted;
        sorted.reserve(d.size());
        for (const auto& e : d) sorted.push_back(&e);
        std::sort(sorted.begin(), sorted.end(),
                  [](const auto* a, const auto* b) { return a->first < b->first; });
        out.push_back('d');
        for (const auto* e : sorted) {
            out.append(std::to_string(e->first.size()));
            out.push_back(':');
            out.append(e->first);
            encode_into(e->second, out);
        }
        out.push_back('e');
    }
}

} // namespace

const Value* Value::find(std::string_view key) const {
    const Dict* d = std::get_if<Dict>(&v_);
    if (!d) return nullptr;
    for (const auto& [k, v] : *d)
        if (k == key) return &v;
    return nullptr;
}

void Value::set(std::string_view key, Value v) {
    Dict& d = as_dict();
    for (auto& [k, existing] : d) {
        if (k == key) {
            existing = std::move(v);
            return;
        }
    }
    d.emplace_back(std::string(key), std::move(v));
}

bool Value::operator==(const Value& other) const {
    if (v_.index() != other.v_.index()) return false;
    if (is_int()) return as_int() == other.as_int();
    if (is_bytes()) return as_bytes() == other.as_bytes();
    if (is_list()) return as_list() == other.as_list();
    const Dict& a = as_dict();
    const Dict& b = other.as_dict();
    if (a.size() != b.size()) return false;
    auto sorted_keys = [](const Dict& d) {
        std::vector<const std::pair<std::string, Value>*> v;
        v.reserve(d.size());
        for (const auto& e : d) v.push_back(&e);
        std::sort(v.begin(), v.end(), [](const auto* x, const auto* y) { return x->first < y->first; });
        return v;
    };
    auto sa = sorted_keys(a);
    auto sb = sorted_keys(b);
    for (size_t i = 0; i < sa.size(); ++i) {
        if (sa[i]->first != sb[i]->first) return false;
        if (!(sa[i]->second == sb[i]->second)) return false;
    }
    return true;
}

Decoded decode(std::string_view data, const DecodeOptions& opts) {
    if (data.empty()) fail("empty input");
    Decoder d{data, 0, opts.max_depth};
    Value v = d.parse_value(0);
    return Decoded{std::move(v), d.pos, d.canonical};
}

std::string encode(const Value& v) {
    std::string out;
    encode_into(v, out);
    return out;
}

} // namespace btsup::bencode
