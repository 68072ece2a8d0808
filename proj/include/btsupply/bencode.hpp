#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace btsup::bencode {

enum class ErrorKind { malformed_syntax, depth_limit_exceeded };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

// Bencode value tree. Dictionaries preserve the key order they were built or
// decoded with; encode() always emits keys in ascending raw-byte order, so an
// info-dictionary received with non-canonical ordering must be kept as raw
// bytes when its digest matters.
class Value {
public:
    using List = std::vector<Value>;
    using Dict = std::vector<std::pair<std::string, Value>>;

    Value() : v_(int64_t{0}) {}
    Value(int64_t i) : v_(i) {}
    Value(int i) : v_(int64_t{i}) {}
    Value(std::string bytes) : v_(std::move(bytes)) {}
    Value(std::string_view bytes) : v_(std::string(bytes)) {}
    Value(const char* bytes) : v_(std::string(bytes)) {}
    Value(List list) : v_(std::move(list)) {}
    Value(Dict dict) : v_(std::move(dict)) {}

    static Value dict(std::initializer_list<std::pair<std::string, Value>> kv) {
        Dict d;
        d.reserve(kv.size());
        for (const auto& p : kv) d.push_back(p);
        return Value(std::move(d));
    }
    static Value list(std::initializer_list<Value> items) { return Value(List(items)); }

    bool is_int() const { return std::holds_alternative<int64_t>(v_); }
    bool is_bytes() const { return std::holds_alternative<std::string>(v_); }
    bool is_list() const { return std::holds_alternative<List>(v_); }
    bool is_dict() const { return std::holds_alternative<Dict>(v_); }

    int64_t as_int() const { return get<int64_t>("integer"); }
    const std::string& as_bytes() const { return get<std::string>("byte string"); }
    const List& as_list() const { return get<List>("list"); }
    const Dict& as_dict() const { return get<Dict>("dict"); }
    List& as_list() { return const_cast<List&>(get<List>("list")); }
    Dict& as_dict() { return const_cast<Dict&>(get<Dict>("dict")); }

    // Dict lookup; nullptr when this is not a dict or the key is absent.
    const Value* find(std::string_view key) const;
    // Insert or replace; keeps first-seen position on replace.
    void set(std::string_view key, Value v);

    // Structural equality: dict comparison is order-insensitive.
    bool operator==(const Value& other) const;
    bool operator!=(const Value& other) const { return !(*this == other); }

private:
    template <typename T>
    const T& get(const char* what) const {
        const T* p = std::get_if<T>(&v_);
        if (!p) throw Error(ErrorKind::malformed_syntax, std::string("bencode value is not a ") + what);
        return *p;
    }

    std::variant<int64_t, std::string, List, Dict> v_;
};

struct DecodeOptions {
    size_t max_depth = 64;
};

struct Decoded {
    Value value;
    size_t consumed = 0;
    // False when any dict in the tree arrived with keys out of ascending
    // raw-byte order. Re-encoding such a value canonicalizes it.
    bool canonical = true;
};

// Decodes the first complete value; trailing bytes are not an error.
// Throws Error on malformed input or when nesting exceeds max_depth.
Decoded decode(std::string_view data, const DecodeOptions& opts = {});

// Canonical serialization: dict keys emitted in ascending raw-byte order.
std::string encode(const Value& v);

} // namespace btsup::bencode
