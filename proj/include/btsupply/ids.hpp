#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace btsup {

using Key160 = std::array<std::uint8_t, 20>;

Key160 key160_from_bytes(std::string_view raw20);         // throws on wrong length
std::optional<Key160> key160_from_hex(std::string_view hex40);
std::string key160_to_bytes(const Key160& k);
std::string key160_to_hex(const Key160& k);

// 160-bit identifier of a DHT node.
struct NodeId {
    Key160 bytes{};

    auto operator<=>(const NodeId&) const = default;
    std::string hex() const { return key160_to_hex(bytes); }
    std::string raw() const { return key160_to_bytes(bytes); }
};

// SHA-1 digest of a torrent's info-dictionary.
struct InfoHash {
    Key160 bytes{};

    auto operator<=>(const InfoHash&) const = default;
    std::string hex() const { return key160_to_hex(bytes); }
    std::string raw() const { return key160_to_bytes(bytes); }
};

// XOR metric magnitude, ordered as a 160-bit big-endian unsigned value.
struct Distance {
    Key160 bytes{};
    auto operator<=>(const Distance&) const = default;
    bool is_zero() const;
};

Distance xor_distance(const Key160& a, const Key160& b);
inline Distance xor_distance(const NodeId& a, const NodeId& b) { return xor_distance(a.bytes, b.bytes); }

// Number of leading zero bits of xor(a, b); 160 when a == b.
int shared_prefix_bits(const Key160& a, const Key160& b);

// IPv4 endpoint, host byte order.
struct Endpoint {
    std::uint32_t ip = 0;
    std::uint16_t port = 0;

    auto operator<=>(const Endpoint&) const = default;
    std::string to_string() const;
};

std::string pack_compact_peer(const Endpoint& ep);                   // 6 octets
std::optional<Endpoint> unpack_compact_peer(std::string_view raw6);

struct Key160Hash {
    size_t operator()(const Key160& k) const {
        size_t h = 1469598103934665603ull;
        for (auto b : k) {
            h ^= b;
            h *= 1099511628211ull;
        }
        return h;
    }
};
struct InfoHashHash {
    size_t operator()(const InfoHash& ih) const { return Key160Hash{}(ih.bytes); }
};
struct NodeIdHash {
    size_t operator()(const NodeId& id) const { return Key160Hash{}(id.bytes); }
};

} // namespace btsup
