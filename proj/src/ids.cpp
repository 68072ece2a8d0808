#include "btsupply/ids.hpp"

#include "btsupply/bytes.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

namespace btsup {

Key160 key160_from_bytes(std::string_view raw20) {
    if (raw20.size() != 20) throw std::invalid_argument("160-bit id must be exactly 20 octets");
    Key160 k;
    std::memcpy(k.data(), raw20.data(), 20);
    return k;
}

std::optional<Key160> key160_from_hex(std::string_view hex40) {
    auto raw = from_hex(hex40);
    if (!raw || raw->size() != 20) return std::nullopt;
    return key160_from_bytes(*raw);
}

std::string key160_to_bytes(const Key160& k) {
    return std::string(reinterpret_cast<const char*>(k.data()), k.size());
}

std::string key160_to_hex(const Key160& k) {
    return to_hex(key160_to_bytes(k));
}

bool Distance::is_zero() const {
    for (auto b : bytes)
        if (b != 0) return false;
    return true;
}

Distance xor_distance(const Key160& a, const Key160& b) {
    Distance d;
    for (size_t i = 0; i < 20; ++i) d.bytes[i] = a[i] ^ b[i];
    return d;
}

int shared_prefix_bits(const Key160& a, const Key160& b) {
    for (int i = 0; i < 20; ++i) {
        uint8_t x = a[i] ^ b[i];
        if (x != 0) return i * 8 + std::countl_zero(x);
    }
    return 160;
}

std::string Endpoint::to_string() const {
    return std::to_string((ip >> 24) & 0xff) + "." + std::to_string((ip >> 16) & 0xff) + "." +
           std::to_string((ip >> 8) & 0xff) + "." + std::to_string(ip & 0xff) + ":" +
           std::to_string(port);
}

std::string pack_compact_peer(const Endpoint& ep) {
    std::string out(6, '\0');
    out[0] = char((ep.ip >> 24) & 0xff);
    out[1] = char((ep.ip >> 16) & 0xff);
    out[2] = char((ep.ip >> 8) & 0xff);
    out[3] = char(ep.ip & 0xff);
    out[4] = char((ep.port >> 8) & 0xff);
    out[5] = char(ep.port & 0xff);
    return out;
}

std::optional<Endpoint> unpack_compact_peer(std::string_view raw6) {
    if (raw6.size() != 6) return std::nullopt;
    const auto* p = reinterpret_cast<const uint8_t*>(raw6.data());
    Endpoint ep;
    ep.ip = (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
    ep.port = uint16_t((uint16_t(p[4]) << 8) | uint16_t(p[5]));
    return ep;
}

} // namespace btsup
