#include "btsupply/sha1.hpp"

#include <cstring>

namespace btsup {

namespace {

inline uint32_t rotl(uint32_t v, int n) { return (v << n) | (v >> (32 - n)); }

struct Sha1State {
    uint32_t h[5] = {0x67452301u, 0xefcdab89u, 0x98badcfeu, 0x10325476u, 0xc3d2e1f0u};
    uint64_t total_bits = 0;
    uint8_t block[64];
    size_t block_len = 0;

    void process_block(const uint8_t* p) {
        uint32_t w[80];
        for (int i = 0; i < 16; ++i) {
            w[i] = (uint32_t(p[i * 4]) << 24) | (uint32_t(p[i * 4 + 1]) << 16) |
                   (uint32_t(p[i * 4 + 2]) << 8) | uint32_t(p[i * 4 + 3]);
        }
        for (int i = 16; i < 80; ++i)
            w[i] = rotl(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);

        uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
        for (int i = 0; i < 80; ++i) {
            uint32_t f, k;
            if (i < 20) {
                f = (b & c) | (~b & d);
                k = 0x5a827999u;
            } else if (i < 40) {
                f = b ^ c ^ d;
                k = 0x6ed9eba1u;
            } else if (i < 60) {
                f = (b & c) | (b & d) | (c & d);
                k = 0x8f1bbcdcu;
            } else {
                f = b ^ c ^ d;
                k = 0xca62c1d6u;
            }
            uint32_t t = rotl(a, 5) + f + e + k + w[i];
            e = d;
            d = c;
            c = rotl(b, 30);
            b = a;
            a = t;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
    }

    void update(const void* data, size_t len) {
        const uint8_t* p = static_cast<const uint8_t*>(data);
        total_bits += uint64_t(len) * 8;
        while (len > 0) {
            size_t take = std::min(len, size_t(64) - block_len);
            std::memcpy(block + block_len, p, take);
            block_len += take;
            p += take;
            len -= take;
            if (block_len == 64) {
                process_block(block);
                block_len = 0;
            }
        }
    }

    Sha1Digest finish() {
        uint64_t bits = total_bits;
        uint8_t pad = 0x80;
        update(&pad, 1);
        uint8_t zero = 0;
        while (block_len != 56) update(&zero, 1);
        uint8_t len_be[8];
        for (int i = 0; i < 8; ++i) len_be[i] = uint8_t(bits >> (56 - i * 8));
        // Bypass update() so the length bytes do not recount into total_bits.
        std::memcpy(block + 56, len_be, 8);
        process_block(block);

        Sha1Digest out;
        for (int i = 0; i < 5; ++i) {
            out[i * 4] = uint8_t(h[i] >> 24);
            out[i * 4 + 1] = uint8_t(h[i] >> 16);
            out[i * 4 + 2] = uint8_t(h[i] >> 8);
            out[i * 4 + 3] = uint8_t(h[i]);
        }
        return out;
    }
};

} // namespace

Sha1Digest sha1(std::string_view data) {
    Sha1State s;
    s.update(data.data(), data.size());
    return s.finish();
}

Sha1Digest hmac_sha1(std::string_view key, std::string_view message) {
    uint8_t k[64] = {0};
    if (key.size() > 64) {
        Sha1Digest kd = sha1(key);
        std::memcpy(k, kd.data(), kd.size());
    } else {
        std::memcpy(k, key.data(), key.size());
    }
    std::string inner, outer;
    inner.reserve(64 + message.size());
    outer.reserve(64 + 20);
    for (int i = 0; i < 64; ++i) inner.push_back(char(k[i] ^ 0x36));
    inner.append(message);
    Sha1Digest ih = sha1(inner);
    for (int i = 0; i < 64; ++i) outer.push_back(char(k[i] ^ 0x5c));
    outer.append(reinterpret_cast<const char*>(ih.data()), ih.size());
    return sha1(outer);
}

} // namespace btsup
