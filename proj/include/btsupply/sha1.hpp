#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace btsup {

using Sha1Digest = std::array<std::uint8_t, 20>;

Sha1Digest sha1(std::string_view data);

// HMAC-SHA1 per RFC 2104. Used for DHT announce tokens.
Sha1Digest hmac_sha1(std::string_view key, std::string_view message);

} // namespace btsup
