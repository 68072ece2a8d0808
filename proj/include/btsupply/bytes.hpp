#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace btsup {

std::string to_hex(std::string_view bytes);
std::optional<std::string> from_hex(std::string_view hex);

// Strict UTF-8 validity check (rejects overlongs, surrogates, > U+10FFFF).
bool is_valid_utf8(std::string_view s);

} // namespace btsup
