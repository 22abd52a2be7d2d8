#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ode {

/// Raw byte payloads (PNG files, HTTP bodies) travel as std::string.
using Bytes = std::string;

/// Lowercase hex SHA-256 of `data` (64 chars).
std::string sha256_hex(std::string_view data);

/// Content address used for image refs, case ids and cache keys:
/// SHA-256 truncated to 128 bits, lowercase hex (32 chars).
std::string content_hash(std::string_view data);

/// Interprets the first 16 hex digits (8 bytes) of a hash as a big-endian
/// unsigned integer.
std::uint64_t seed_from_hash(std::string_view hex);

std::string base64_encode(std::string_view data);

/// Throws ParseError on characters outside the standard alphabet or bad
/// padding.
Bytes base64_decode(std::string_view text);

}  // namespace ode
