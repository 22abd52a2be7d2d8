#include "ode/hashing.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <array>
#include <cctype>

#include "ode/error.hpp"

namespace ode {
namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

std::string to_hex(const unsigned char* data, std::size_t size) {
  std::string out;
  out.reserve(size * 2);
  for (std::size_t i = 0; i < size; ++i) {
    out.push_back(kHexDigits[data[i] >> 4]);
    out.push_back(kHexDigits[data[i] & 0x0f]);
  }
  return out;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(),
                 nullptr) != 1) {
    throw Error(ErrorKind::io, "sha256 digest failed");
  }
  return to_hex(digest.data(), length);
}

std::string content_hash(std::string_view data) {
  return sha256_hex(data).substr(0, 32);
}

std::uint64_t seed_from_hash(std::string_view hex) {
  if (hex.size() < 16) throw ValidationError("hash too short for seed derivation");
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < 16; ++i) {
    const int v = hex_value(hex[i]);
    if (v < 0) throw ValidationError("non-hex character in hash");
    value = (value << 4) | static_cast<std::uint64_t>(v);
  }
  return value;
}

std::string base64_encode(std::string_view data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int written =
      EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                      reinterpret_cast<const unsigned char*>(data.data()),
                      static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(written));
  return out;
}

Bytes base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) {
    throw ParseError("base64 length is not a multiple of 4", text.size());
  }
  std::size_t padding = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const bool alpha = std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '/';
    if (c == '=') {
      if (i + 2 < text.size()) throw ParseError("misplaced base64 padding", i);
      ++padding;
    } else if (!alpha || padding > 0) {
      throw ParseError("invalid base64 character", i);
    }
  }
  Bytes out(3 * (text.size() / 4), '\0');
  const int written =
      EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                      reinterpret_cast<const unsigned char*>(text.data()),
                      static_cast<int>(text.size()));
  if (written < 0) throw ParseError("base64 decode failed", 0);
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  out.resize(static_cast<std::size_t>(written) - padding);
  return out;
}

}  // namespace ode
