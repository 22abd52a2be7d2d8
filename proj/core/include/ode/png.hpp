#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ode/hashing.hpp"

namespace ode {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RasterImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> rgb;
};

struct PngInfo {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint8_t bit_depth = 0;
  std::uint8_t color_type = 0;
  /// tEXt chunks, keyword -> text. Later duplicates overwrite earlier ones.
  std::map<std::string, std::string> text;
};

/// Encodes an RGB raster as a non-interlaced PNG. `text` entries are written
/// as tEXt chunks in map order, so equal inputs give byte-identical files.
Bytes encode_png(const RasterImage& image,
                 const std::map<std::string, std::string>& text = {});

/// Full decode check: signature, chunk CRCs, image data and IEND. Throws
/// ParseError carrying the byte offset reached when decoding failed.
PngInfo inspect_png(std::string_view bytes);

bool looks_like_png(std::string_view bytes) noexcept;
bool looks_like_jpeg(std::string_view bytes) noexcept;

/// Decodes a baseline/progressive JPEG to RGB. Throws ParseError.
RasterImage decode_jpeg(std::string_view bytes);

}  // namespace ode
