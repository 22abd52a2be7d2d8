#include "ode/png.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include <jpeglib.h>

#include "ode/error.hpp"

namespace ode {
namespace {

struct PngWriteState {
  Bytes out;
  std::string error;
};

void png_write_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* state = static_cast<PngWriteState*>(png_get_io_ptr(png));
  state->out.append(reinterpret_cast<const char*>(data), length);
}

void png_flush_noop(png_structp) {}

struct PngReadState {
  std::string_view bytes;
  std::size_t offset = 0;
  std::string error;
};

void png_read_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (length > state->bytes.size() - state->offset) png_error(png, "unexpected end of data");
  std::memcpy(data, state->bytes.data() + state->offset, length);
  state->offset += length;
}

template <typename State>
void png_fail(png_structp png, png_const_charp message) {
  auto* state = static_cast<State*>(png_get_error_ptr(png));
  state->error = message;
  png_longjmp(png, 1);
}

void png_warn_ignore(png_structp, png_const_charp) {}

void collect_text(png_structp png, png_infop info, std::map<std::string, std::string>& out) {
  png_textp text = nullptr;
  int count = 0;
  if (png_get_text(png, info, &text, &count) > 0) {
    for (int i = 0; i < count; ++i) {
      out[text[i].key] = std::string(text[i].text, text[i].text_length);
    }
  }
}

// libpng calls longjmp on errors; everything touched after setjmp lives in
// the caller-owned objects passed by reference.
bool encode_png_into(const RasterImage& image, const std::map<std::string, std::string>& text,
                     PngWriteState& state) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &state,
                                            png_fail<PngWriteState>, png_warn_ignore);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, &state, png_write_bytes, png_flush_noop);
  png_set_compression_level(png, 9);
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  std::vector<png_text> entries;
  for (const auto& [key, value] : text) {
    png_text t{};
    t.compression = PNG_TEXT_COMPRESSION_NONE;
    t.key = const_cast<char*>(key.c_str());
    t.text = const_cast<char*>(value.c_str());
    t.text_length = value.size();
    entries.push_back(t);
  }
  if (!entries.empty()) png_set_text(png, info, entries.data(), static_cast<int>(entries.size()));
  png_write_info(png, info);
  for (std::uint32_t y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.rgb.data() + std::size_t{y} * image.width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

bool inspect_png_into(std::string_view bytes, PngInfo& out, PngReadState& state) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &state,
                                           png_fail<PngReadState>, png_warn_ignore);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  png_infop end_info = info ? png_create_info_struct(png) : nullptr;
  if (end_info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, &end_info);
    return false;
  }
  state.bytes = bytes;
  png_set_read_fn(png, &state, png_read_bytes);
  png_read_info(png, info);
  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  out.color_type = png_get_color_type(png, info);
  // Decoding every row makes libpng verify CRCs and the compressed stream.
  const int passes = png_set_interlace_handling(png);
  png_read_update_info(png, info);
  std::vector<png_byte> row(png_get_rowbytes(png, info));
  for (int pass = 0; pass < passes; ++pass) {
    for (std::uint32_t y = 0; y < out.height; ++y) png_read_row(png, row.data(), nullptr);
  }
  png_read_end(png, end_info);
  collect_text(png, info, out.text);
  collect_text(png, end_info, out.text);
  png_destroy_read_struct(&png, &info, &end_info);
  return true;
}

}  // namespace

Bytes encode_png(const RasterImage& image, const std::map<std::string, std::string>& text) {
  if (image.width == 0 || image.height == 0) throw ValidationError("PNG dimensions must be positive");
  if (image.rgb.size() != std::size_t{image.width} * image.height * 3) {
    throw ValidationError("RGB buffer size does not match dimensions");
  }
  PngWriteState state;
  if (!encode_png_into(image, text, state)) {
    throw ValidationError("PNG encode failed: " + state.error);
  }
  return std::move(state.out);
}

bool looks_like_png(std::string_view bytes) noexcept {
  return bytes.size() >= 8 &&
         png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0;
}

bool looks_like_jpeg(std::string_view bytes) noexcept {
  return bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xff &&
         static_cast<unsigned char>(bytes[1]) == 0xd8 &&
         static_cast<unsigned char>(bytes[2]) == 0xff;
}

PngInfo inspect_png(std::string_view bytes) {
  if (!looks_like_png(bytes)) throw ParseError("missing PNG signature", 0);
  PngInfo info;
  PngReadState state;
  if (!inspect_png_into(bytes, info, state)) {
    throw ParseError("invalid PNG: " + state.error, state.offset);
  }
  return info;
}

namespace {

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* manager = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, manager->message);
  std::longjmp(manager->jump, 1);
}

// Separate frame so nothing modified between setjmp and longjmp lives in
// this function's registers; `out` is written through a reference.
bool decode_jpeg_into(std::string_view bytes, RasterImage& out, JpegErrorManager& errors) {
  jpeg_decompress_struct cinfo{};
  cinfo.err = jpeg_std_error(&errors.base);
  errors.base.error_exit = jpeg_error_exit;
  if (setjmp(errors.jump)) {
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char*>(bytes.data()),
               static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.width = cinfo.output_width;
  out.height = cinfo.output_height;
  out.rgb.resize(std::size_t{out.width} * out.height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.rgb.data() + std::size_t{cinfo.output_scanline} * out.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

}  // namespace

RasterImage decode_jpeg(std::string_view bytes) {
  if (!looks_like_jpeg(bytes)) throw ParseError("missing JPEG SOI marker", 0);
  RasterImage image;
  JpegErrorManager errors{};
  if (!decode_jpeg_into(bytes, image, errors)) {
    throw ParseError(std::string("JPEG decode failed: ") + errors.message, 0);
  }
  return image;
}

}  // namespace ode
