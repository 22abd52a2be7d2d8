#include <doctest.h>

#include <fstream>
#include <iterator>

#include "ode/error.hpp"
#include "ode/hashing.hpp"
#include "ode/png.hpp"
#include "ode/store.hpp"

using namespace ode;

TEST_CASE("sha256 matches published test vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("content_hash is the first 128 bits of sha256") {
  CHECK(content_hash("abc") == "ba7816bf8f01cfea414140de5dae2223");
  CHECK(content_hash("abc").size() == 32);
}

TEST_CASE("seed_from_hash reads the first 8 bytes big-endian") {
  CHECK(seed_from_hash("0000000000000001ffff") == 1u);
  CHECK(seed_from_hash("ba7816bf8f01cfea414140de5dae2223") == 0xba7816bf8f01cfeaULL);
  CHECK_THROWS_AS(seed_from_hash("abc"), ValidationError);
}

TEST_CASE("base64 follows the standard alphabet test vectors") {
  const std::pair<const char*, const char*> vectors[] = {
      {"", ""},          {"f", "Zg=="},         {"fo", "Zm8="},        {"foo", "Zm9v"},
      {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="}, {"foobar", "Zm9vYmFy"},
  };
  for (const auto& [plain, encoded] : vectors) {
    CHECK(base64_encode(plain) == encoded);
    CHECK(base64_decode(encoded) == plain);
  }
  std::string binary;
  for (int i = 0; i < 256; ++i) binary += static_cast<char>(i);
  CHECK(base64_decode(base64_encode(binary)) == binary);
  CHECK_THROWS_AS(base64_decode("Zm9v!"), ParseError);
  CHECK_THROWS_AS(base64_decode("Zm9"), ParseError);
}

namespace {

RasterImage gradient(std::uint32_t w, std::uint32_t h) {
  RasterImage img{w, h, std::vector<std::uint8_t>(std::size_t{w} * h * 3)};
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>(i * 7);
  return img;
}

}  // namespace

TEST_CASE("png encode/inspect round-trips size and text chunks") {
  const std::map<std::string, std::string> text{{"ode:labels", "dog\nfrisbee"},
                                                {"ode:prompt", "a picture of dog and frisbee"}};
  const Bytes png = encode_png(gradient(20, 10), text);
  CHECK(looks_like_png(png));
  const PngInfo info = inspect_png(png);
  CHECK(info.width == 20);
  CHECK(info.height == 10);
  CHECK(info.bit_depth == 8);
  CHECK(info.color_type == 2);
  CHECK(info.text == text);
  CHECK(encode_png(gradient(20, 10), text) == png);
}

TEST_CASE("png inspection rejects damaged files") {
  const Bytes png = encode_png(gradient(8, 8));
  CHECK_THROWS_AS(inspect_png(png.substr(0, png.size() / 2)), ParseError);
  CHECK_THROWS_AS(inspect_png("not a png at all"), ParseError);
  Bytes flipped = png;
  flipped[40] = static_cast<char>(flipped[40] ^ 0x55);  // inside IDAT: CRC mismatch
  CHECK_THROWS_AS(inspect_png(flipped), ParseError);
  try {
    inspect_png(png.substr(0, 30));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() <= 30);
  }
}

TEST_CASE("png encoder validates the raster") {
  CHECK_THROWS_AS(encode_png(RasterImage{0, 4, {}}), ValidationError);
  CHECK_THROWS_AS(encode_png(RasterImage{2, 2, std::vector<std::uint8_t>(5)}), ValidationError);
}

TEST_CASE("jpeg fixture decodes to its known size and colour") {
  const Bytes jpeg = read_file(std::string(ODE_TEST_DATA_DIR) + "/solid_16x8.jpg");
  CHECK(looks_like_jpeg(jpeg));
  CHECK_FALSE(looks_like_png(jpeg));
  const RasterImage img = decode_jpeg(jpeg);
  CHECK(img.width == 16);
  CHECK(img.height == 8);
  REQUIRE(img.rgb.size() == 16 * 8 * 3);
  // Solid (200,30,40) survives JPEG quantisation within a few levels.
  CHECK(std::abs(int(img.rgb[0]) - 200) <= 6);
  CHECK(std::abs(int(img.rgb[1]) - 30) <= 6);
  CHECK(std::abs(int(img.rgb[2]) - 40) <= 6);
  CHECK_THROWS_AS(decode_jpeg(jpeg.substr(0, 20)), ParseError);
  CHECK_THROWS_AS(decode_jpeg("plain text"), ParseError);
}
