#include "sketchpart/render/image.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sketchpart/errors.hpp"

namespace sketchpart::render {

bool is_sketch(const Image& image) {
  return image.width == kSketchSize && image.height == kSketchSize && image.pixels.size() == kSketchSize * kSketchSize;
}

std::size_t ink_count(const Image& image) {
  return static_cast<std::size_t>(
      std::count_if(image.pixels.begin(), image.pixels.end(), [](double v) { return v < kInkThreshold; }));
}

double max_abs_diff(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw ArgumentError("max_abs_diff: image sizes differ");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) worst = std::max(worst, std::abs(a.pixels[i] - b.pixels[i]));
  return worst;
}

namespace {

std::vector<png_byte> to_bytes(const Image& image) {
  std::vector<png_byte> bytes(image.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<png_byte>(std::lround(std::clamp(image.pixels[i], 0.0, 1.0) * 255.0));
  }
  return bytes;
}

Image from_bytes(std::size_t w, std::size_t h, const std::vector<png_byte>& bytes) {
  Image image(w, h);
  for (std::size_t i = 0; i < bytes.size(); ++i) image.pixels[i] = static_cast<double>(bytes[i]) / 255.0;
  return image;
}

png_image make_image_header(const Image& image) {
  png_image header{};
  header.version = PNG_IMAGE_VERSION;
  header.width = static_cast<png_uint_32>(image.width);
  header.height = static_cast<png_uint_32>(image.height);
  header.format = PNG_FORMAT_GRAY;
  return header;
}

Image finish_read(png_image& header) {
  header.format = PNG_FORMAT_GRAY;
  png_color white{255, 255, 255};
  std::vector<png_byte> bytes(PNG_IMAGE_SIZE(header));
  if (!png_image_finish_read(&header, &white, bytes.data(), 0, nullptr)) {
    const std::string msg = header.message;
    png_image_free(&header);
    throw ParseError("png decode: " + msg);
  }
  return from_bytes(header.width, header.height, bytes);
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << encode_png(image);
}

Image read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return decode_png(buf.str());
}

std::string encode_png(const Image& image) {
  if (image.empty()) throw ArgumentError("encode_png: empty image");
  auto header = make_image_header(image);
  auto bytes = to_bytes(image);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&header, nullptr, &size, 0, bytes.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("png encode: ") + header.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&header, out.data(), &size, 0, bytes.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("png encode: ") + header.message);
  }
  out.resize(size);
  return out;
}

Image decode_png(const std::string& bytes) {
  png_image header{};
  header.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&header, bytes.data(), bytes.size())) {
    throw ParseError(std::string("png decode: ") + header.message);
  }
  return finish_read(header);
}

Image quantize8(const Image& image) {
  Image out = image;
  for (auto& v : out.pixels) v = std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return out;
}

std::string base64_encode(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(const std::string& text) {
  std::string clean;
  clean.reserve(text.size());
  for (char ch : text) {
    if (!std::isspace(static_cast<unsigned char>(ch))) clean.push_back(ch);
  }
  if (clean.size() % 4 != 0) throw ParseError("base64: length is not a multiple of 4");
  std::string out(3 * clean.size() / 4 + 1, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(clean.data()), static_cast<int>(clean.size()));
  if (n < 0) throw ParseError("base64: invalid characters");
  std::size_t padding = 0;
  if (!clean.empty() && clean.back() == '=') ++padding;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

}  // namespace sketchpart::render
