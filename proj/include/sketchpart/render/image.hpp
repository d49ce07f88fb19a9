#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sketchpart::render {

/// Grayscale image, row-major, values in [0,1]. For sketches 0 is ink and
/// 1 is background.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, double fill = 1.0) : width(w), height(h), pixels(w * h, fill) {}

  double& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  bool empty() const { return pixels.empty(); }

  bool operator==(const Image&) const = default;
};

inline constexpr std::size_t kSketchSize = 256;
inline constexpr double kInkThreshold = 0.5;

/// A sketch is a kSketchSize^2 image.
using Sketch = Image;

bool is_sketch(const Image& image);
/// Pixels below kInkThreshold.
std::size_t ink_count(const Image& image);
/// Maximum absolute per-pixel difference; images must share dimensions.
double max_abs_diff(const Image& a, const Image& b);

/// 8-bit grayscale PNG. Colour or alpha inputs are converted to gray over
/// a white background.
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);
std::string encode_png(const Image& image);
Image decode_png(const std::string& bytes);

/// Image quantized to 8 bits as it would round-trip through PNG.
Image quantize8(const Image& image);

std::string base64_encode(const std::string& bytes);
/// Throws ParseError on malformed input.
std::string base64_decode(const std::string& text);

}  // namespace sketchpart::render
