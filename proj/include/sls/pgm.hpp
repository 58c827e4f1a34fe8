#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sls {

// 8-bit grayscale raster, row-major. Used both for images (gray levels) and
// for label maps (class index as gray value, 255 = ignore).
struct GrayImage {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> pixels;

  bool operator==(const GrayImage& o) const { return h == o.h && w == o.w && pixels == o.pixels; }
};

// Binary portable graymap (P5), maxval 255. Parse errors carry byte offsets.
GrayImage parse_pgm(const std::string& bytes, const std::string& origin);
std::string serialize_pgm(const GrayImage& img);

GrayImage read_pgm(const std::string& path);
void write_pgm(const GrayImage& img, const std::string& path);

// Label maps share the P5 container.
inline GrayImage read_label_map(const std::string& path) { return read_pgm(path); }
inline void write_label_map(const GrayImage& img, const std::string& path) { write_pgm(img, path); }

}  // namespace sls
