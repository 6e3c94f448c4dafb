#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rovo {

// 8-bit image, 1 (gray) or 3 (rgb) interleaved channels, row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<uint8_t> data;

  static Image create(int w, int h, int c, uint8_t fill = 0);

  uint8_t at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  uint8_t& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
};

// Bilinear sample with clamped borders; (x, y) in pixel-center coordinates.
double bilinear_sample(const Image& img, double x, double y, int channel);

// Binary portable pixmaps: P5 (gray) and P6 (rgb), maxval 255.
Image read_pnm(const std::string& path);
void write_pnm(const Image& img, const std::string& path);

}  // namespace rovo
