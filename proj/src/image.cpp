#include "rovo/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace rovo {

Image Image::create(int w, int h, int c, uint8_t fill) {
  if (w <= 0 || h <= 0 || (c != 1 && c != 3)) {
    throw std::invalid_argument("Image::create: bad dimensions");
  }
  Image img;
  img.width = w;
  img.height = h;
  img.channels = c;
  img.data.assign(static_cast<size_t>(w) * h * c, fill);
  return img;
}

double bilinear_sample(const Image& img, double x, double y, int channel) {
  const double xc = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  const double yc = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(xc));
  const int y0 = static_cast<int>(std::floor(yc));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = xc - x0;
  const double fy = yc - y0;
  const double v00 = img.at(x0, y0, channel);
  const double v10 = img.at(x1, y0, channel);
  const double v01 = img.at(x0, y1, channel);
  const double v11 = img.at(x1, y1, channel);
  return (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
}

namespace {

// Skips whitespace and '#' comment lines between header tokens.
int next_header_int(std::istream& in) {
  while (true) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  in >> v;
  if (!in) throw std::runtime_error("pnm: truncated header");
  return v;
}

}  // namespace

Image read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("pnm: cannot open " + path);
  std::string magic;
  in >> magic;
  int channels;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw std::runtime_error("pnm: unsupported magic '" + magic + "' in " + path);
  }
  const int w = next_header_int(in);
  const int h = next_header_int(in);
  const int maxval = next_header_int(in);
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw std::runtime_error("pnm: unsupported header in " + path);
  }
  in.get();  // single whitespace after maxval
  Image img = Image::create(w, h, channels);
  in.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size())) {
    throw std::runtime_error("pnm: truncated pixel data in " + path);
  }
  return img;
}

void write_pnm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("pnm: cannot write " + path);
  out << (img.channels == 3 ? "P6" : "P5") << "\n"
      << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw std::runtime_error("pnm: write failed for " + path);
}

}  // namespace rovo
