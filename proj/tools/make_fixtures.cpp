// Regenerates the bundled procedural test images:
//   make_fixtures <dir>
#include <cmath>
#include <filesystem>
#include <iostream>

#include "rlnst/image_io.hpp"

namespace {

using rlnst::Raster;

// A disk over two linear gradients.
Raster content_image(int h, int w) {
  Raster r{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(h * w * 3))};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double cx = x - w * 0.4, cy = y - h * 0.55, rad = h * 0.25;
      const bool disk = cx * cx + cy * cy < rad * rad;
      auto* px = &r.rgb[static_cast<std::size_t>((y * w + x) * 3)];
      px[0] = rlnst::quantize(disk ? 0.9 : 0.2 + 0.5 * y / h);
      px[1] = rlnst::quantize(disk ? 0.3 : 0.4 + 0.3 * x / w);
      px[2] = rlnst::quantize(disk ? 0.2 : 0.7);
    }
  }
  return r;
}

// Interfering diagonal stripes.
Raster style_image(int h, int w) {
  Raster r{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(h * w * 3))};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double s = std::sin((x + y) * 0.6), c = std::cos(x * 0.35 - y * 0.2);
      auto* px = &r.rgb[static_cast<std::size_t>((y * w + x) * 3)];
      px[0] = rlnst::quantize(0.5 + 0.45 * s);
      px[1] = rlnst::quantize(0.5 + 0.45 * c * s);
      px[2] = rlnst::quantize(0.5 - 0.45 * c);
    }
  }
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <dir>\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);
  rlnst::write_raster(content_image(64, 64), dir / "content_64.png");
  rlnst::write_raster(style_image(64, 64), dir / "style_64.png");
  rlnst::write_raster(content_image(96, 128), dir / "content_96x128.png");
  rlnst::write_raster(style_image(96, 128), dir / "style_96x128.png");
  return 0;
}
