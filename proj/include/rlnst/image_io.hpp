#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rlnst/tensor.hpp"

namespace rlnst {

// 8-bit interleaved RGB raster.
struct Raster {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<std::uint8_t> rgb;  // height * width * 3
};

// Round-half-up to 8 bits after clamping to [0, 1].
std::uint8_t quantize(double value);

// Raster <-> (1,3,H,W) tensor with values k/255.
template <typename T>
Tensor<T> to_tensor(const Raster& raster);
template <typename T>
Raster to_raster(const Tensor<T>& image);

// PNG (any bit depth/colour type, reduced to 8-bit RGB) and binary PPM (P6,
// maxval <= 255). The format is detected from the file signature.
Raster decode_image(const std::vector<std::uint8_t>& bytes);
Raster read_raster(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Raster& raster);
std::vector<std::uint8_t> encode_ppm(const Raster& raster);
// Writes PNG unless the extension is .ppm.
void write_raster(const Raster& raster, const std::filesystem::path& path);

template <typename T>
Tensor<T> read_image(const std::filesystem::path& path) {
  return to_tensor<T>(read_raster(path));
}

template <typename T>
void write_image(const Tensor<T>& image, const std::filesystem::path& path) {
  write_raster(to_raster(image), path);
}

// Images laid out left to right, top to bottom in `columns` columns with a
// white gutter of `gap` pixels. All tiles must share one size.
Raster contact_sheet(const std::vector<Raster>& tiles, int columns, int gap = 2);

// Regular files with a .png or .ppm extension, sorted lexicographically.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace rlnst
