#include "rlnst/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace rlnst {

namespace {

bool has_extension(const std::filesystem::path& p, const char* ext) {
  auto e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ext;
}

void check_raster(const Raster& r) {
  if (r.width <= 0 || r.height <= 0 || static_cast<std::int64_t>(r.rgb.size()) != r.width * r.height * 3) {
    throw ImageError("raster of " + std::to_string(r.width) + "x" + std::to_string(r.height) + " holds " +
                     std::to_string(r.rgb.size()) + " bytes");
  }
}

Raster decode_png(const std::vector<std::uint8_t>& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw ImageError(std::string("cannot decode PNG: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  Raster r;
  r.width = image.width;
  r.height = image.height;
  r.rgb.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, r.rgb.data(), 0, nullptr)) {
    std::string message = image.message;
    png_image_free(&image);
    throw ImageError("cannot decode PNG: " + message);
  }
  return r;
}

Raster decode_ppm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 2;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&](const char* what) {
    skip_space();
    std::int64_t v = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) && digits < 9) {
      v = v * 10 + (bytes[pos++] - '0');
      ++digits;
    }
    if (digits == 0) throw ImageError(std::string("malformed PPM header: bad ") + what);
    return v;
  };
  Raster r;
  r.width = number("width");
  r.height = number("height");
  const auto maxval = number("maxval");
  if (r.width <= 0 || r.height <= 0) throw ImageError("PPM with empty raster");
  if (maxval < 1 || maxval > 255) throw ImageError("unsupported PPM maxval " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw ImageError("malformed PPM header");
  ++pos;
  const auto need = static_cast<std::size_t>(r.width * r.height * 3);
  if (bytes.size() - pos < need) throw ImageError("truncated PPM raster");
  r.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  if (maxval != 255) {
    for (auto& v : r.rgb) {
      if (v > maxval) throw ImageError("PPM sample exceeds maxval");
      v = static_cast<std::uint8_t>((v * 255 + maxval / 2) / maxval);
    }
  }
  return r;
}

}  // namespace

std::uint8_t quantize(double value) {
  if (!(value > 0.0)) return 0;
  if (value >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::floor(value * 255.0 + 0.5));
}

template <typename T>
Tensor<T> to_tensor(const Raster& raster) {
  check_raster(raster);
  const auto h = raster.height, w = raster.width;
  std::vector<T> v(static_cast<std::size_t>(3 * h * w));
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        v[static_cast<std::size_t>((c * h + y) * w + x)] =
            static_cast<T>(raster.rgb[static_cast<std::size_t>((y * w + x) * 3 + c)] / 255.0);
      }
    }
  }
  return Tensor<T>::from({1, 3, h, w}, v);
}

template <typename T>
Raster to_raster(const Tensor<T>& image) {
  if (image.rank() != 4 || image.dim(0) != 1 || image.dim(1) != 3) {
    throw DimensionError("expected a (1,3,H,W) image, got " + to_string(image.shape()));
  }
  Raster r;
  r.height = image.dim(2);
  r.width = image.dim(3);
  r.rgb.resize(static_cast<std::size_t>(r.width * r.height * 3));
  const auto data = image.data();
  for (std::int64_t y = 0; y < r.height; ++y) {
    for (std::int64_t x = 0; x < r.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        r.rgb[static_cast<std::size_t>((y * r.width + x) * 3 + c)] =
            quantize(static_cast<double>(data[static_cast<std::size_t>((c * r.height + y) * r.width + x)]));
      }
    }
  }
  return r;
}

Raster decode_image(const std::vector<std::uint8_t>& bytes) {
  static const std::uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(png_sig, png_sig + 8, bytes.begin())) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
  throw ImageError("unrecognised image format (expected PNG or binary PPM)");
}

Raster read_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open image " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_image(bytes);
  } catch (const ImageError& e) {
    throw ImageError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_png(const Raster& raster) {
  check_raster(raster);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raster.width);
  image.height = static_cast<png_uint_32>(raster.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, raster.rgb.data(), 0, nullptr)) {
    throw ImageError(std::string("cannot encode PNG: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, raster.rgb.data(), 0, nullptr)) {
    throw ImageError(std::string("cannot encode PNG: ") + image.message);
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> encode_ppm(const Raster& raster) {
  check_raster(raster);
  const auto header = "P6\n" + std::to_string(raster.width) + " " + std::to_string(raster.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), raster.rgb.begin(), raster.rgb.end());
  return out;
}

void write_raster(const Raster& raster, const std::filesystem::path& path) {
  const auto bytes = has_extension(path, ".ppm") ? encode_ppm(raster) : encode_png(raster);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageError("cannot write image " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageError("short write to " + path.string());
}

Raster contact_sheet(const std::vector<Raster>& tiles, int columns, int gap) {
  if (tiles.empty() || columns < 1 || gap < 0) throw ArgumentError("contact_sheet: nothing to lay out");
  const auto tw = tiles[0].width, th = tiles[0].height;
  for (const auto& t : tiles) {
    check_raster(t);
    if (t.width != tw || t.height != th) throw DimensionError("contact_sheet: tiles differ in size");
  }
  const auto n = static_cast<std::int64_t>(tiles.size());
  const std::int64_t cols = std::min<std::int64_t>(columns, n);
  const std::int64_t rows = (n + cols - 1) / cols;
  Raster sheet;
  sheet.width = cols * tw + (cols + 1) * gap;
  sheet.height = rows * th + (rows + 1) * gap;
  sheet.rgb.assign(static_cast<std::size_t>(sheet.width * sheet.height * 3), 255);
  for (std::int64_t i = 0; i < n; ++i) {
    const auto x0 = gap + (i % cols) * (tw + gap), y0 = gap + (i / cols) * (th + gap);
    for (std::int64_t y = 0; y < th; ++y) {
      std::copy_n(tiles[i].rgb.begin() + y * tw * 3, tw * 3, sheet.rgb.begin() + ((y0 + y) * sheet.width + x0) * 3);
    }
  }
  return sheet;
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw ImageError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && (has_extension(entry.path(), ".png") || has_extension(entry.path(), ".ppm"))) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

template Tensor<float> to_tensor(const Raster&);
template Tensor<double> to_tensor(const Raster&);
template Raster to_raster(const Tensor<float>&);
template Raster to_raster(const Tensor<double>&);

}  // namespace rlnst
