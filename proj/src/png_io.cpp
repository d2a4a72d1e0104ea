#include "svpsf/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "svpsf/error.hpp"

namespace svpsf {
namespace {

void check_writable(const Image& image, const std::filesystem::path& path) {
  if (image.empty()) fail(ErrorKind::Size, "cannot write empty image " + path.string());
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

void write_levels16(const std::filesystem::path& path, const Image& image, double lo, double scale) {
  check_writable(image, path);
  std::vector<std::uint16_t> buf(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::round((image.pixels()[i] - lo) * scale);
    buf[i] = static_cast<std::uint16_t>(std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 65535.0));
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = image.width();
  img.height = image.height();
  img.format = PNG_FORMAT_LINEAR_Y;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
    fail(ErrorKind::Io, "failed to write " + path.string() + ": " + img.message);
}

// Piecewise-linear approximation of a viridis-like ramp.
std::array<std::uint8_t, 3> colormap(double t) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
  const double f = t - i;
  std::array<std::uint8_t, 3> rgb{};
  for (int c = 0; c < 3; ++c)
    rgb[c] = static_cast<std::uint8_t>(std::lround(stops[i][c] * (1 - f) + stops[i + 1][c] * f));
  return rgb;
}

}  // namespace

Image read_png(const std::filesystem::path& path, int* bit_depth) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    fail(ErrorKind::Io, "failed to read " + path.string() + ": " + img.message);
  const bool sixteen = (img.format & PNG_FORMAT_FLAG_LINEAR) != 0;
  img.format = sixteen ? PNG_FORMAT_LINEAR_Y : PNG_FORMAT_GRAY;
  Image out(static_cast<int>(img.width), static_cast<int>(img.height));
  if (sixteen) {
    std::vector<std::uint16_t> buf(PNG_IMAGE_SIZE(img) / 2);
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr))
      fail(ErrorKind::Io, "failed to decode " + path.string() + ": " + img.message);
    std::copy(buf.begin(), buf.end(), out.pixels().begin());
  } else {
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr))
      fail(ErrorKind::Io, "failed to decode " + path.string() + ": " + img.message);
    std::copy(buf.begin(), buf.end(), out.pixels().begin());
  }
  if (bit_depth) *bit_depth = sixteen ? 16 : 8;
  return out;
}

void write_png16(const std::filesystem::path& path, const Image& image) {
  write_levels16(path, image, 0.0, 1.0);
}

void write_png16_scaled(const std::filesystem::path& path, const Image& image, double lo, double hi) {
  write_levels16(path, image, lo, hi > lo ? 65535.0 / (hi - lo) : 0.0);
}

void write_png_colormap(const std::filesystem::path& path, const Image& image, double lo, double hi) {
  check_writable(image, path);
  std::vector<std::uint8_t> buf(image.size() * 3);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double t = hi > lo ? (image.pixels()[i] - lo) / (hi - lo) : 0.0;
    const auto rgb = colormap(t);
    std::copy(rgb.begin(), rgb.end(), buf.begin() + 3 * i);
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = image.width();
  img.height = image.height();
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
    fail(ErrorKind::Io, "failed to write " + path.string() + ": " + img.message);
}

}  // namespace svpsf
